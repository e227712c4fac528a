use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::NullPValueMatrix;

use super::{calibration_index, check_alpha, CalibrationResult, Template, TemplateKind, THRESHOLD_CAP};

/// Default learned-template length: 2% of the voxel count, at least 1.
pub fn notip_k(m: usize) -> usize {
    ((0.02 * m as f64).round() as usize).max(1)
}

/// Empirical quantile curves of the leading null order statistics.
///
/// Curve `b` (0-based) at position `k` is the `(b+1)`-th smallest training value
/// of the k-th order statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedTemplateFamily {
    k: usize,
    b_train: usize,
    /// Column-major: `columns[k * b_train + b]`, each column ascending.
    columns: Vec<f64>,
}

impl LearnedTemplateFamily {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn b_train(&self) -> usize {
        self.b_train
    }

    pub fn value(&self, b: usize, k: usize) -> f64 {
        self.columns[k * self.b_train + b]
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k * self.b_train..(k + 1) * self.b_train]
    }

    pub fn curve(&self, b: usize) -> Vec<f64> {
        (0..self.k).map(|k| self.value(b, k)).collect()
    }

    /// `#{b : curve_b[k] < x}`.
    fn rank(&self, k: usize, x: f64) -> usize {
        self.column(k).partition_point(|&v| v < x)
    }
}

pub fn learn_notip_templates(train_null: &NullPValueMatrix, k: usize) -> Result<LearnedTemplateFamily> {
    let b_train = train_null.b();
    if b_train < 2 {
        return Err(Error::param(format!("need at least 2 training randomizations, got {b_train}")));
    }
    if k == 0 || k > train_null.width() {
        return Err(Error::param(format!(
            "K = {k} must be in 1..={} (retained order statistics)",
            train_null.width()
        )));
    }
    let mut columns = vec![0.0; k * b_train];
    columns.par_chunks_mut(b_train).enumerate().for_each(|(kk, col)| {
        for (slot, row) in col.iter_mut().zip(train_null.rows()) {
            *slot = row[kk];
        }
        col.sort_unstable_by(f64::total_cmp);
    });
    Ok(LearnedTemplateFamily { k, b_train, columns })
}

/// Notip calibration on an independent null matrix.
///
/// Row `b`'s pivotal rank `r_b = min_k rank_k(row_b[k])` is the number of curves
/// that the row provably stays on or above; the row can only violate curve `c`
/// (0-based) when `r_b <= c`. With `r*` the `floor(alpha B)`-th smallest rank,
/// the selected curve is `c = r* - 1`, violated by the rows with `r_b < r*` only.
/// When `r* = 0` no curve is safe and the template is identically zero.
pub fn calibrate_notip(
    family: &LearnedTemplateFamily,
    calib_null: &NullPValueMatrix,
    alpha: f64,
) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    if family.k > calib_null.width() {
        return Err(Error::param(format!(
            "learned K = {} exceeds the calibration row width {}",
            family.k,
            calib_null.width()
        )));
    }
    let k_alpha = calibration_index(alpha, calib_null.b())?;
    let ranks: Vec<usize> = (0..calib_null.b())
        .into_par_iter()
        .map(|b| {
            let row = calib_null.row(b);
            let mut r = family.b_train;
            for (k, &p) in row[..family.k].iter().enumerate() {
                r = r.min(family.rank(k, p));
                if r == 0 {
                    break;
                }
            }
            r
        })
        .collect();
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    let r_star = sorted[k_alpha - 1];
    let b_train = family.b_train as f64;
    let lambda_star = r_star as f64 / b_train;
    let (curve_index, thresholds) = match r_star {
        0 => (None, vec![0.0; family.k]),
        r => (Some(r - 1), family.curve(r - 1).into_iter().map(|t| t.min(THRESHOLD_CAP)).collect()),
    };
    let template = Template::new(TemplateKind::Notip { lambda_star }, alpha, thresholds)?;
    Ok(CalibrationResult {
        template,
        lambda_star,
        curve_index,
        pivotal_values: ranks.into_iter().map(|r| r as f64 / b_train).collect(),
        k_alpha,
    })
}

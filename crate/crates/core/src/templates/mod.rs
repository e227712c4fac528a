//! Threshold templates controlling the joint error rate (JER), and their
//! calibration on randomization null distributions.
//!
//! A template is a non-decreasing vector `t_1 <= ... <= t_K` in `[0, 1)`. The
//! convention throughout is strict: a p-value counts against threshold `t_k`
//! only when `p < t_k`.

mod notip;
mod pari;
mod simes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::NullPValueMatrix;

pub use notip::{calibrate_notip, learn_notip_templates, notip_k, LearnedTemplateFamily};
pub use pari::{calibrate_pari, calibrate_pari_with_k, pari_pivotal, pari_template};
pub use simes::{ari_template, hommel_value, hommel_value_sorted, simes_template};

/// Largest value a threshold may take.
pub const THRESHOLD_CAP: f64 = 1.0 - f64::EPSILON;

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateKind {
    Simes,
    /// Simes thresholds rescaled by the Hommel value `h`.
    Ari { h: usize },
    /// δ-shifted linear family at the calibrated level.
    Pari { delta: usize, lambda_star: f64 },
    /// Learned quantile curve at the calibrated level.
    Notip { lambda_star: f64 },
}

impl TemplateKind {
    pub fn label(&self) -> &'static str {
        match self {
            TemplateKind::Simes => "Simes",
            TemplateKind::Ari { .. } => "ARI",
            TemplateKind::Pari { .. } => "pARI",
            TemplateKind::Notip { .. } => "Notip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    kind: TemplateKind,
    alpha: f64,
    thresholds: Vec<f64>,
}

impl Template {
    pub fn new(kind: TemplateKind, alpha: f64, thresholds: Vec<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if thresholds.is_empty() {
            return Err(Error::param("a template needs at least one threshold"));
        }
        if let Some(bad) = thresholds.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::param(format!("threshold {bad} outside [0, 1)")));
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("template thresholds must be non-decreasing"));
        }
        Ok(Self { kind, alpha, thresholds })
    }

    pub fn kind(&self) -> &TemplateKind {
        &self.kind
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of thresholds `K`.
    pub fn k(&self) -> usize {
        self.thresholds.len()
    }

    pub fn to_record(&self) -> TemplateRecord {
        let (delta, lambda_star, h) = match self.kind {
            TemplateKind::Simes => (None, None, None),
            TemplateKind::Ari { h } => (None, None, Some(h)),
            TemplateKind::Pari { delta, lambda_star } => (Some(delta), Some(lambda_star), None),
            TemplateKind::Notip { lambda_star } => (None, Some(lambda_star), None),
        };
        TemplateRecord {
            kind: self.label().to_string(),
            alpha: self.alpha,
            k: self.k(),
            delta,
            lambda_star,
            h,
            thresholds: self.thresholds.clone(),
        }
    }

    pub fn from_record(rec: TemplateRecord) -> Result<Self> {
        let missing = |field: &str| Error::format(format!("{} template record lacks {field}", rec.kind));
        let kind = match rec.kind.as_str() {
            "Simes" => TemplateKind::Simes,
            "ARI" => TemplateKind::Ari { h: rec.h.ok_or_else(|| missing("h"))? },
            "pARI" => TemplateKind::Pari {
                delta: rec.delta.ok_or_else(|| missing("delta"))?,
                lambda_star: rec.lambda_star.ok_or_else(|| missing("lambda_star"))?,
            },
            "Notip" => TemplateKind::Notip { lambda_star: rec.lambda_star.ok_or_else(|| missing("lambda_star"))? },
            other => return Err(Error::format(format!("unknown template kind {other:?}"))),
        };
        if rec.k != rec.thresholds.len() {
            return Err(Error::format(format!("K = {} but {} thresholds", rec.k, rec.thresholds.len())));
        }
        Template::new(kind, rec.alpha, rec.thresholds)
    }
}

/// JSON form: `{kind, alpha, K, delta?, lambda_star?, h?, thresholds}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateRecord {
    pub kind: String,
    pub alpha: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub h: Option<usize>,
    pub thresholds: Vec<f64>,
}

impl Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Template::from_record(TemplateRecord::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub template: Template,
    /// Calibrated level: λ* for pARI, the quantile level r*/B_train for Notip.
    pub lambda_star: f64,
    /// Notip only: 0-based index of the selected learned curve, `None` when the
    /// calibrated level lies below every curve (all-zero template).
    pub curve_index: Option<usize>,
    pub pivotal_values: Vec<f64>,
    /// `floor(alpha * B)`.
    pub k_alpha: usize,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

/// `floor(alpha * b)`, robust to products that land a rounding error below an integer.
pub fn k_alpha(alpha: f64, b: usize) -> usize {
    let x = alpha * b as f64;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r as usize
    } else {
        x.floor() as usize
    }
}

pub(crate) fn calibration_index(alpha: f64, b: usize) -> Result<usize> {
    check_alpha(alpha)?;
    let k = k_alpha(alpha, b);
    if k == 0 {
        return Err(Error::param(format!(
            "floor(alpha * B) = 0 for alpha = {alpha}, B = {b}: too few randomizations"
        )));
    }
    Ok(k)
}

fn row_violates(row: &[f64], thresholds: &[f64]) -> bool {
    row.iter().zip(thresholds).any(|(p, t)| p < t)
}

/// Fraction of null rows with some `row[k] < t_k`, `k < K`.
pub fn empirical_jer(template: &Template, null: &NullPValueMatrix) -> Result<f64> {
    let t = template.thresholds();
    if t.len() > null.width() {
        return Err(Error::param(format!(
            "template has K = {} but null rows keep only {} order statistics",
            t.len(),
            null.width()
        )));
    }
    let violations = null.rows().filter(|row| row_violates(row, t)).count();
    Ok(violations as f64 / null.b() as f64)
}

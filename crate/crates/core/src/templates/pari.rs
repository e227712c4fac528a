use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::NullPValueMatrix;

use super::{calibration_index, check_alpha, empirical_jer, CalibrationResult, Template, TemplateKind, THRESHOLD_CAP};

/// Slopes `(k - delta) / (m - delta)` for `k` in `delta+1..=k_max`.
fn slopes(delta: usize, m: usize, k_max: usize) -> Vec<f64> {
    let denom = (m - delta) as f64;
    (delta + 1..=k_max).map(|k| (k - delta) as f64 / denom).collect()
}

fn check_delta(delta: usize, m: usize) -> Result<()> {
    if delta >= m {
        return Err(Error::param(format!("delta = {delta} must be below m = {m}")));
    }
    Ok(())
}

fn pivotal_with(row: &[f64], delta: usize, slopes: &[f64]) -> f64 {
    row[delta..delta + slopes.len()]
        .iter()
        .zip(slopes)
        .map(|(p, s)| p / s)
        .fold(f64::INFINITY, f64::min)
}

/// Largest λ for which the sorted row stays on or above `λ (k-δ)/(m-δ)` for all
/// `k > δ`.
pub fn pari_pivotal(sorted_row: &[f64], delta: usize, m: usize) -> Result<f64> {
    check_delta(delta, m)?;
    if sorted_row.len() != m {
        return Err(Error::param(format!("row has {} entries, expected m = {m}", sorted_row.len())));
    }
    Ok(pivotal_with(sorted_row, delta, &slopes(delta, m, m)))
}

/// `t_k = λ (k - δ)/(m - δ) 1{k > δ}` for `k` in `1..=k`, capped below 1.
pub fn pari_template(m: usize, delta: usize, lambda: f64, alpha: f64, k: usize) -> Result<Template> {
    check_delta(delta, m)?;
    if k == 0 || k > m {
        return Err(Error::param(format!("template size K = {k} must be in 1..={m}")));
    }
    let mut t = vec![0.0; k];
    if k > delta {
        for (slot, s) in t[delta..].iter_mut().zip(slopes(delta, m, k)) {
            *slot = (lambda * s).min(THRESHOLD_CAP);
        }
    }
    Template::new(TemplateKind::Pari { delta, lambda_star: lambda }, alpha, t)
}

/// pARI calibration over the full template length `K = m`.
pub fn calibrate_pari(null: &NullPValueMatrix, delta: usize, alpha: f64) -> Result<CalibrationResult> {
    calibrate_pari_with_k(null, delta, alpha, null.m())
}

/// pARI calibration with the k-range truncated to `1..=k`.
///
/// λ* is the `floor(alpha B)`-th smallest pivotal value, so only rows with a
/// strictly smaller pivotal value violate the template. If rounding in
/// `λ * slope` pushes a tied row over a threshold, λ* is stepped down until the
/// empirical JER is back within `alpha`.
pub fn calibrate_pari_with_k(null: &NullPValueMatrix, delta: usize, alpha: f64, k: usize) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    let m = null.m();
    check_delta(delta, m)?;
    if k <= delta || k > null.width() {
        return Err(Error::param(format!(
            "pARI needs delta < K <= row width, got delta = {delta}, K = {k}, width = {}",
            null.width()
        )));
    }
    let k_alpha = calibration_index(alpha, null.b())?;
    let s = slopes(delta, m, k);
    let pivotal_values: Vec<f64> = (0..null.b())
        .into_par_iter()
        .map(|b| pivotal_with(null.row(b), delta, &s))
        .collect();
    let mut sorted = pivotal_values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut lambda = sorted[k_alpha - 1];
    let mut template = pari_template(m, delta, lambda, alpha, k)?;
    let mut steps = 0;
    while empirical_jer(&template, null)? > alpha {
        steps += 1;
        if steps > 64 || lambda <= 0.0 {
            return Err(Error::Contract("pARI calibration could not reach the target JER".into()));
        }
        lambda = lambda.next_down().max(0.0);
        template = pari_template(m, delta, lambda, alpha, k)?;
    }
    Ok(CalibrationResult { template, lambda_star: lambda, curve_index: None, pivotal_values, k_alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_row() {
        let m = 8;
        let row: Vec<f64> = (1..=m).map(|k| k as f64 / m as f64).collect();
        assert!((pari_pivotal(&row, 0, m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn four_term_hand_evaluation() {
        let row = [0.1, 0.3, 0.5, 0.9];
        let lambda = pari_pivotal(&row, 0, 4).unwrap();
        assert!((lambda - 0.4).abs() < 1e-15);
    }

    #[test]
    fn single_term_case() {
        let row = [0.05, 0.2, 0.7];
        assert_eq!(pari_pivotal(&row, 2, 3).unwrap(), 0.7);
        assert!(matches!(pari_pivotal(&row, 3, 3), Err(Error::Param(_))));
    }

    #[test]
    fn two_rows_half_alpha() {
        let null = NullPValueMatrix::from_rows(3, 3, 0, vec![vec![0.1, 0.5, 0.9], vec![0.3, 0.4, 0.6]]).unwrap();
        let cal = calibrate_pari(&null, 0, 0.5).unwrap();
        let p0 = pari_pivotal(null.row(0), 0, 3).unwrap();
        let p1 = pari_pivotal(null.row(1), 0, 3).unwrap();
        assert_eq!(cal.k_alpha, 1);
        assert_eq!(cal.lambda_star, p0.min(p1));
    }

    #[test]
    fn too_few_rows() {
        let null = NullPValueMatrix::from_rows(2, 2, 0, vec![vec![0.1, 0.5]; 5]).unwrap();
        assert!(matches!(calibrate_pari(&null, 0, 0.1), Err(Error::Param(_))));
    }

    #[test]
    fn delta_zeroes_leading_thresholds() {
        let t = pari_template(1000, 27, 0.3, 0.05, 1000).unwrap();
        assert!(t.thresholds()[..27].iter().all(|&v| v == 0.0));
        assert!(t.thresholds()[27] > 0.0);
    }
}

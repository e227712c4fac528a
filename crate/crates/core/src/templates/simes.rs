use crate::data::PValueVector;
use crate::error::{Error, Result};

use super::{check_alpha, Template, TemplateKind, THRESHOLD_CAP};

fn check_k(m: usize, k: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::param(format!("template size K = {k} must be in 1..={m}")));
    }
    Ok(())
}

/// `t_k = alpha * k / m` for `k` in `1..=K`.
pub fn simes_template(m: usize, alpha: f64, k: usize) -> Result<Template> {
    check_alpha(alpha)?;
    check_k(m, k)?;
    let t = (1..=k).map(|k| alpha * k as f64 / m as f64).collect();
    Template::new(TemplateKind::Simes, alpha, t)
}

/// Hommel value of a p-value vector.
pub fn hommel_value(p: &PValueVector, alpha: f64) -> Result<usize> {
    hommel_value_sorted(&p.sorted(), alpha)
}

/// Hommel value `h = max{ i : p_(m-i+j) > j*alpha/i for all j in 1..=i }`, or 0
/// when no `i` qualifies. `sorted` must be ascending.
///
/// If `i` qualifies then so does `i - 1` (the `i - 1` largest p-values clear the
/// smaller critical values `j*alpha/(i-1) <= (j+1)*alpha/i`), so the qualifying
/// sizes form a prefix of `1..=m` and a binary search over `i` finds `h`. The
/// critical values are computed as `alpha * (j / i)`, which keeps that ordering
/// exact in floating point.
pub fn hommel_value_sorted(sorted: &[f64], alpha: f64) -> Result<usize> {
    check_alpha(alpha)?;
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Contract("hommel_value_sorted needs ascending p-values".into()));
    }
    let m = sorted.len();
    let qualifies = |i: usize| {
        let top = &sorted[m - i..];
        top.iter()
            .enumerate()
            .all(|(j0, &p)| p > alpha * ((j0 + 1) as f64 / i as f64))
    };
    if m == 0 || !qualifies(1) {
        return Ok(0);
    }
    // invariant: qualifies(lo), !qualifies(hi) (hi = m + 1 is a sentinel)
    let (mut lo, mut hi) = (1usize, m + 1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if qualifies(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// All-Resolutions Inference thresholds `alpha * k / h`, capped below 1.
///
/// With `h = 0` every hypothesis is rejected by closed testing and the template
/// is the all-signal family.
pub fn ari_template(p: &PValueVector, alpha: f64, k: usize) -> Result<Template> {
    check_alpha(alpha)?;
    check_k(p.m(), k)?;
    let h = hommel_value(p, alpha)?;
    let t = if h == 0 {
        vec![THRESHOLD_CAP; k]
    } else {
        (1..=k).map(|k| (alpha * k as f64 / h as f64).min(THRESHOLD_CAP)).collect()
    };
    Template::new(TemplateKind::Ari { h }, alpha, t)
}

//! Interpolation lower bounds on the true discovery proportion of voxel sets.
//!
//! For a template `t` and a set `S`, the bound is
//! `max(0, max_k (1 - k + #{i in S : p_i < t_k})) / |S|` over `k` in `1..=K`.
//! The integer numerator is computed first; both evaluation routes divide the
//! same two integers, so they agree bit for bit.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::{PValueVector, StatMap};
use crate::error::{Error, Result};
use crate::templates::Template;

/// A non-empty set of distinct masked voxel indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    indices: Vec<usize>,
}

impl Selection {
    pub fn new(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("empty voxel selection"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("voxel selection has duplicate indices"));
        }
        if let Some(&last) = indices.last().filter(|&&i| i >= m) {
            return Err(Error::Index { index: last, len: m });
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Bound numerator and set size; `value()` is their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundCount {
    pub discoveries: usize,
    pub size: usize,
}

impl BoundCount {
    pub fn value(&self) -> f64 {
        self.discoveries as f64 / self.size as f64
    }

    /// The bound truncated to hundredths, exactly (no floating rounding).
    pub fn hundredths(&self) -> usize {
        100 * self.discoveries / self.size
    }
}

/// Explicit double loop over thresholds and set members.
pub fn bound_count_bruteforce(p_s: &[f64], template: &Template) -> Result<BoundCount> {
    if p_s.is_empty() {
        return Err(Error::param("TDP bound of an empty set"));
    }
    let mut best: i64 = 0;
    for (k0, &t) in template.thresholds().iter().enumerate() {
        let hits = p_s.iter().filter(|&&p| p < t).count() as i64;
        best = best.max(1 - (k0 as i64 + 1) + hits);
    }
    Ok(BoundCount { discoveries: best as usize, size: p_s.len() })
}

pub fn tdp_bound_bruteforce(p_s: &[f64], template: &Template) -> Result<f64> {
    Ok(bound_count_bruteforce(p_s, template)?.value())
}

/// Running sweep shared by the linear bound and the prefix curves.
///
/// For ascending p-values, let `kappa_j` be the first (1-based) threshold index
/// with `t_kappa > p_j`. Then `#{i : p_i < t_k} = #{j : kappa_j <= k}`, the
/// maximum of `1 - k + count` is reached at some `k = kappa_j`, and the numerator
/// of any prefix of length `s` is `max(0, max_{j <= s} (j + 1 - kappa_j))`.
struct Sweep<'a> {
    thresholds: &'a [f64],
    kappa: usize,
    seen: usize,
    best: usize,
}

impl<'a> Sweep<'a> {
    fn new(template: &'a Template) -> Self {
        Self { thresholds: template.thresholds(), kappa: 0, seen: 0, best: 0 }
    }

    /// Feeds the next p-value (non-decreasing order) and returns the numerator
    /// of the prefix seen so far.
    fn push(&mut self, p: f64) -> usize {
        self.seen += 1;
        while self.kappa < self.thresholds.len() && !(p < self.thresholds[self.kappa]) {
            self.kappa += 1;
        }
        if self.kappa < self.thresholds.len() {
            // 1-based kappa is self.kappa + 1
            let value = (self.seen + 1).saturating_sub(self.kappa + 1);
            self.best = self.best.max(value);
        }
        self.best
    }
}

fn check_sorted(p: &[f64]) -> Result<()> {
    if p.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Contract("p-values of the set must be sorted ascending".into()));
    }
    Ok(())
}

/// O(|S| + K) bound for an ascending vector of p-values.
pub fn bound_count_linear(sorted_p_s: &[f64], template: &Template) -> Result<BoundCount> {
    if sorted_p_s.is_empty() {
        return Err(Error::param("TDP bound of an empty set"));
    }
    check_sorted(sorted_p_s)?;
    let mut sweep = Sweep::new(template);
    let mut best = 0;
    for &p in sorted_p_s {
        best = sweep.push(p);
    }
    Ok(BoundCount { discoveries: best, size: sorted_p_s.len() })
}

pub fn tdp_bound_linear(sorted_p_s: &[f64], template: &Template) -> Result<f64> {
    Ok(bound_count_linear(sorted_p_s, template)?.value())
}

/// Bound for a selection, sorting its p-values first.
pub fn bound_for_selection(p: &PValueVector, selection: &Selection, template: &Template) -> Result<BoundCount> {
    let mut p_s = p.gather(selection.indices());
    p_s.sort_unstable_by(f64::total_cmp);
    bound_count_linear(&p_s, template)
}

/// Bounds of every prefix of an ascending p-value sequence, in one pass.
pub fn prefix_bounds(sorted_p: &[f64], template: &Template) -> Result<Vec<BoundCount>> {
    check_sorted(sorted_p)?;
    let mut sweep = Sweep::new(template);
    Ok(sorted_p
        .iter()
        .enumerate()
        .map(|(i, &p)| BoundCount { discoveries: sweep.push(p), size: i + 1 })
        .collect())
}

/// Exact TDP of a set given the true null indicator (simulation only).
pub fn true_tdp(selection: &Selection, h0: &[bool]) -> Result<f64> {
    let nulls = selection
        .indices()
        .iter()
        .map(|&i| h0.get(i).copied().ok_or(Error::Index { index: i, len: h0.len() }))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    Ok(1.0 - nulls as f64 / selection.len() as f64)
}

/// Masked voxel indices ordered by decreasing `|Z|`, ties by ascending index.
pub fn order_by_abs_z(zmap: &StatMap) -> Vec<usize> {
    let z = zmap.z();
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    order
}

/// Top-k set `S_k` of the `|Z|` ordering.
pub fn top_k_selection(zmap: &StatMap, k: usize) -> Result<Selection> {
    if k == 0 || k > zmap.m() {
        return Err(Error::param(format!("k = {k} must be in 1..={}", zmap.m())));
    }
    let order = order_by_abs_z(zmap);
    Selection::new(order[..k].to_vec(), zmap.m())
}

/// `|Z|` values marking the reference vertical lines of a confidence curve.
pub const CURVE_REFERENCE_Z: [f64; 4] = [3.0, 3.5, 4.0, 4.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceCurve {
    pub ks: Vec<usize>,
    /// `|Z|` of the k-th voxel in the ordering.
    pub z_at_k: Vec<f64>,
    pub bounds: IndexMap<String, Vec<f64>>,
    /// `(z, #{|Z| >= z})` for each reference value.
    pub reference_k: Vec<(f64, usize)>,
}

/// Bounds of the top-k sets `S_k` for each `k` in `ks` and each template.
pub fn confidence_curve(
    zmap: &StatMap,
    p: &PValueVector,
    templates: &IndexMap<String, Template>,
    ks: &[usize],
) -> Result<ConfidenceCurve> {
    let m = zmap.m();
    if p.m() != m {
        return Err(Error::param("Z map and p-values have different lengths"));
    }
    if ks.iter().any(|&k| k == 0 || k > m) {
        return Err(Error::param(format!("curve ks must lie in 1..={m}")));
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("curve ks must be strictly increasing"));
    }
    let order = order_by_abs_z(zmap);
    let ordered_p: Vec<f64> = order.iter().map(|&i| p.values()[i]).collect();
    let monotone = ordered_p.windows(2).all(|w| w[0] <= w[1]);

    let mut bounds = IndexMap::new();
    for (name, template) in templates {
        let values = if monotone {
            let all = prefix_bounds(&ordered_p, template)?;
            ks.iter().map(|&k| all[k - 1].value()).collect()
        } else {
            // p is not monotone in |Z| (one-sided tests): sort each prefix.
            ks.iter()
                .map(|&k| {
                    let mut prefix = ordered_p[..k].to_vec();
                    prefix.sort_unstable_by(f64::total_cmp);
                    tdp_bound_linear(&prefix, template)
                })
                .collect::<Result<Vec<_>>>()?
        };
        bounds.insert(name.clone(), values);
    }
    let z = zmap.z();
    let z_at_k = ks.iter().map(|&k| z[order[k - 1]].abs()).collect();
    let reference_k = CURVE_REFERENCE_Z
        .iter()
        .map(|&zr| (zr, z.iter().filter(|v| v.abs() >= zr).count()))
        .collect();
    Ok(ConfidenceCurve { ks: ks.to_vec(), z_at_k, bounds, reference_k })
}

/// `n` log-spaced distinct integers in `1..=m`, always including 1 and m.
pub fn log_spaced_ks(m: usize, n: usize) -> Vec<usize> {
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let mut ks: Vec<usize> = (0..n)
        .map(|i| {
            let f = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            ((m as f64).powf(f).round() as usize).clamp(1, m)
        })
        .collect();
    ks.push(m);
    ks.sort_unstable();
    ks.dedup();
    ks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{Template, TemplateKind};

    fn template(t: Vec<f64>) -> Template {
        Template::new(TemplateKind::Simes, 0.1, t).unwrap()
    }

    #[test]
    fn no_discoveries() {
        let t = template(vec![0.01, 0.02]);
        assert_eq!(tdp_bound_bruteforce(&[0.5, 0.03], &t).unwrap(), 0.0);
        assert_eq!(tdp_bound_linear(&[0.03, 0.5], &t).unwrap(), 0.0);
    }

    #[test]
    fn single_voxel() {
        let t = template(vec![0.01, 0.02]);
        assert_eq!(tdp_bound_bruteforce(&[0.001], &t).unwrap(), 1.0);
        assert_eq!(tdp_bound_linear(&[0.001], &t).unwrap(), 1.0);
        assert_eq!(tdp_bound_linear(&[0.01], &t).unwrap(), 0.0);
    }

    #[test]
    fn hand_enumeration() {
        let t = template(vec![0.01, 0.02, 0.03]);
        let p = [0.005, 0.015, 0.025, 0.5];
        assert_eq!(tdp_bound_bruteforce(&p, &t).unwrap(), 0.25);
        assert_eq!(tdp_bound_linear(&p, &t).unwrap(), 0.25);
    }

    #[test]
    fn empty_and_unsorted() {
        let t = template(vec![0.01]);
        assert!(matches!(tdp_bound_bruteforce(&[], &t), Err(Error::Param(_))));
        assert!(matches!(tdp_bound_linear(&[0.5, 0.1], &t), Err(Error::Contract(_))));
    }

    #[test]
    fn exact_truncation() {
        let c = BoundCount { discoveries: 3, size: 10 };
        assert_eq!(c.hundredths(), 30);
        assert_eq!(BoundCount { discoveries: 2, size: 3 }.hundredths(), 66);
    }

    #[test]
    fn true_tdp_counts() {
        let h0: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let inside = Selection::new((0..5).collect(), 20).unwrap();
        let outside = Selection::new((12..15).collect(), 20).unwrap();
        let half = Selection::new((5..15).collect(), 20).unwrap();
        assert_eq!(true_tdp(&inside, &h0).unwrap(), 1.0);
        assert_eq!(true_tdp(&outside, &h0).unwrap(), 0.0);
        assert_eq!(true_tdp(&half, &h0).unwrap(), 0.5);
        assert!(Selection::new(vec![], 20).is_err());
    }

    #[test]
    fn log_spacing() {
        let ks = log_spaced_ks(27_000, 50);
        assert_eq!(ks[0], 1);
        assert_eq!(*ks.last().unwrap(), 27_000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert!(ks.len() > 40);
    }
}

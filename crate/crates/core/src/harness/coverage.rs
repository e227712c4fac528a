//! Monte-Carlo check of the simultaneous guarantee: how often does any set of the
//! checked family get a bound above its true TDP?

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_count_linear, log_spaced_ks, order_by_abs_z, prefix_bounds, BoundCount};
use crate::cluster::extract_clusters;
use crate::error::{Error, Result};
use crate::rng;
use crate::templates::Template;

use super::pipeline::{calibrate_methods, BenchConfig, DatasetSource, Observed};
use super::sim::{simulate_dataset, SimConfig};

pub const MIN_REPS: usize = 100;
pub const TOPK_POINTS: usize = 50;

const SIM_SALT: u64 = 0x7369_6D;
const NULL_SALT: u64 = 0x6E75_6C6C;
const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: String,
    pub violations: usize,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// `alpha + 3 sqrt(alpha (1 - alpha) / n_reps)`.
    pub budget: f64,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub sim: SimConfig,
    pub bench: BenchConfig,
    pub n_reps: usize,
    pub topk_points: usize,
    pub methods: Vec<MethodCoverage>,
}

impl CoverageReport {
    pub fn method(&self, name: &str) -> Option<&MethodCoverage> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let centre = (phat + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z / denom * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    // the exact endpoints at 0 and n successes are 0 and 1
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn coverage_budget(alpha: f64, n_reps: usize) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / n_reps as f64).sqrt()
}

/// Per-replication seeds: (simulation, randomization).
pub fn replication_seeds(sim_seed: u64, bench_seed: u64, rep: usize) -> (u64, u64) {
    (
        rng::derive_seed(sim_seed ^ SIM_SALT, rep as u64),
        rng::derive_seed(bench_seed ^ NULL_SALT, rep as u64),
    )
}

fn violates(b: BoundCount, active: usize) -> bool {
    b.discoveries > active
}

/// One replication: whether each template over-states the TDP of some checked set.
fn replicate(sim: &SimConfig, bench: &BenchConfig, rep: usize) -> Result<Vec<bool>> {
    let (sim_seed, null_seed) = replication_seeds(sim.seed, bench.seed, rep);
    let sim = SimConfig { seed: sim_seed, ..sim.clone() };
    let bench = BenchConfig { seed: null_seed, dataset: DatasetSource::Simulated(sim.clone()), ..bench.clone() };
    let data = simulate_dataset(&sim)?;
    let observed = Observed::compute(&data.stack, bench.sidedness)?;
    let templates = calibrate_methods(&data.stack, &observed, &bench)?.templates;
    let m = data.stack.m();

    // top-k sets: active counts along the |Z| ordering
    let order = order_by_abs_z(&observed.zmap);
    let ordered_p: Vec<f64> = order.iter().map(|&i| observed.p.values()[i]).collect();
    let mut active_prefix = Vec::with_capacity(m);
    let mut active = 0;
    for &i in &order {
        active += usize::from(!data.h0[i]);
        active_prefix.push(active);
    }
    let ks = log_spaced_ks(m, TOPK_POINTS);
    let monotone = ordered_p.windows(2).all(|w| w[0] <= w[1]);

    let clusters = bench
        .z_thresholds
        .iter()
        .map(|&z| extract_clusters(&observed.zmap, z, bench.connectivity))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .map(|c| {
            let mut p_s = observed.p.gather(c.voxels.indices());
            p_s.sort_unstable_by(f64::total_cmp);
            let active = c.voxels.indices().iter().filter(|&&i| !data.h0[i]).count();
            (p_s, active)
        })
        .collect::<Vec<_>>();

    let check = |t: &Template| -> Result<bool> {
        let topk = if monotone {
            let all = prefix_bounds(&ordered_p, t)?;
            ks.iter().any(|&k| violates(all[k - 1], active_prefix[k - 1]))
        } else {
            let mut hit = false;
            for &k in &ks {
                let mut prefix = ordered_p[..k].to_vec();
                prefix.sort_unstable_by(f64::total_cmp);
                if violates(bound_count_linear(&prefix, t)?, active_prefix[k - 1]) {
                    hit = true;
                    break;
                }
            }
            hit
        };
        if topk {
            return Ok(true);
        }
        for (p_s, active) in &clusters {
            if violates(bound_count_linear(p_s, t)?, *active) {
                return Ok(true);
            }
        }
        Ok(false)
    };
    templates.values().map(check).collect()
}

/// Runs `n_reps` independent simulate-calibrate-bound replications.
///
/// Replications run in parallel; results are collected in replication order, so
/// the report does not depend on scheduling.
pub fn coverage_experiment(sim: &SimConfig, bench: &BenchConfig, n_reps: usize) -> Result<CoverageReport> {
    if n_reps < MIN_REPS {
        return Err(Error::param(format!("coverage needs at least {MIN_REPS} replications, got {n_reps}")));
    }
    sim.validate()?;
    bench.validate()?;
    let per_rep: Vec<Vec<bool>> =
        (0..n_reps).into_par_iter().map(|rep| replicate(sim, bench, rep)).collect::<Result<_>>()?;

    let labels: Vec<&str> = bench.methods.iter().map(|s| s.label()).collect();
    let mut counts: IndexMap<&str, usize> = labels.iter().map(|&l| (l, 0)).collect();
    for rep in &per_rep {
        for (label, &v) in labels.iter().zip(rep) {
            *counts.get_mut(label).expect("label present") += usize::from(v);
        }
    }
    let budget = coverage_budget(bench.alpha, n_reps);
    let methods = counts
        .into_iter()
        .map(|(method, violations)| {
            let (wilson_low, wilson_high) = wilson_interval(violations, n_reps);
            let frequency = violations as f64 / n_reps as f64;
            MethodCoverage {
                method: method.to_string(),
                violations,
                frequency,
                wilson_low,
                wilson_high,
                budget,
                within_budget: frequency <= budget,
            }
        })
        .collect();
    Ok(CoverageReport {
        sim: sim.clone(),
        bench: BenchConfig { dataset: DatasetSource::Simulated(sim.clone()), ..bench.clone() },
        n_reps,
        topk_points: TOPK_POINTS,
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_values() {
        // reference values from statsmodels proportion_confint(method="wilson")
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.055_229_137).abs() < 1e-8, "{lo}");
        assert!((hi - 0.174_365_662).abs() < 1e-8, "{hi}");
        let (lo, hi) = wilson_interval(0, 500);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn budget_matches_formula() {
        assert!((coverage_budget(0.1, 500) - 0.140_249_2).abs() < 1e-6);
    }

    #[test]
    fn too_few_reps_rejected() {
        let sim = SimConfig::default();
        let bench = BenchConfig::default();
        assert!(matches!(coverage_experiment(&sim, &bench, 50), Err(Error::Param(_))));
    }
}

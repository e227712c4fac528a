//! End-to-end analysis: observed map, calibration of every requested method,
//! cluster tables across thresholds and the confidence curve.

use std::path::PathBuf;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bounds::{confidence_curve, log_spaced_ks, ConfidenceCurve};
use crate::cluster::{cluster_table, extract_clusters, ClusterTable, Connectivity};
use crate::data::{PValueVector, StatMap, SubjectStack};
use crate::error::{Error, Result};
use crate::phdat::read_phdat;
use crate::rng;
use crate::stats::{one_sample_z, p_from_z, sign_flip_null, sign_flip_null_truncated, NullPValueMatrix, Sidedness};
use crate::templates::{
    ari_template, calibrate_notip, calibrate_pari, check_alpha, learn_notip_templates, notip_k, simes_template,
    CalibrationResult, Template,
};

use super::sim::{simulate_dataset, SimConfig};

const TRAIN_SALT: u64 = 0x7472_6169_6E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum MethodSpec {
    Simes,
    #[serde(rename = "ARI")]
    Ari,
    #[serde(rename = "pARI")]
    Pari { delta: usize },
    /// `k: None` uses 2% of the voxel count.
    Notip { k: Option<usize> },
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Simes => "Simes",
            MethodSpec::Ari => "ARI",
            MethodSpec::Pari { .. } => "pARI",
            MethodSpec::Notip { .. } => "Notip",
        }
    }

    /// The compared methods with their recommended settings.
    pub fn standard_set(delta: usize, kmax: Option<usize>) -> Vec<MethodSpec> {
        vec![MethodSpec::Ari, MethodSpec::Notip { k: kmax }, MethodSpec::Pari { delta }]
    }

    pub fn parse_list(list: &str, delta: usize, kmax: Option<usize>) -> Result<Vec<MethodSpec>> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s.to_ascii_lowercase().as_str() {
                "simes" => Ok(MethodSpec::Simes),
                "ari" => Ok(MethodSpec::Ari),
                "pari" => Ok(MethodSpec::Pari { delta }),
                "notip" => Ok(MethodSpec::Notip { k: kmax }),
                other => Err(Error::param(format!("unknown method {other:?}"))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Phdat(PathBuf),
    Simulated(SimConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub methods: Vec<MethodSpec>,
    pub alpha: f64,
    /// Randomizations for pARI (identity included).
    pub b: usize,
    pub b_train: usize,
    pub b_calib: usize,
    /// Cluster-forming thresholds, ascending.
    pub z_thresholds: Vec<f64>,
    pub connectivity: Connectivity,
    pub sidedness: Sidedness,
    pub seed: u64,
    /// Number of log-spaced curve points; `None` evaluates every k.
    pub curve_points: Option<usize>,
    pub dataset: DatasetSource,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: MethodSpec::standard_set(27, None),
            alpha: 0.05,
            b: 1000,
            b_train: 1000,
            b_calib: 500,
            z_thresholds: vec![3.0, 3.5, 4.0, 4.5, 5.0],
            connectivity: Connectivity::TwentySix,
            sidedness: Sidedness::TwoSided,
            seed: 0,
            curve_points: None,
            dataset: DatasetSource::Simulated(SimConfig::default()),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.methods.is_empty() {
            return Err(Error::param("no methods requested"));
        }
        let mut labels: Vec<&str> = self.methods.iter().map(MethodSpec::label).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("each method may be requested once"));
        }
        if self.z_thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("z thresholds must be strictly ascending"));
        }
        if self.z_thresholds.iter().any(|z| !z.is_finite()) {
            return Err(Error::param("z thresholds must be finite"));
        }
        Ok(())
    }

    /// Seed of the Notip training round (the calibration round uses `seed`).
    pub fn train_seed(&self) -> u64 {
        rng::derive_seed(self.seed, TRAIN_SALT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub method: String,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k_alpha: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_seed: Option<u64>,
}

impl CalibrationSummary {
    fn plain(template: &Template) -> Self {
        Self {
            method: template.label().into(),
            k: template.k(),
            lambda_star: None,
            k_alpha: None,
            b: None,
            seed: None,
            train_seed: None,
        }
    }

    fn calibrated(cal: &CalibrationResult, b: usize, seed: u64) -> Self {
        Self {
            lambda_star: Some(cal.lambda_star),
            k_alpha: Some(cal.k_alpha),
            b: Some(b),
            seed: Some(seed),
            ..Self::plain(&cal.template)
        }
    }
}

/// Observed statistics of a dataset.
#[derive(Debug, Clone)]
pub struct Observed {
    pub zmap: StatMap,
    pub p: PValueVector,
}

impl Observed {
    pub fn compute(stack: &SubjectStack, sidedness: Sidedness) -> Result<Self> {
        let zmap = one_sample_z(stack, &vec![1.0; stack.n_subjects()])?;
        let p = p_from_z(&zmap, sidedness);
        Ok(Self { zmap, p })
    }
}

#[derive(Debug, Clone)]
pub struct Calibration {
    pub templates: IndexMap<String, Template>,
    pub summaries: Vec<CalibrationSummary>,
}

/// Calibrates every requested method on one dataset.
///
/// pARI and the Notip calibration round share the sign-flip stream keyed by
/// `cfg.seed` (the first `b_calib` rows are common); Notip's training round uses
/// an independent seed and keeps only its leading `K` order statistics.
pub fn calibrate_methods(stack: &SubjectStack, observed: &Observed, cfg: &BenchConfig) -> Result<Calibration> {
    cfg.validate()?;
    let m = stack.m();
    let alpha = cfg.alpha;
    let pari_b = cfg.methods.iter().any(|s| matches!(s, MethodSpec::Pari { .. })).then_some(cfg.b);
    let notip = cfg.methods.iter().find_map(|s| match s {
        MethodSpec::Notip { k } => Some(k.unwrap_or_else(|| notip_k(m))),
        _ => None,
    });
    if let Some(k) = notip {
        if k == 0 || k > m {
            return Err(Error::param(format!("Notip K = {k} must be in 1..={m}")));
        }
    }

    let shared_rows = pari_b.into_iter().chain(notip.map(|_| cfg.b_calib)).max();
    let shared: Option<NullPValueMatrix> = match (shared_rows, pari_b) {
        (Some(rows), Some(_)) => Some(sign_flip_null(stack, rows, cfg.seed, cfg.sidedness)?),
        (Some(rows), None) => {
            let width = notip.expect("notip requested");
            Some(sign_flip_null_truncated(stack, rows, cfg.seed, cfg.sidedness, width)?)
        }
        _ => None,
    };

    let mut templates = IndexMap::new();
    let mut summaries = Vec::new();
    for spec in &cfg.methods {
        let (template, summary) = match *spec {
            MethodSpec::Simes => {
                let t = simes_template(m, alpha, m)?;
                let s = CalibrationSummary::plain(&t);
                (t, s)
            }
            MethodSpec::Ari => {
                let t = ari_template(&observed.p, alpha, m)?;
                let s = CalibrationSummary::plain(&t);
                (t, s)
            }
            MethodSpec::Pari { delta } => {
                let null = shared.as_ref().expect("shared null computed for pARI");
                let null = if null.b() == cfg.b { null.clone() } else { null.take_rows(cfg.b)? };
                let cal = calibrate_pari(&null, delta, alpha)?;
                let s = CalibrationSummary::calibrated(&cal, cfg.b, cfg.seed);
                (cal.template, s)
            }
            MethodSpec::Notip { .. } => {
                let k = notip.expect("notip K resolved");
                let null = shared.as_ref().expect("shared null computed for Notip");
                let calib = null.take_rows(cfg.b_calib)?;
                let calib = if calib.width() == k { calib } else { calib.truncate(k)? };
                let train = sign_flip_null_truncated(stack, cfg.b_train, cfg.train_seed(), cfg.sidedness, k)?;
                let family = learn_notip_templates(&train, k)?;
                let cal = calibrate_notip(&family, &calib, alpha)?;
                let mut s = CalibrationSummary::calibrated(&cal, cfg.b_calib, cfg.seed);
                s.train_seed = Some(cfg.train_seed());
                (cal.template, s)
            }
        };
        templates.insert(spec.label().to_string(), template);
        summaries.push(summary);
    }
    Ok(Calibration { templates, summaries })
}

/// One record of the TDP-versus-cluster-size scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRecord {
    pub z: f64,
    pub cluster_id: usize,
    pub size_mm3: f64,
    pub method: String,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub config: BenchConfig,
    pub m: usize,
    pub n_subjects: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pi0: Option<f64>,
    pub calibration: Vec<CalibrationSummary>,
    pub templates: IndexMap<String, Template>,
    pub tables: Vec<ClusterTable>,
    pub curve: ConfidenceCurve,
    pub scatter: Vec<ScatterRecord>,
}

impl ReportBundle {
    pub fn methods(&self) -> Vec<String> {
        self.templates.keys().cloned().collect()
    }
}

pub fn load_dataset(source: &DatasetSource) -> Result<(SubjectStack, Option<Vec<bool>>)> {
    match source {
        DatasetSource::Phdat(path) => Ok((read_phdat(path)?, None)),
        DatasetSource::Simulated(sim) => {
            let data = simulate_dataset(sim)?;
            Ok((data.stack, Some(data.h0)))
        }
    }
}

/// Cluster tables at every configured threshold.
pub fn cluster_tables(observed: &Observed, templates: &IndexMap<String, Template>, cfg: &BenchConfig) -> Result<Vec<ClusterTable>> {
    cfg.z_thresholds
        .iter()
        .map(|&z| {
            let clusters = extract_clusters(&observed.zmap, z, cfg.connectivity)?;
            cluster_table(z, cfg.connectivity, &clusters, &observed.p, templates)
        })
        .collect()
}

pub fn analyze(stack: &SubjectStack, h0: Option<&[bool]>, cfg: &BenchConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let observed = Observed::compute(stack, cfg.sidedness)?;
    let calibration = calibrate_methods(stack, &observed, cfg)?;
    let tables = cluster_tables(&observed, &calibration.templates, cfg)?;
    let m = stack.m();
    let ks: Vec<usize> = match cfg.curve_points {
        Some(n) => log_spaced_ks(m, n),
        None => (1..=m).collect(),
    };
    let curve = confidence_curve(&observed.zmap, &observed.p, &calibration.templates, &ks)?;
    let scatter = tables
        .iter()
        .flat_map(|table| {
            table.rows.iter().flat_map(move |row| {
                row.bounds.iter().map(move |(method, b)| ScatterRecord {
                    z: table.z_threshold,
                    cluster_id: row.cluster.id,
                    size_mm3: row.cluster.size_mm3,
                    method: method.clone(),
                    bound: b.value(),
                })
            })
        })
        .collect();
    let pi0 = h0.map(|h| h.iter().filter(|&&b| b).count() as f64 / h.len() as f64);
    Ok(ReportBundle {
        config: cfg.clone(),
        m,
        n_subjects: stack.n_subjects(),
        pi0,
        calibration: calibration.summaries,
        templates: calibration.templates,
        tables,
        curve,
        scatter,
    })
}

/// Loads (or simulates) the configured dataset and runs the full analysis.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    let (stack, h0) = load_dataset(&cfg.dataset)?;
    analyze(&stack, h0.as_deref(), cfg)
}

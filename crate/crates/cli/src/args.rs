use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use posthoc_core::harness::report::ReportFormat;
use posthoc_core::harness::sim::{SignalRegion, SimConfig};
use posthoc_core::{Connectivity, Sidedness};

#[derive(Debug, Parser)]
#[command(name = "posthoc", version, about = "Post hoc TDP lower bounds for statistical maps")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Confidence budget.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Randomizations for pARI and the null cache.
    #[arg(long, global = true, default_value_t = 1000)]
    pub b: usize,
    #[arg(long = "b-train", global = true, default_value_t = 1000)]
    pub b_train: usize,
    #[arg(long = "b-calib", global = true, default_value_t = 500)]
    pub b_calib: usize,
    #[arg(long, global = true, default_value_t = 27)]
    pub delta: usize,
    /// Notip template length (default: 2% of the voxel count).
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    #[arg(long, global = true, default_value = "26", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
    /// Comma-separated cluster-forming thresholds.
    #[arg(long, global = true, default_value = "3,3.5,4,4.5,5", value_parser = parse_z_list)]
    pub z: ZList,
    /// Comma-separated output formats among csv, json, svg.
    #[arg(long, global = true, default_value = "csv,json")]
    pub format: String,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// PHDAT subject stack.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Comma-separated methods among simes, ari, pari, notip.
    #[arg(long, global = true, default_value = "ari,notip,pari")]
    pub methods: String,
    #[arg(long, global = true, default_value = "two-sided", value_parser = parse_sidedness)]
    pub sidedness: Sidedness,
}

impl Global {
    pub fn formats(&self) -> posthoc_core::Result<Vec<ReportFormat>> {
        ReportFormat::parse_list(&self.format)
    }
}

#[derive(Debug, Clone)]
pub struct ZList(pub Vec<f64>);

fn parse_z_list(s: &str) -> Result<ZList, String> {
    s.split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad z value {v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(ZList)
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u32 = s.parse().map_err(|_| format!("connectivity must be 6, 18 or 26, got {s:?}"))?;
    Connectivity::from_count(n).map_err(|e| e.to_string())
}

fn parse_sidedness(s: &str) -> Result<Sidedness, String> {
    s.parse().map_err(|e: posthoc_core::Error| e.to_string())
}

fn parse_region(s: &str) -> Result<SignalRegion, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad region field {x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, z, radius, effect] => Ok(SignalRegion { center: [x, y, z], radius, effect }),
        _ => Err("a region is x,y,z,radius,effect (voxel units)".into()),
    }
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String>
where
    T::Err: std::fmt::Display,
{
    let v: Vec<T> = s.split(',').map(|x| x.trim().parse::<T>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    <[T; 3]>::try_from(v).map_err(|_| "expected three comma-separated values".to_string())
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    parse_triple(s)
}

fn parse_voxel_size(s: &str) -> Result<[f32; 3], String> {
    if !s.contains(',') {
        let v: f32 = s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())?;
        return Ok([v; 3]);
    }
    parse_triple(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Only the regions given with --region (none: all-null).
    Custom,
    /// Small strong blob plus large moderate blob.
    TwoCluster,
}

/// Synthetic dataset options.
#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, value_enum, default_value = "custom")]
    pub design: Design,
    #[arg(long, default_value = "30,30,30", value_parser = parse_dims)]
    pub dims: [usize; 3],
    /// Voxel size in mm: one value or x,y,z.
    #[arg(long = "voxel-size", default_value = "3", value_parser = parse_voxel_size)]
    pub voxel_size: [f32; 3],
    #[arg(long = "n-subjects", default_value_t = 20)]
    pub n_subjects: usize,
    /// Gaussian smoothing width in voxels.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// Planted region x,y,z,radius,effect; repeatable.
    #[arg(long = "region", value_parser = parse_region)]
    pub regions: Vec<SignalRegion>,
    #[arg(long = "pi0")]
    pub pi0_target: Option<f64>,
}

impl SimArgs {
    pub fn config(&self, seed: u64) -> SimConfig {
        let mut cfg = SimConfig {
            dims: self.dims,
            voxel_size: self.voxel_size,
            n_subjects: self.n_subjects,
            sigma: self.sigma,
            regions: self.regions.clone(),
            pi0_target: self.pi0_target,
            seed,
        };
        if self.design == Design::TwoCluster {
            let base = SimConfig::two_cluster(seed);
            cfg.regions.splice(0..0, base.regions);
        }
        cfg
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a subject stack with known ground truth.
    Simulate(SimArgs),
    /// Compute and cache a sign-flip null p-value matrix (PNUL1).
    Nullcache,
    /// Calibrate the requested templates on --input.
    Calibrate,
    /// TDP bounds of one voxel set of --input.
    Bound {
        /// Comma-separated masked voxel indices.
        #[arg(long, conflicts_with = "top_k")]
        indices: Option<String>,
        /// The k voxels with the largest |Z|.
        #[arg(long = "top-k")]
        top_k: Option<usize>,
    },
    /// Cluster tables at every --z threshold.
    Clusters,
    /// Re-threshold one cluster at a higher z.
    Drill {
        /// Cluster id at the first --z threshold.
        #[arg(long)]
        cluster: usize,
        #[arg(long = "z-new")]
        z_new: f64,
    },
    /// Confidence curves over top-k sets.
    Curve {
        /// Number of log-spaced k values (default: every k).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Full benchmark on --input or a simulated dataset.
    Bench {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Monte-Carlo coverage of the simultaneous guarantee.
    Coverage {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, default_value_t = 500)]
        reps: usize,
    },
    /// Re-render a saved bundle.json.
    Report {
        #[arg(long)]
        bundle: PathBuf,
    },
}

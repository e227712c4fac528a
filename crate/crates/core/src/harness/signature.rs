//! Small-versus-large cluster comparison on the planted two-cluster design.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundCount;
use crate::cluster::{cluster_table, extract_clusters, Cluster};
use crate::error::{Error, Result};

use super::pipeline::{calibrate_methods, BenchConfig, DatasetSource, MethodSpec, Observed};
use super::sim::{simulate_dataset, SignalRegion, SimConfig, SimulatedDataset, LARGE_REGION, SMALL_REGION};

pub const SMALL_Z: f64 = 4.0;
pub const LARGE_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBounds {
    pub cluster_size: usize,
    pub notip: BoundCount,
    pub pari: BoundCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureTrial {
    pub seed: u64,
    /// Cluster at `SMALL_Z` covering the small region, if any.
    pub small: Option<PlantedBounds>,
    /// Cluster at `LARGE_Z` covering the large region, if any.
    pub large: Option<PlantedBounds>,
}

impl SignatureTrial {
    /// Notip wins on the small cluster and pARI holds its own on the large one.
    pub fn crossing(&self) -> bool {
        match (&self.small, &self.large) {
            (Some(s), Some(l)) => s.notip.value() > s.pari.value() && l.pari.value() >= l.notip.value(),
            _ => false,
        }
    }
}

fn in_region(data: &SimulatedDataset, r: &SignalRegion, idx: usize) -> bool {
    let c = data.stack.mask().coords_of(idx).expect("masked index");
    let d2: f64 = (0..3).map(|a| (c[a] as f64 - r.center[a]).powi(2)).sum();
    d2 <= r.radius * r.radius
}

/// The cluster with the most voxels inside the region (ties: lower id).
fn covering(clusters: Vec<Cluster>, hit: impl Fn(usize) -> bool) -> Option<Cluster> {
    clusters
        .into_iter()
        .map(|c| (c.voxels.indices().iter().filter(|&&i| hit(i)).count(), c))
        .filter(|(n, _)| *n > 0)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.id.cmp(&a.1.id)))
        .map(|(_, c)| c)
}

/// One seed of the design: simulate, calibrate Notip and pARI, bound both
/// planted clusters. `bench` supplies alpha, B's, delta and K.
pub fn signature_trial(seed: u64, bench: &BenchConfig) -> Result<SignatureTrial> {
    let (delta, k) = bench
        .methods
        .iter()
        .fold((None, None), |(d, k), m| match *m {
            MethodSpec::Pari { delta } => (Some(delta), k),
            MethodSpec::Notip { k: kk } => (d, Some(kk)),
            _ => (d, k),
        });
    let (Some(delta), Some(k)) = (delta, k) else {
        return Err(Error::param("the signature compares pARI and Notip; both must be configured"));
    };
    let sim = SimConfig::two_cluster(seed);
    let bench = BenchConfig {
        methods: vec![MethodSpec::Notip { k }, MethodSpec::Pari { delta }],
        seed,
        z_thresholds: vec![LARGE_Z, SMALL_Z],
        dataset: DatasetSource::Simulated(sim.clone()),
        ..bench.clone()
    };
    let data = simulate_dataset(&sim)?;
    let observed = Observed::compute(&data.stack, bench.sidedness)?;
    let templates = calibrate_methods(&data.stack, &observed, &bench)?.templates;
    let planted = |z: f64, region: &SignalRegion| -> Result<Option<PlantedBounds>> {
        let clusters = extract_clusters(&observed.zmap, z, bench.connectivity)?;
        let Some(c) = covering(clusters, |i| in_region(&data, region, i)) else {
            return Ok(None);
        };
        let table = cluster_table(z, bench.connectivity, std::slice::from_ref(&c), &observed.p, &templates)?;
        let b = &table.rows[0].bounds;
        Ok(Some(PlantedBounds { cluster_size: c.len(), notip: b["Notip"], pari: b["pARI"] }))
    };
    Ok(SignatureTrial { seed, small: planted(SMALL_Z, &SMALL_REGION)?, large: planted(LARGE_Z, &LARGE_REGION)? })
}

//! Supra-threshold clusters, per-cluster TDP bounds and drill-down.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_count_linear, BoundCount, Selection};
use crate::data::{voxel_to_world, Mask, PValueVector, StatMap};
use crate::error::{Error, Result};
use crate::templates::{check_alpha, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Connectivity {
    /// Faces.
    #[serde(rename = "6")]
    Six,
    /// Faces and edges.
    #[serde(rename = "18")]
    Eighteen,
    /// Faces, edges and corners.
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Self::Six),
            18 => Ok(Self::Eighteen),
            26 => Ok(Self::TwentySix),
            other => Err(Error::param(format!("connectivity must be 6, 18 or 26, got {other}"))),
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Self::Six => 6,
            Self::Eighteen => 18,
            Self::TwentySix => 26,
        }
    }

    /// Neighbour offsets that precede the centre in x-fastest scan order.
    fn backward_offsets(self) -> Vec<[i64; 3]> {
        let max_nonzero = match self {
            Self::Six => 1,
            Self::Eighteen => 2,
            Self::TwentySix => 3,
        };
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                    let precedes = (dz, dy, dx) < (0, 0, 0);
                    if nonzero >= 1 && nonzero <= max_nonzero && precedes {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components among `candidates` (masked indices, ascending).
fn label_components(mask: &Mask, candidates: &[usize], connectivity: Connectivity) -> Vec<Vec<usize>> {
    let grid = mask.grid();
    let [nx, ny, nz] = grid.dims.map(|d| d as i64);
    let slot: HashMap<usize, usize> = candidates.iter().enumerate().map(|(s, &v)| (v, s)).collect();
    let offsets = connectivity.backward_offsets();
    let mut uf = UnionFind::new(candidates.len());
    for (s, &v) in candidates.iter().enumerate() {
        let [x, y, z] = mask.coords_of(v).expect("candidate indices are in the mask").map(|c| c as i64);
        for [dx, dy, dz] in &offsets {
            let (qx, qy, qz) = (x + dx, y + dy, z + dz);
            if qx < 0 || qy < 0 || qz < 0 || qx >= nx || qy >= ny || qz >= nz {
                continue;
            }
            let linear = grid.linear_index([qx as usize, qy as usize, qz as usize]);
            if let Some(&t) = mask.masked_of(linear).and_then(|q| slot.get(&q)) {
                uf.union(s, t);
            }
        }
    }
    let mut groups: IndexMap<usize, Vec<usize>> = IndexMap::new();
    for (s, &v) in candidates.iter().enumerate() {
        let root = uf.find(s);
        groups.entry(root).or_default().push(v);
    }
    groups.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// 1-based, in decreasing order of peak statistic.
    pub id: usize,
    pub voxels: Selection,
    pub peak_index: usize,
    pub peak_world: [f64; 3],
    pub peak_stat: f64,
    pub size_mm3: f64,
    /// Cluster-forming threshold the cluster was extracted at.
    pub threshold: f64,
    pub connectivity: Connectivity,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }
}

fn build_clusters(
    zmap: &StatMap,
    candidates: &[usize],
    threshold: f64,
    connectivity: Connectivity,
) -> Result<Vec<Cluster>> {
    let mask = zmap.mask();
    let z = zmap.z();
    let voxel_volume = mask.grid().voxel_volume();
    let mut clusters = label_components(mask, candidates, connectivity)
        .into_iter()
        .map(|voxels| {
            let peak_index = *voxels
                .iter()
                .max_by(|&&a, &&b| z[a].total_cmp(&z[b]).then(b.cmp(&a)))
                .expect("components are non-empty");
            let count = voxels.len();
            Ok(Cluster {
                id: 0,
                voxels: Selection::new(voxels, mask.m())?,
                peak_index,
                peak_world: voxel_to_world(mask, peak_index)?,
                peak_stat: z[peak_index],
                size_mm3: count as f64 * voxel_volume,
                threshold,
                connectivity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    clusters.sort_by(|a, b| b.peak_stat.total_cmp(&a.peak_stat).then(a.peak_index.cmp(&b.peak_index)));
    for (i, c) in clusters.iter_mut().enumerate() {
        c.id = i + 1;
    }
    Ok(clusters)
}

/// Connected components of `{Z >= z}` within the mask.
pub fn extract_clusters(zmap: &StatMap, z: f64, connectivity: Connectivity) -> Result<Vec<Cluster>> {
    if !z.is_finite() {
        return Err(Error::param("cluster-forming threshold must be finite"));
    }
    let candidates: Vec<usize> = (0..zmap.m()).filter(|&i| zmap.z()[i] >= z).collect();
    build_clusters(zmap, &candidates, z, connectivity)
}

/// Re-thresholds the parent's voxels at `z_new` and splits them into clusters.
pub fn drill_down(parent: &Cluster, zmap: &StatMap, z_new: f64, connectivity: Connectivity) -> Result<Vec<Cluster>> {
    if !(z_new > parent.threshold) {
        return Err(Error::param(format!(
            "drill-down threshold {z_new} must exceed the parent's {}",
            parent.threshold
        )));
    }
    let candidates: Vec<usize> = parent.voxels.indices().iter().copied().filter(|&i| zmap.z()[i] >= z_new).collect();
    build_clusters(zmap, &candidates, z_new, connectivity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub cluster: Cluster,
    pub bounds: IndexMap<String, BoundCount>,
    /// Methods whose displayed (truncated) bound is the row maximum.
    pub best: Vec<String>,
    /// At least one method detects signal.
    pub reportable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub z_threshold: f64,
    pub connectivity: Connectivity,
    pub rows: Vec<ClusterRow>,
}

impl ClusterTable {
    pub fn methods(&self) -> Vec<String> {
        self.rows.first().map(|r| r.bounds.keys().cloned().collect()).unwrap_or_default()
    }

    pub fn reportable(&self) -> impl Iterator<Item = &ClusterRow> {
        self.rows.iter().filter(|r| r.reportable)
    }
}

pub fn cluster_table(
    z_threshold: f64,
    connectivity: Connectivity,
    clusters: &[Cluster],
    p: &PValueVector,
    templates: &IndexMap<String, Template>,
) -> Result<ClusterTable> {
    let rows = clusters
        .iter()
        .map(|c| {
            let mut p_s = p.gather(c.voxels.indices());
            p_s.sort_unstable_by(f64::total_cmp);
            let bounds = templates
                .iter()
                .map(|(name, t)| Ok((name.clone(), bound_count_linear(&p_s, t)?)))
                .collect::<Result<IndexMap<_, _>>>()?;
            let top = bounds.values().map(BoundCount::hundredths).max().unwrap_or(0);
            let best = if top > 0 {
                bounds.iter().filter(|(_, b)| b.hundredths() == top).map(|(n, _)| n.clone()).collect()
            } else {
                Vec::new()
            };
            let reportable = bounds.values().any(|b| b.discoveries > 0);
            Ok(ClusterRow { cluster: c.clone(), bounds, best, reportable })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterTable { z_threshold, connectivity, rows })
}

/// Holm step-down rejection set. Rejection is strict (`p < alpha/(m-i+1)`),
/// matching the strict threshold convention of the templates.
pub fn holm_fwer_set(p: &PValueVector, alpha: f64) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    let values = p.values();
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut rejected = Vec::new();
    for (i, &idx) in order.iter().enumerate() {
        if values[idx] < alpha / (m - i) as f64 {
            rejected.push(idx);
        } else {
            break;
        }
    }
    rejected.sort_unstable();
    Ok(rejected)
}

//! Synthetic group datasets: spatially smoothed Gaussian noise plus planted
//! spherical effects, with known ground truth.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Grid3, Mask, SubjectStack};
use crate::error::{Error, Result};
use crate::rng;

const NOISE_SALT: u64 = 0x6E6F_6973_65;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRegion {
    /// Centre in voxel coordinates.
    pub center: [f64; 3],
    /// Radius in voxels; voxels within this distance of the centre are active.
    pub radius: f64,
    /// Mean shift in noise standard deviations.
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dims: [usize; 3],
    pub voxel_size: [f32; 3],
    pub n_subjects: usize,
    /// Gaussian smoothing kernel width in voxels (0 disables smoothing).
    pub sigma: f64,
    pub regions: Vec<SignalRegion>,
    /// Expected null proportion; when set, the planted regions must realize it
    /// to within `PI0_TOLERANCE`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi0_target: Option<f64>,
    pub seed: u64,
}

pub const PI0_TOLERANCE: f64 = 0.01;

impl Default for SimConfig {
    fn default() -> Self {
        Self { dims: [30, 30, 30], voxel_size: [3.0; 3], n_subjects: 20, sigma: 2.0, regions: Vec::new(), pi0_target: None, seed: 0 }
    }
}

/// Planted two-cluster design: a small strong blob and a large moderate one,
/// far apart, in strongly smoothed noise on the default grid.
pub const SMALL_REGION: SignalRegion = SignalRegion { center: [7.0, 7.0, 15.0], radius: 1.5, effect: 2.0 };
pub const LARGE_REGION: SignalRegion = SignalRegion { center: [19.0, 19.0, 15.0], radius: 7.0, effect: 0.9 };

impl SimConfig {
    pub fn two_cluster(seed: u64) -> Self {
        Self { regions: vec![SMALL_REGION, LARGE_REGION], seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::param("simulation grid dimensions must be positive"));
        }
        if self.n_subjects < 2 {
            return Err(Error::param("simulation needs at least 2 subjects"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param(format!("smoothing width must be >= 0, got {}", self.sigma)));
        }
        for r in &self.regions {
            if !r.effect.is_finite() || !(r.radius >= 0.0) {
                return Err(Error::param("signal regions need a finite effect and non-negative radius"));
            }
            let inside = r.center.iter().zip(self.dims).all(|(&c, d)| c >= 0.0 && c <= (d - 1) as f64);
            if !inside {
                return Err(Error::param(format!("region centre {:?} lies outside the grid", r.center)));
            }
        }
        if let Some(t) = self.pi0_target {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(format!("pi0 target must lie in [0, 1], got {t}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid3> {
        let origin = [0, 1, 2].map(|a| -((self.dims[a] - 1) as f64) / 2.0 * f64::from(self.voxel_size[a]));
        Grid3::scaled(self.dims, self.voxel_size, origin)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub stack: SubjectStack,
    /// True for voxels with no planted effect.
    pub h0: Vec<bool>,
    /// Planted effect per masked voxel (max over overlapping regions).
    pub effect: Vec<f64>,
}

impl SimulatedDataset {
    pub fn pi0(&self) -> f64 {
        self.h0.iter().filter(|&&b| b).count() as f64 / self.h0.len() as f64
    }
}

/// Truncated Gaussian kernel, radius `ceil(4 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let radius = (4.0 * sigma).ceil() as i64;
    (-radius..=radius).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect()
}

/// Sum of squared kernel weights landing inside `[0, n)` for each position.
fn axis_energy(kernel: &[f64], n: usize) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    (0..n as i64)
        .map(|pos| {
            (-radius..=radius)
                .filter(|d| (0..n as i64).contains(&(pos + d)))
                .map(|d| kernel[(d + radius) as usize].powi(2))
                .sum()
        })
        .collect()
}

fn convolve_axis(field: &mut [f64], dims: [usize; 3], axis: usize, kernel: &[f64], scratch: &mut Vec<f64>) {
    let radius = (kernel.len() / 2) as i64;
    let n = dims[axis] as i64;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let [nx, ny, nz] = dims;
    let lines: Vec<usize> = (0..nz)
        .flat_map(|z| (0..ny).flat_map(move |y| (0..nx).map(move |x| (x, y, z))))
        .filter(|&(x, y, z)| match axis {
            0 => x == 0,
            1 => y == 0,
            _ => z == 0,
        })
        .map(|(x, y, z)| x + nx * (y + ny * z))
        .collect();
    for start in lines {
        scratch.clear();
        scratch.extend((0..n as usize).map(|i| field[start + i * stride]));
        for i in 0..n {
            let mut acc = 0.0;
            for d in -radius..=radius {
                let j = i + d;
                if (0..n).contains(&j) {
                    acc += kernel[(d + radius) as usize] * scratch[j as usize];
                }
            }
            field[start + i as usize * stride] = acc;
        }
    }
}

/// Smooths i.i.d. noise in place and rescales every voxel to unit variance.
pub(crate) fn smooth_unit_variance(field: &mut [f64], dims: [usize; 3], sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    let kernel = gaussian_kernel(sigma);
    let mut scratch = Vec::new();
    for axis in 0..3 {
        convolve_axis(field, dims, axis, &kernel, &mut scratch);
    }
    let energy: Vec<Vec<f64>> = (0..3).map(|a| axis_energy(&kernel, dims[a])).collect();
    let [nx, ny, _] = dims;
    for (linear, v) in field.iter_mut().enumerate() {
        let (x, y, z) = (linear % nx, (linear / nx) % ny, linear / (nx * ny));
        *v /= (energy[0][x] * energy[1][y] * energy[2][z]).sqrt();
    }
}

fn effect_map(cfg: &SimConfig, grid: &Grid3) -> Vec<f64> {
    (0..grid.len())
        .map(|linear| {
            let c = grid.coords(linear);
            cfg.regions
                .iter()
                .filter(|r| {
                    let d2: f64 = (0..3).map(|a| (c[a] as f64 - r.center[a]).powi(2)).sum();
                    d2 <= r.radius * r.radius
                })
                .map(|r| r.effect)
                .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.max(e))))
                .unwrap_or(0.0)
        })
        .collect()
}

pub fn simulate_dataset(cfg: &SimConfig) -> Result<SimulatedDataset> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let n_voxels = grid.len();
    let effect = effect_map(cfg, &grid);
    if let Some(target) = cfg.pi0_target {
        let pi0 = effect.iter().filter(|&&e| e == 0.0).count() as f64 / n_voxels as f64;
        if (pi0 - target).abs() > PI0_TOLERANCE {
            return Err(Error::param(format!("planted regions give pi0 = {pi0:.4}, target {target}")));
        }
    }
    let noise_seed = rng::derive_seed(cfg.seed, NOISE_SALT);
    let mut data = Vec::with_capacity(cfg.n_subjects * n_voxels);
    let mut field = vec![0.0f64; n_voxels];
    for s in 0..cfg.n_subjects {
        let mut stream = rng::stream(noise_seed, s as u64);
        for v in field.iter_mut() {
            *v = stream.sample(StandardNormal);
        }
        smooth_unit_variance(&mut field, cfg.dims, cfg.sigma);
        data.extend(field.iter().zip(&effect).map(|(n, e)| (n + e) as f32));
    }
    let h0 = effect.iter().map(|&e| e == 0.0).collect();
    let mask = Arc::new(Mask::full(grid));
    let stack = SubjectStack::new(mask, cfg.n_subjects, data)?;
    Ok(SimulatedDataset { stack, h0, effect })
}

//! One-sample group statistics and the sign-flipping null engine.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{PValueVector, StatMap, SubjectStack};
use crate::error::{Error, Result};
use crate::phdat::Reader;
use crate::rng;
use crate::special::{normal_upper_tail, t_to_z};

/// Largest |Z| reported; beyond this the Gaussian tail underflows.
pub const Z_CAP: f64 = 38.0;
/// Smallest p-value reported.
pub const P_MIN: f64 = 1e-300;

pub const PNUL_MAGIC: &[u8; 5] = b"PNUL1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    #[default]
    TwoSided,
    OneSided,
}

impl std::str::FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" | "two" => Ok(Self::TwoSided),
            "one-sided" | "one" => Ok(Self::OneSided),
            other => Err(Error::param(format!("unknown sidedness {other:?}"))),
        }
    }
}

pub fn p_value(z: f64, sidedness: Sidedness) -> f64 {
    let p = match sidedness {
        Sidedness::TwoSided => 2.0 * normal_upper_tail(z.abs()),
        Sidedness::OneSided => normal_upper_tail(z),
    };
    p.clamp(P_MIN, 1.0)
}

/// Sign-flip-ready view of a subject stack: values in f64, subject-major, and
/// the per-voxel sum of squares (invariant under sign flips).
struct FlipKernel<'a> {
    stack: &'a SubjectStack,
    sumsq: Vec<f64>,
    n: usize,
}

impl<'a> FlipKernel<'a> {
    fn new(stack: &'a SubjectStack) -> Result<Self> {
        let n = stack.n_subjects();
        if n < 2 {
            return Err(Error::param(format!(
                "one-sample tests need at least 2 subjects, got {n}"
            )));
        }
        let mut sumsq = vec![0.0f64; stack.m()];
        for s in 0..n {
            for (acc, &v) in sumsq.iter_mut().zip(stack.subject(s)) {
                let v = f64::from(v);
                *acc += v * v;
            }
        }
        Ok(Self { stack, sumsq, n })
    }

    fn dof(&self) -> u32 {
        (self.n - 1) as u32
    }

    /// One-sample t statistics of the flipped data. Zero-variance voxels get
    /// `±inf` by the sign of the mean; all-zero voxels get 0.
    fn t_scores(&self, flips: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (s, &sign) in flips.iter().enumerate() {
            for (acc, &v) in out.iter_mut().zip(self.stack.subject(s)) {
                *acc += sign * f64::from(v);
            }
        }
        let n = self.n as f64;
        for (t, &ss) in out.iter_mut().zip(&self.sumsq) {
            let mean = *t / n;
            if ss == 0.0 || mean == 0.0 {
                *t = 0.0;
                continue;
            }
            let var = (ss - n * mean * mean) / (n - 1.0);
            // Cancellation floor: below this the variance is indistinguishable from 0.
            if var <= ss * 1e-14 {
                *t = f64::INFINITY.copysign(mean);
            } else {
                *t = mean / (var / n).sqrt();
            }
        }
    }
}

fn capped_z(t: f64, dof: u32) -> f64 {
    if t.is_infinite() {
        return Z_CAP.copysign(t);
    }
    let z = t_to_z(t, dof);
    if z.is_nan() {
        Z_CAP.copysign(t)
    } else {
        z.clamp(-Z_CAP, Z_CAP)
    }
}

fn check_flips(flips: &[f64], n: usize) -> Result<()> {
    if flips.len() != n {
        return Err(Error::param(format!("{} sign flips for {} subjects", flips.len(), n)));
    }
    if flips.iter().any(|&s| s != 1.0 && s != -1.0) {
        return Err(Error::param("sign flips must be +1 or -1"));
    }
    Ok(())
}

/// Z map of the one-sample t test on sign-flipped subject maps.
pub fn one_sample_z(stack: &SubjectStack, flips: &[f64]) -> Result<StatMap> {
    let kernel = FlipKernel::new(stack)?;
    check_flips(flips, kernel.n)?;
    let mut t = vec![0.0; stack.m()];
    kernel.t_scores(flips, &mut t);
    let dof = kernel.dof();
    let z = t.into_iter().map(|t| capped_z(t, dof)).collect();
    StatMap::new(Arc::clone(stack.mask()), z)
}

pub fn p_from_z(zmap: &StatMap, sidedness: Sidedness) -> PValueVector {
    let p = zmap.z().iter().map(|&z| p_value(z, sidedness)).collect();
    PValueVector::new(Arc::clone(zmap.mask()), p).expect("clamped p-values are valid")
}

/// Randomization null distribution of sorted p-values.
///
/// Row 0 is the observed data (identity flips). Rows may be truncated to their
/// `width` smallest entries when only the leading order statistics are needed.
#[derive(Debug, Clone, PartialEq)]
pub struct NullPValueMatrix {
    b: usize,
    m: usize,
    width: usize,
    seed: u64,
    rows: Vec<f64>,
}

impl NullPValueMatrix {
    /// Wraps precomputed rows; each row is sorted and checked.
    pub fn from_rows(m: usize, width: usize, seed: u64, rows: Vec<Vec<f64>>) -> Result<Self> {
        if width == 0 || width > m {
            return Err(Error::param(format!("row width {width} must be in 1..={m}")));
        }
        let b = rows.len();
        let mut flat = Vec::with_capacity(b * width);
        for (i, mut row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Data(format!("row {i} has {} entries, expected {width}", row.len())));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!("row {i} has entries outside [0, 1]")));
            }
            row.sort_unstable_by(f64::total_cmp);
            flat.extend(row);
        }
        Ok(Self { b, m, width, seed, rows: flat })
    }

    /// Number of randomizations, including the identity row.
    pub fn b(&self) -> usize {
        self.b
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of retained order statistics per row.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_full(&self) -> bool {
        self.width == self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.rows[b * self.width..(b + 1) * self.width]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.rows.chunks_exact(self.width)
    }

    /// Keeps the first `b` randomizations.
    pub fn take_rows(&self, b: usize) -> Result<Self> {
        if b == 0 || b > self.b {
            return Err(Error::param(format!("cannot take {b} of {} rows", self.b)));
        }
        Ok(Self { b, m: self.m, width: self.width, seed: self.seed, rows: self.rows[..b * self.width].to_vec() })
    }

    /// Keeps the first `width` order statistics of every row.
    pub fn truncate(&self, width: usize) -> Result<Self> {
        if width == 0 || width > self.width {
            return Err(Error::param(format!("cannot truncate width {} to {width}", self.width)));
        }
        let rows = self.rows().flat_map(|r| r[..width].iter().copied()).collect();
        Ok(Self { b: self.b, m: self.m, width, seed: self.seed, rows })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if !self.is_full() {
            return Err(Error::param("only full-width null matrices can be cached"));
        }
        let b = u32::try_from(self.b).map_err(|_| Error::param("B exceeds u32"))?;
        let m = u32::try_from(self.m).map_err(|_| Error::param("m exceeds u32"))?;
        let mut out = Vec::with_capacity(21 + 8 * self.rows.len());
        out.extend_from_slice(PNUL_MAGIC);
        out.extend_from_slice(&b.to_le_bytes());
        out.extend_from_slice(&m.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.rows {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(5, "magic")? != PNUL_MAGIC {
            return Err(Error::format("bad magic, expected \"PNUL1\""));
        }
        let b = r.u32("B")? as usize;
        let m = r.u32("m")? as usize;
        let seed = r.u64("seed")?;
        if b == 0 || m == 0 {
            return Err(Error::format("empty null matrix"));
        }
        let count = b.checked_mul(m).ok_or_else(|| Error::format("size overflow"))?;
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            rows.push(r.f64("rows")?);
        }
        r.finish()?;
        if rows.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("null matrix entries outside [0, 1]".into()));
        }
        if rows.chunks_exact(m).any(|row| row.windows(2).any(|w| w[0] > w[1])) {
            return Err(Error::Data("null matrix rows are not sorted".into()));
        }
        Ok(Self { b, m, width: m, seed, rows })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

/// Full null matrix: `b` rows of all `m` sorted p-values.
pub fn sign_flip_null(stack: &SubjectStack, b: usize, seed: u64, sidedness: Sidedness) -> Result<NullPValueMatrix> {
    sign_flip_null_truncated(stack, b, seed, sidedness, stack.m())
}

/// Null matrix keeping only the `width` smallest p-values of every row.
///
/// Only the retained voxels go through the t-to-p conversion; they are selected
/// by statistic (`|t|` two-sided, `t` one-sided), which orders p-values.
pub fn sign_flip_null_truncated(
    stack: &SubjectStack,
    b: usize,
    seed: u64,
    sidedness: Sidedness,
    width: usize,
) -> Result<NullPValueMatrix> {
    if b < 2 {
        return Err(Error::param(format!("need at least 2 randomizations, got {b}")));
    }
    let m = stack.m();
    if width == 0 || width > m {
        return Err(Error::param(format!("row width {width} must be in 1..={m}")));
    }
    let kernel = FlipKernel::new(stack)?;
    let dof = kernel.dof();
    let mut rows = vec![0.0f64; b * width];
    rows.par_chunks_mut(width).enumerate().for_each_init(
        || (vec![0.0f64; m], Vec::<f64>::with_capacity(m)),
        |(t, scratch), (row_idx, out)| {
            let flips = rng::sign_flips(seed, row_idx as u64, kernel.n);
            kernel.t_scores(&flips, t);
            if width == m {
                for (o, &tv) in out.iter_mut().zip(t.iter()) {
                    *o = p_value(capped_z(tv, dof), sidedness);
                }
            } else {
                scratch.clear();
                scratch.extend(t.iter().map(|&tv| match sidedness {
                    Sidedness::TwoSided => tv.abs(),
                    Sidedness::OneSided => tv,
                }));
                let pivot = m - width;
                scratch.select_nth_unstable_by(pivot, f64::total_cmp);
                for (o, &score) in out.iter_mut().zip(&scratch[pivot..]) {
                    *o = p_value(capped_z(score, dof), sidedness);
                }
            }
            out.sort_unstable_by(f64::total_cmp);
        },
    );
    Ok(NullPValueMatrix { b, m, width, seed, rows })
}

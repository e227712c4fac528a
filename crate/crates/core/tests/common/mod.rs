#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use posthoc_core::{Grid3, Mask, NullPValueMatrix, SubjectStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn full_mask(dims: [usize; 3]) -> Arc<Mask> {
    Arc::new(Mask::full(Grid3::scaled(dims, [2.0, 2.0, 2.0], [-10.0, -20.0, -30.0]).unwrap()))
}

pub fn gaussian_stack(rng: &mut ChaCha8Rng, mask: Arc<Mask>, n: usize, shift: f32) -> SubjectStack {
    let m = mask.m();
    let data = (0..n * m).map(|_| rng.sample::<f32, _>(StandardNormal) + shift).collect();
    SubjectStack::new(mask, n, data).unwrap()
}

/// Rows of sorted p-values; `rho` mixes in a row-shared component so that the
/// order statistics are dependent.
pub fn random_null(rng: &mut ChaCha8Rng, b: usize, m: usize, rho: f64) -> NullPValueMatrix {
    let rows = (0..b)
        .map(|_| {
            let shared: f64 = rng.random();
            let mut row: Vec<f64> = (0..m)
                .map(|_| {
                    let u: f64 = rng.random();
                    (rho * shared + (1.0 - rho) * u).clamp(1e-300, 1.0)
                })
                .collect();
            row.sort_by(f64::total_cmp);
            row
        })
        .collect();
    NullPValueMatrix::from_rows(m, m, 0, rows).unwrap()
}

/// Random p-values with a share of small ones.
pub fn random_p(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m)
        .map(|_| {
            let u: f64 = rng.random();
            if rng.random_bool(0.3) {
                u * 1e-3
            } else {
                u
            }
        })
        .collect()
}

/// `h = max{i : p_(m-i+j) > j alpha / i for all j}` by the literal double loop.
pub fn hommel_double_loop(p: &[f64], alpha: f64) -> usize {
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    for i in (1..=m).rev() {
        if (1..=i).all(|j| s[m - i + j - 1] > alpha * (j as f64 / i as f64)) {
            return i;
        }
    }
    0
}

/// Largest subset not rejected by its local Simes test, by enumeration.
pub fn hommel_closed_testing(p: &[f64], alpha: f64) -> usize {
    let m = p.len();
    let mut best = 0;
    for bits in 1u32..(1 << m) {
        let mut sub: Vec<f64> = (0..m).filter(|&i| bits >> i & 1 == 1).map(|i| p[i]).collect();
        sub.sort_by(f64::total_cmp);
        let n = sub.len();
        if sub.iter().enumerate().all(|(j, &q)| q > alpha * ((j + 1) as f64 / n as f64)) {
            best = best.max(n);
        }
    }
    best
}

/// Components of `inside` by breadth-first flood fill over the neighbourhood
/// with squared offset length at most `max_sq` (1, 2, 3 for 6/18/26).
pub fn flood_fill(inside: &[bool], dims: [usize; 3], max_sq: i64) -> Vec<Vec<usize>> {
    let [nx, ny, nz] = dims;
    let mut seen = vec![false; inside.len()];
    let mut out = Vec::new();
    for start in 0..inside.len() {
        if !inside[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            let (x, y, z) = ((v % nx) as i64, ((v / nx) % ny) as i64, (v / (nx * ny)) as i64);
            for dz in -1..=1i64 {
                for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let sq = dx * dx + dy * dy + dz * dz;
                        if sq == 0 || sq > max_sq {
                            continue;
                        }
                        let (a, b, c) = (x + dx, y + dy, z + dz);
                        if a < 0 || b < 0 || c < 0 || a >= nx as i64 || b >= ny as i64 || c >= nz as i64 {
                            continue;
                        }
                        let w = a as usize + nx * (b as usize + ny * c as usize);
                        if inside[w] && !seen[w] {
                            seen[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

//! Distribution tails used by the statistics engine.
//!
//! The permutation engine converts every voxel of every sign-flipped map, so the
//! Student t tail for integer degrees of freedom is evaluated with the finite
//! trigonometric series instead of the incomplete beta continued fraction. The
//! series loses relative precision deep in the tail (it subtracts two nearly
//! equal terms), so below `SERIES_FLOOR` the beta form takes over.

use std::f64::consts::{FRAC_1_PI, SQRT_2};

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};

const SERIES_FLOOR: f64 = 1e-3;

/// `P(T > t)` for `T ~ t(dof)`, `t >= 0`.
pub fn student_t_upper_tail(t: f64, dof: u32) -> f64 {
    debug_assert!(t >= 0.0 && dof >= 1);
    if t == 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let nu = f64::from(dof);
    let tail = series_tail(t, dof);
    if tail >= SERIES_FLOOR {
        tail
    } else {
        0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + t * t))
    }
}

fn series_tail(t: f64, dof: u32) -> f64 {
    let nu = f64::from(dof);
    let r = (nu + t * t).sqrt();
    let sin = t / r;
    let cos = nu.sqrt() / r;
    let cos2 = cos * cos;
    if dof % 2 == 1 {
        // 1 - A = (2/pi) [ (pi/2 - theta) - sin cos (1 + 2/3 cos^2 + 2*4/(3*5) cos^4 + ...) ]
        let mut term = 1.0;
        let mut sum = if dof > 1 { 1.0 } else { 0.0 };
        let mut j = 1u32;
        while 2 * j + 1 < dof {
            term *= cos2 * f64::from(2 * j) / f64::from(2 * j + 1);
            sum += term;
            j += 1;
        }
        let complement = (nu.sqrt() / t).atan();
        FRAC_1_PI * (complement - sin * cos * sum)
    } else {
        // A = sin (1 + 1/2 cos^2 + 1*3/(2*4) cos^4 + ...)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1u32;
        while 2 * j < dof {
            term *= cos2 * f64::from(2 * j - 1) / f64::from(2 * j);
            sum += term;
            j += 1;
        }
        0.5 * (1.0 - sin * sum)
    }
}

/// `P(Z > z)` for a standard normal.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// `z` such that `P(Z > z) = q`, accurate for small `q`.
pub fn normal_upper_quantile(q: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * q)
}

/// Probit of the t CDF, computed from whichever tail keeps precision.
pub fn t_to_z(t: f64, dof: u32) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let tail = student_t_upper_tail(t.abs(), dof);
    let z = normal_upper_quantile(tail);
    if t > 0.0 {
        z
    } else {
        -z
    }
}

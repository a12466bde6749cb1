//! Normal distribution helpers and the Faddeeva function.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use crate::linalg::{C64, I};

/// Standard normal cumulative distribution function, accurate in relative terms in the left tail.
pub fn norm_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.5 * (-0.5 * x * x).exp() * erfcx(-x / SQRT_2)
    } else {
        1.0 - norm_cdf(-x)
    }
}

/// Scaled complementary error function `e^{y²} erfc(y)` for `y ≥ 0`.
pub fn erfcx(y: f64) -> f64 {
    faddeeva_upper(C64::new(0.0, y)).re
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

const WEIDEMAN_N: usize = 40;

fn weideman_coeffs() -> &'static (f64, Vec<f64>) {
    static CELL: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let n = WEIDEMAN_N;
        let m = 2 * n;
        let l = (n as f64 / SQRT_2).sqrt();
        // f sampled on the tan grid, then a real DFT gives the polynomial coefficients
        let samples: Vec<f64> = (0..2 * m)
            .map(|idx| {
                let k = idx as i64 - m as i64;
                if k == -(m as i64) {
                    0.0
                } else {
                    let theta = k as f64 * PI / m as f64;
                    let t = l * (theta / 2.0).tan();
                    (-t * t).exp() * (l * l + t * t)
                }
            })
            .collect();
        // a_j = (1/2M) Σ_k f_k e^{-iπ j k / M} over the shifted grid
        let mut a = Vec::with_capacity(n);
        for j in 1..=n {
            let mut s = 0.0;
            for (idx, fk) in samples.iter().enumerate() {
                let k = idx as f64 - m as f64;
                s += fk * (PI * j as f64 * k / m as f64).cos();
            }
            a.push(s / (2 * m) as f64);
        }
        a.reverse();
        (l, a)
    })
}

/// Faddeeva function `w(z) = e^{-z²} erfc(-iz)` for `Im z ≥ 0` (Weideman's rational expansion).
pub fn faddeeva_upper(z: C64) -> C64 {
    let (l, a) = weideman_coeffs();
    let l = C64::new(*l, 0.0);
    let den = l - I * z;
    let zz = (l + I * z) / den;
    let mut p = C64::new(0.0, 0.0);
    for &ak in a.iter() {
        p = p * zz + ak;
    }
    2.0 * p / (den * den) + (1.0 / PI.sqrt()) / den
}

/// `Φ(z) = e^{z²/2} N(z)`, the scaled normal cdf, for `Re z ≤ 0`.
///
/// For `Re z > 0` the identity `Φ(z) = e^{z²/2} − Φ(−z)` is used.
pub fn scaled_norm_cdf(z: C64) -> C64 {
    if z.re <= 0.0 {
        0.5 * faddeeva_upper(-I * z / SQRT_2)
    } else {
        (0.5 * z * z).exp() - scaled_norm_cdf(-z)
    }
}

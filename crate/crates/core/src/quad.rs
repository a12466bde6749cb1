//! Globally adaptive Gauss-Kronrod (7/15) quadrature for vector-valued complex integrands.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::linalg::C64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<C64>,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<C64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> Vec<C64>>(f: &mut F, a: f64, b: f64) -> Panel {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(mid);
    let dim = fc.len();
    let mut k: Vec<C64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut g: Vec<C64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        for d in 0..dim {
            let s = f1[d] + f2[d];
            k[d] += s * WGK[j];
            if j % 2 == 1 {
                g[d] += s * WG[j / 2];
            }
        }
    }
    let mut error: f64 = 0.0;
    for d in 0..dim {
        k[d] *= half;
        g[d] *= half;
        error = error.max((k[d] - g[d]).norm());
    }
    Panel { a, b, value: k, error }
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)` (max-norm over components).
pub fn integrate_vec<F: FnMut(f64) -> Vec<C64>>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let first = kronrod(&mut f, a, b);
    let dim = first.value.len();
    let mut total = first.value.clone();
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut evals = 15;
    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if err <= abs_tol.max(rel_tol * scale) {
            break;
        }
        if heap.len() >= max_panels {
            return Err(Error::Tolerance { what: "adaptive quadrature".into(), estimate: err, tol: abs_tol.max(rel_tol * scale) });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Tolerance { what: "adaptive quadrature (interval underflow)".into(), estimate: err, tol: abs_tol });
        }
        let left = kronrod(&mut f, worst.a, mid);
        let right = kronrod(&mut f, mid, worst.b);
        evals += 30;
        for d in 0..dim {
            total[d] += left.value[d] + right.value[d] - worst.value[d];
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // re-sum to keep round-off from accumulating in the running totals
            err = heap.iter().map(|p| p.error).sum();
            total = vec![C64::new(0.0, 0.0); dim];
            for p in heap.iter() {
                for d in 0..dim {
                    total[d] += p.value[d];
                }
            }
        }
    }
    let mut value = vec![C64::new(0.0, 0.0); dim];
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    for p in panels {
        for d in 0..dim {
            value[d] += p.value[d];
        }
    }
    Ok(QuadResult { value, error: err, evaluations: evals })
}

/// Integrates over `[a, ∞)` through the map `x = a + t/(1−t)`.
pub fn integrate_vec_to_inf<F: FnMut(f64) -> Vec<C64>>(
    mut f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    integrate_vec(
        |t| {
            let om = 1.0 - t;
            let jac = 1.0 / (om * om);
            let mut v = f(a + t / om);
            for z in v.iter_mut() {
                *z *= jac;
            }
            v
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
        max_panels,
    )
}

/// Scalar real convenience wrapper.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let r = integrate_vec(|x| vec![C64::new(f(x), 0.0)], a, b, abs_tol, rel_tol, 20_000)?;
    Ok((r.value[0].re, r.error))
}

pub fn integrate_to_inf<F: FnMut(f64) -> f64>(mut f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let r = integrate_vec_to_inf(|x| vec![C64::new(f(x), 0.0)], a, abs_tol, rel_tol, 20_000)?;
    Ok((r.value[0].re, r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 1.0 / 6.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_half_line() {
        let (v, _) = integrate_to_inf(|x| (-x * x).exp(), 0.0, 1e-13, 1e-13).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let (v, _) = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-11, 1e-11).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }
}

//! Numerical inversion of Laplace transforms by Euler summation (Abate-Whitt).

use crate::error::{domain, Error, Result};
use crate::linalg::{c, C64};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerParams {
    /// Discretisation parameter; the aliasing error is about `e^{−A}`.
    pub a: f64,
    /// Terms summed before averaging.
    pub n: usize,
    /// Binomial averaging order.
    pub m: usize,
}

impl Default for EulerParams {
    fn default() -> Self {
        EulerParams { a: 25.0, n: 15, m: 11 }
    }
}

impl EulerParams {
    pub fn from_settings(cfg: &NumericalSettings) -> Self {
        EulerParams { a: cfg.laplace_a, n: cfg.laplace_n, m: cfg.laplace_m }
    }

    /// Abscissae `(A + 2kπi)/(2t)` for `k = 0..=n+m`.
    pub fn nodes(&self, t: f64) -> Vec<C64> {
        (0..=self.n + self.m)
            .map(|k| C64::new(self.a, 2.0 * std::f64::consts::PI * k as f64) / (2.0 * t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub value: Vec<f64>,
    /// Largest change between the order-`m` and order-`m−1` Euler averages.
    pub error: f64,
}

fn binomials(m: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for _ in 0..m {
        let mut next = vec![1.0; row.len() + 1];
        for j in 1..row.len() {
            next[j] = row[j - 1] + row[j];
        }
        row = next;
    }
    let scale = 2f64.powi(m as i32);
    row.into_iter().map(|b| b / scale).collect()
}

fn euler_average(partial: &[f64], n: usize, m: usize) -> f64 {
    binomials(m).iter().enumerate().map(|(j, w)| w * partial[n + j]).sum()
}

/// Invert a vector-valued transform at time `t`.
///
/// `shift` must be at least the abscissa of convergence; the transform is sampled on
/// `shift + (A + 2kπi)/(2t)` and the result multiplied by `e^{shift·t}`.
pub fn laplace_invert_vec<F>(mut f: F, t: f64, shift: f64, p: &EulerParams) -> Result<Inversion>
where
    F: FnMut(C64) -> Result<Vec<C64>>,
{
    check(t, p)?;
    let shift = shift.max(0.0);
    let values = p.nodes(t).into_iter().map(|s| f(s + c(shift))).collect::<Result<Vec<_>>>()?;
    invert_from_nodes(&values, t, shift, p)
}

/// Transform abscissae `shift + (A + 2kπi)/(2t)` at which [`invert_from_nodes`] expects values.
pub fn shifted_nodes(t: f64, shift: f64, p: &EulerParams) -> Result<Vec<C64>> {
    check(t, p)?;
    Ok(p.nodes(t).into_iter().map(|s| s + c(shift.max(0.0))).collect())
}

fn check(t: f64, p: &EulerParams) -> Result<()> {
    if !(t > 0.0) {
        return domain(format!("Laplace inversion needs t > 0, got {t}"));
    }
    if p.n == 0 || p.m == 0 {
        return Err(Error::Invalid("Euler inversion needs n ≥ 1 and m ≥ 1".into()));
    }
    Ok(())
}

/// Euler summation of transform values already sampled at [`shifted_nodes`].
pub fn invert_from_nodes(values: &[Vec<C64>], t: f64, shift: f64, p: &EulerParams) -> Result<Inversion> {
    check(t, p)?;
    let shift = shift.max(0.0);
    if values.len() != p.n + p.m + 1 {
        return Err(Error::Dimension(format!("expected {} transform samples, got {}", p.n + p.m + 1, values.len())));
    }
    let pre = (p.a / 2.0).exp() / t;
    let dim = values[0].len();
    let mut partial: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut running = vec![0.0; dim];
    for (k, v) in values.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::Dimension("transform changed length between nodes".into()));
        }
        let w = if k == 0 { 0.5 * pre } else if k % 2 == 0 { pre } else { -pre };
        for (r, z) in running.iter_mut().zip(v) {
            if !z.re.is_finite() {
                return Err(Error::Numerical(format!("transform not finite at node {k}")));
            }
            *r += w * z.re;
        }
        partial.push(running.clone());
    }
    let growth = (shift * t).exp();
    let mut value = Vec::with_capacity(dim);
    let mut error: f64 = 0.0;
    for i in 0..dim {
        let col: Vec<f64> = partial.iter().map(|row| row[i]).collect();
        let hi = euler_average(&col, p.n, p.m);
        let lo = euler_average(&col, p.n, p.m - 1);
        value.push(growth * hi);
        error = error.max(growth * (hi - lo).abs());
    }
    Ok(Inversion { value, error })
}

/// Scalar convenience wrapper returning `(value, error estimate)`.
pub fn laplace_invert<F>(mut f: F, t: f64, shift: f64, p: &EulerParams) -> Result<(f64, f64)>
where
    F: FnMut(C64) -> Result<C64>,
{
    let r = laplace_invert_vec(|s| Ok(vec![f(s)?]), t, shift, p)?;
    Ok((r.value[0], r.error))
}

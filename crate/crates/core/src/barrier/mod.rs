//! Double-barrier options through Laplace transforms in maturity.
//!
//! With `τ` the exit time from `[l, u]` (log-price barriers), the transform in `T` of
//! `F(u,T) = E[1{τ≤T}e^{iuX_T}/B_T]` is `Σ_j H_j(q,u)·[(qI+Λ_D−K(u))⁻¹1]_j`.
//! Double-no-touch, rebate and knock-in prices follow from it.

pub mod laplace;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::european::{fourier_grid, price_european_many, OptionKind};
use crate::fluid::FluidEmbedding;
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::model::RegimeModel;
use crate::settings::NumericalSettings;
use crate::wiener_hopf::{factorize_q, OvershootData, WhFactorisation};
use laplace::{invert_from_nodes, shifted_nodes, EulerParams};

/// Log-price corridor `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub lower: f64,
    pub upper: f64,
}

impl BarrierSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return domain(format!("barriers must satisfy lower < upper, got [{lower}, {upper}]"));
        }
        Ok(BarrierSpec { lower, upper })
    }

    /// Corridor from barrier levels in price units.
    pub fn from_prices(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0) {
            return domain(format!("lower barrier must be positive, got {lower}"));
        }
        Self::new(lower.ln(), upper.ln())
    }

    fn check_start(&self, x: f64) -> Result<()> {
        if !(x >= self.lower && x <= self.upper) {
            return domain(format!("log-spot {x} lies outside the corridor [{}, {}]", self.lower, self.upper));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPrice {
    /// Price from the model's starting regime.
    pub price: f64,
    /// Price from each starting regime.
    pub per_regime: Vec<f64>,
    /// Laplace inversion error estimate.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnockPrices {
    pub strike: f64,
    pub knock_out: f64,
    pub knock_in: f64,
    pub vanilla: f64,
    pub error: f64,
}

/// `q* = max_i Re ψ_i(u) − R_D(i)`: the transform is analytic for `Re q > q*`.
pub fn q_star(m: &RegimeModel, u: C64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for (i, r) in m.regimes().iter().enumerate() {
        best = best.max(m.psi(i, u)?.re - r.rd);
    }
    Ok(best)
}

/// Everything at one Laplace node that does not depend on the Fourier argument.
pub struct ExitKernel<'a> {
    m: &'a RegimeModel,
    spec: BarrierSpec,
    q: C64,
    overshoot: &'a OvershootData,
    /// Rows of `Ψ±(x₀)` at the regime states.
    psi_plus: CMat,
    psi_minus: CMat,
    pub factorisation: WhFactorisation,
}

impl<'a> ExitKernel<'a> {
    pub fn new(
        m: &'a RegimeModel,
        emb: &FluidEmbedding,
        overshoot: &'a OvershootData,
        spec: BarrierSpec,
        q: C64,
        cfg: &NumericalSettings,
    ) -> Result<Self> {
        spec.check_start(m.x0())?;
        let f = factorize_q(emb, q, cfg)?;
        let (pp, pm) = f.two_sided_matrix(spec.lower, spec.upper, m.x0())?;
        let n0 = m.n_regimes();
        let rows: Vec<usize> = (0..n0).map(|i| emb.regime_state(i)).collect();
        let psi_plus = CMat::from_fn(n0, pp.ncols(), |i, j| pp[(rows[i], j)]);
        let psi_minus = CMat::from_fn(n0, pm.ncols(), |i, j| pm[(rows[i], j)]);
        Ok(ExitKernel { m, spec, q, overshoot, psi_plus, psi_minus, factorisation: f })
    }

    /// `H[i, j] = E_{x,i}[e^{iuX_τ − ∫(R_D+q)}1{Z_τ = j}]`.
    pub fn h_matrix(&self, u: C64) -> Result<CMat> {
        let n0 = self.m.n_regimes();
        let mut h = CMat::zeros(n0, n0);
        for j in 0..n0 {
            let (kp, km) = self.overshoot.vectors(self.spec.lower, self.spec.upper, u, j)?;
            let col = &self.psi_plus * kp + &self.psi_minus * km;
            h.set_column(j, &col);
        }
        Ok(h)
    }

    /// `F̂(u, q)` for every starting regime.
    pub fn f_hat(&self, u: C64) -> Result<CVec> {
        let n0 = self.m.n_regimes();
        let mut a = -self.m.char_exponent(u)?;
        for (i, r) in self.m.regimes().iter().enumerate() {
            a[(i, i)] += self.q + r.rd;
        }
        let res = linalg::solve_vec(&a, &linalg::ones(n0))?;
        Ok(self.h_matrix(u)? * res)
    }
}

/// `F̂(u, q)` from scratch (one factorisation per call).
pub fn f_hat(m: &RegimeModel, spec: BarrierSpec, u: C64, q: C64, cfg: &NumericalSettings) -> Result<CVec> {
    let qs = q_star(m, u)?;
    if !(q.re > qs) {
        return domain(format!("Re(q) = {} must exceed q* = {qs}", q.re));
    }
    let emb = FluidEmbedding::new(m);
    let over = OvershootData::new(&emb);
    ExitKernel::new(m, &emb, &over, spec, q, cfg)?.f_hat(u)
}

fn check_error(what: &str, error: f64, cfg: &NumericalSettings) -> Result<()> {
    if !(error <= cfg.laplace_tol) {
        return Err(Error::Tolerance { what: what.into(), estimate: error, tol: cfg.laplace_tol });
    }
    Ok(())
}

/// Inverts `q ↦ g(kernel at q)` at maturity `t`, evaluating the Laplace nodes in parallel.
fn invert_with_kernels<G>(
    m: &RegimeModel,
    spec: BarrierSpec,
    t: f64,
    shift: f64,
    cfg: &NumericalSettings,
    g: G,
) -> Result<laplace::Inversion>
where
    G: Fn(&ExitKernel) -> Result<Vec<C64>> + Sync,
{
    if !(t > 0.0) {
        return domain(format!("maturity must be positive, got {t}"));
    }
    spec.check_start(m.x0())?;
    let p = EulerParams::from_settings(cfg);
    let emb = FluidEmbedding::new(m);
    let over = OvershootData::new(&emb);
    let nodes = shifted_nodes(t, shift, &p)?;
    let values = nodes
        .par_iter()
        .map(|&q| g(&ExitKernel::new(m, &emb, &over, spec, q, cfg)?))
        .collect::<Result<Vec<_>>>()?;
    invert_from_nodes(&values, t, shift, &p)
}

fn from_regimes(m: &RegimeModel, per_regime: Vec<f64>, error: f64) -> BarrierPrice {
    BarrierPrice { price: per_regime[m.z0()], per_regime, error }
}

/// Double-no-touch paying one unit of the domestic currency at `t` if the corridor is never left.
pub fn price_dnt(m: &RegimeModel, spec: BarrierSpec, t: f64, cfg: &NumericalSettings) -> Result<BarrierPrice> {
    let inv = invert_with_kernels(m, spec, t, 0.0, cfg, |k| Ok(k.f_hat(c(0.0))?.iter().cloned().collect()))?;
    check_error("double-no-touch Laplace inversion", inv.error, cfg)?;
    let zcb = m.zcb(t)?;
    let per: Vec<f64> = zcb.iter().zip(&inv.value).map(|(b, v)| (b - v).clamp(0.0, *b)).collect();
    Ok(from_regimes(m, per, inv.error))
}

/// Rebate `L` paid at the first exit from the corridor, if it happens before `t`.
pub fn price_rebate(m: &RegimeModel, spec: BarrierSpec, t: f64, rebate: f64, cfg: &NumericalSettings) -> Result<BarrierPrice> {
    if !rebate.is_finite() {
        return domain("rebate must be finite");
    }
    let inv = invert_with_kernels(m, spec, t, 0.0, cfg, |k| {
        let h = k.h_matrix(c(0.0))?;
        Ok((0..h.nrows()).map(|i| h.row(i).sum() / k.q).collect())
    })?;
    check_error("rebate Laplace inversion", inv.error, cfg)?;
    let per = inv.value.iter().map(|v| rebate * v).collect();
    Ok(from_regimes(m, per, rebate.abs() * inv.error))
}

/// Double knock-out calls or puts for a strip of strikes, with the knock-in leg and the vanilla.
pub fn price_dko_many(
    m: &RegimeModel,
    spec: BarrierSpec,
    strikes: &[f64],
    t: f64,
    kind: OptionKind,
    cfg: &NumericalSettings,
) -> Result<Vec<KnockPrices>> {
    if strikes.is_empty() {
        return Ok(Vec::new());
    }
    let vanilla = price_european_many(m, kind, strikes, t, cfg)?;
    let ks: Vec<f64> = strikes.iter().map(|k| k.ln()).collect();
    let far = ks.iter().map(|k| (k - m.x0()).abs()).fold(0.0, f64::max);
    let g = fourier_grid(m, kind, t, far, cfg)?;
    // at a fixed Laplace node the integrand only decays like |s|^{-4}
    let s2 = m.sigma_min().powi(2);
    let tail_tol = 1e2 * cfg.fourier_tol;
    let s_tail = (2.0 / (PI * s2 * 3.0 * tail_tol)).cbrt();
    let nodes = g.nodes.max((s_tail / g.step).ceil() as usize + 1);
    if 2 * nodes > cfg.fourier_max_nodes {
        return Err(Error::Tolerance {
            what: format!("knock-in Fourier inversion needs {} nodes (cap {})", 2 * nodes, cfg.fourier_max_nodes),
            estimate: f64::INFINITY,
            tol: cfg.fourier_tol,
        });
    }
    let beta = 1.0 + g.alpha;
    let shift = q_star(m, C64::new(0.0, -beta))?.max(0.0);
    let n0 = m.n_regimes();
    let z0 = m.z0();
    let s_nodes: Vec<f64> = (-(nodes as i64 - 1)..nodes as i64).map(|n| n as f64 * g.step).collect();
    let scales: Vec<f64> = ks.iter().map(|k| (-g.alpha * k).exp() * g.step / (2.0 * PI)).collect();
    let inv = invert_with_kernels(m, spec, t, shift, cfg, |kernel| {
        let mut acc = vec![c(0.0); ks.len() * n0];
        for &s in &s_nodes {
            let xi = C64::new(s, -g.alpha);
            let fh = kernel.f_hat(xi - I)? / (I * xi - xi * xi);
            for (a, k) in ks.iter().enumerate() {
                let phase = (-I * s * k).exp() * scales[a];
                for i in 0..n0 {
                    acc[a * n0 + i] += phase * fh[i];
                }
            }
        }
        Ok(acc)
    })?;
    check_error("knock-in Laplace inversion", inv.error, cfg)?;
    Ok(strikes
        .iter()
        .enumerate()
        .map(|(a, &strike)| {
            let knock_in = inv.value[a * n0 + z0];
            KnockPrices { strike, knock_out: vanilla[a] - knock_in, knock_in, vanilla: vanilla[a], error: inv.error }
        })
        .collect())
}

pub fn price_dkoc(
    m: &RegimeModel,
    spec: BarrierSpec,
    strike: f64,
    t: f64,
    kind: OptionKind,
    cfg: &NumericalSettings,
) -> Result<KnockPrices> {
    Ok(price_dko_many(m, spec, &[strike], t, kind, cfg)?.remove(0))
}

//! Law of realised variance and variance/volatility swap rates.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::barrier::laplace::{laplace_invert_vec, EulerParams};
use crate::error::{domain, Error, Result};
use crate::linalg::{self, c, to_complex, CMat, CVec, C64};
use crate::model::RegimeModel;
use crate::phase_type::PhaseType;
use crate::quad;
use crate::settings::NumericalSettings;
use crate::special::scaled_norm_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarSwapMethod {
    Quadrature,
    FiniteDifference,
    Laplace,
}

impl std::str::FromStr for VarSwapMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(VarSwapMethod::Quadrature),
            "finite-difference" | "fd" => Ok(VarSwapMethod::FiniteDifference),
            "laplace" => Ok(VarSwapMethod::Laplace),
            other => Err(Error::Invalid(format!("unknown variance swap method '{other}'"))),
        }
    }
}

impl std::fmt::Display for VarSwapMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VarSwapMethod::Quadrature => "quadrature",
            VarSwapMethod::FiniteDifference => "finite-difference",
            VarSwapMethod::Laplace => "laplace",
        })
    }
}

/// One tail `PH(β,B)` of a jump law, prepared for `E[e^{−uY²}]`.
#[derive(Debug, Clone)]
enum SquaredTail {
    /// Diagonalised: `Σ_k w_k Φ(λ_k/√(2u))`.
    Spectral { weights: Vec<C64>, eigenvalues: Vec<C64> },
    /// Defective `B`: direct quadrature of `∫e^{−uy²}f(y)dy`.
    Direct(PhaseType),
}

impl SquaredTail {
    fn new(ph: &PhaseType, cfg: &NumericalSettings) -> Result<Self> {
        let b = to_complex(ph.generator());
        let e = linalg::eig(&b)?;
        if linalg::condition_number(&e.vectors) < cfg.spectral_cond_max {
            let vinv = linalg::inverse(&e.vectors)?;
            let beta = linalg::to_complex_vec(ph.alpha());
            let exit = linalg::to_complex_vec(&ph.exit_vector());
            let left = e.vectors.transpose() * beta;
            let right = vinv * exit;
            let weights = left.iter().zip(right.iter()).map(|(l, r)| l * r).collect();
            Ok(SquaredTail::Spectral { weights, eigenvalues: e.values })
        } else {
            Ok(SquaredTail::Direct(ph.clone()))
        }
    }

    /// `E[e^{−uY²}]`.
    fn laplace(&self, u: f64, cfg: &NumericalSettings) -> Result<f64> {
        match self {
            SquaredTail::Spectral { weights, eigenvalues } => {
                let s = (2.0 * u).sqrt();
                let mut acc = c(0.0);
                for (w, l) in weights.iter().zip(eigenvalues) {
                    acc += w * scaled_norm_cdf(l / s);
                }
                Ok((PI / u).sqrt() * acc.re)
            }
            SquaredTail::Direct(ph) => {
                let (v, _) = quad::integrate_to_inf(
                    |y| (-u * y * y).exp() * ph.pdf(y.max(1e-300)).unwrap_or(0.0),
                    0.0,
                    cfg.quad_abs_tol,
                    cfg.quad_rel_tol,
                )?;
                Ok(v)
            }
        }
    }
}

/// Per-regime data for the Laplace exponent of quadratic variation.
#[derive(Debug, Clone)]
struct RegimeQv {
    sigma2: f64,
    lambda: f64,
    p: f64,
    plus: Option<SquaredTail>,
    minus: Option<SquaredTail>,
    /// `E[J^{2n}]` for n = 1..=SERIES_TERMS.
    even_moments: Vec<f64>,
    /// Smallest tail decay rate.
    decay: f64,
}

const SERIES_TERMS: usize = 8;

/// The matrix Laplace exponent `u ↦ K_Σ(u) = Q + Λ_Σ(u)` of realised variance.
#[derive(Debug, Clone)]
pub struct QvExponent {
    q: DMatrix<f64>,
    rd: Vec<f64>,
    regimes: Vec<RegimeQv>,
    cfg: NumericalSettings,
}

impl QvExponent {
    pub fn new(m: &RegimeModel, cfg: &NumericalSettings) -> Result<Self> {
        let mut regimes = Vec::with_capacity(m.n_regimes());
        for r in m.regimes() {
            let p = r.jumps.p();
            let jumps = r.lambda > 0.0;
            let plus = if jumps && p > 0.0 { Some(SquaredTail::new(r.jumps.plus(), cfg)?) } else { None };
            let minus = if jumps && p < 1.0 { Some(SquaredTail::new(r.jumps.minus(), cfg)?) } else { None };
            let mut even_moments = Vec::with_capacity(SERIES_TERMS);
            if jumps {
                for n in 1..=SERIES_TERMS as u32 {
                    let mut v = 0.0;
                    if p > 0.0 {
                        v += p * r.jumps.plus().moment(2 * n)?;
                    }
                    if p < 1.0 {
                        v += (1.0 - p) * r.jumps.minus().moment(2 * n)?;
                    }
                    even_moments.push(v);
                }
            }
            regimes.push(RegimeQv {
                sigma2: r.sigma * r.sigma,
                lambda: r.lambda,
                p,
                plus,
                minus,
                even_moments,
                decay: r.alpha_plus().min(r.alpha_minus()),
            });
        }
        Ok(QvExponent { q: m.generator().matrix().clone(), rd: m.rd_vector(), regimes, cfg: cfg.clone() })
    }

    /// `1 − E[e^{−uK_i}]`, computed without cancellation for small `u`.
    fn jump_deficit(&self, i: usize, u: f64) -> Result<f64> {
        let r = &self.regimes[i];
        if r.lambda == 0.0 {
            return Ok(0.0);
        }
        let ratio = 4.0 * u / (r.decay * r.decay);
        if ratio * (SERIES_TERMS as f64) < 1e-2 {
            let mut acc = 0.0;
            let mut coef = 1.0;
            for (n, m) in r.even_moments.iter().enumerate() {
                coef *= -u / (n + 1) as f64;
                acc -= coef * m;
            }
            return Ok(acc);
        }
        Ok(1.0 - self.jump_laplace(i, u)?)
    }

    /// `E[e^{−uK_i}]` for the squared jump size `K_i`.
    pub fn jump_laplace(&self, i: usize, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return domain(format!("realised variance has no exponential moments: u must be non-negative, got {u}"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let r = &self.regimes[i];
        let mut v = 0.0;
        if let Some(t) = &r.plus {
            v += r.p * t.laplace(u, &self.cfg)?;
        }
        if let Some(t) = &r.minus {
            v += (1.0 - r.p) * t.laplace(u, &self.cfg)?;
        }
        if r.plus.is_none() && r.minus.is_none() {
            v = 1.0;
        }
        Ok(v)
    }

    /// `ψ^Σ_i(u) = −uσ_i² + λ_i(E[e^{−uK_i}] − 1)`.
    pub fn psi(&self, i: usize, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return domain(format!("realised variance has no exponential moments: u must be non-negative, got {u}"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let r = &self.regimes[i];
        Ok(-u * r.sigma2 - r.lambda * self.jump_deficit(i, u)?)
    }

    /// `K_Σ(u)`.
    pub fn matrix(&self, u: f64) -> Result<DMatrix<f64>> {
        let mut k = self.q.clone();
        for i in 0..self.regimes.len() {
            k[(i, i)] += self.psi(i, u)?;
        }
        Ok(k)
    }

    /// `[exp(t(K_Σ(u) − Λ_D))1]` per starting regime.
    pub fn discounted_laplace(&self, u: f64, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return domain("time must be non-negative");
        }
        let mut k = to_complex(&self.matrix(u)?);
        for (i, r) in self.rd.iter().enumerate() {
            k[(i, i)] -= r;
        }
        let v = linalg::expm(&(k * c(t)))? * linalg::ones(self.rd.len());
        Ok(v.iter().map(|z| z.re).collect())
    }
}

/// Density `g_i(x)` of the squared jump size in regime `i`.
pub fn qv_jump_density(m: &RegimeModel, i: usize, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("squared jump density needs x > 0, got {x}"));
    }
    let j = &m.regime(i).jumps;
    let y = x.sqrt();
    let mut v = 0.0;
    if j.p() > 0.0 {
        v += j.p() * j.plus().pdf(y)?;
    }
    if j.p() < 1.0 {
        v += (1.0 - j.p()) * j.minus().pdf(y)?;
    }
    Ok(v / (2.0 * y))
}

pub fn qv_laplace_exponent(m: &RegimeModel, u: f64, cfg: &NumericalSettings) -> Result<DMatrix<f64>> {
    QvExponent::new(m, cfg)?.matrix(u)
}

/// `E_i[e^{−uΣ_t}/B_t^D]` per starting regime.
pub fn qv_discounted_laplace(m: &RegimeModel, u: f64, t: f64, cfg: &NumericalSettings) -> Result<Vec<f64>> {
    QvExponent::new(m, cfg)?.discounted_laplace(u, t)
}

/// `V(i) = σ_i² + λ_i E[J_i²]`.
pub fn local_variance(m: &RegimeModel) -> Vec<f64> {
    m.regimes().iter().map(|r| r.variance_rate()).collect()
}

fn discounted_generator(m: &RegimeModel) -> CMat {
    let mut a = m.generator().to_complex();
    for (i, r) in m.regimes().iter().enumerate() {
        a[(i, i)] -= r.rd;
    }
    a
}

/// Discounted variance swap rate `E[Σ_T/(T·B_T)]` from the starting regime.
pub fn var_swap_rate(m: &RegimeModel, t: f64, method: VarSwapMethod, cfg: &NumericalSettings) -> Result<f64> {
    Ok(var_swap_rates(m, t, method, cfg)?[m.z0()])
}

/// Variance swap rates for every starting regime.
pub fn var_swap_rates(m: &RegimeModel, t: f64, method: VarSwapMethod, cfg: &NumericalSettings) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return domain(format!("maturity must be positive, got {t}"));
    }
    let n = m.n_regimes();
    let a = discounted_generator(m);
    let lv = CMat::from_diagonal(&CVec::from_iterator(n, local_variance(m).into_iter().map(c)));
    match method {
        VarSwapMethod::Quadrature => {
            let one = linalg::ones(n);
            let r = quad::integrate_vec(
                |s| {
                    let left = linalg::expm(&(&a * c(s))).expect("finite generator");
                    let right = linalg::expm(&(&a * c(t - s))).expect("finite generator") * &one;
                    (left * &lv * right).iter().cloned().collect()
                },
                0.0,
                t,
                cfg.quad_abs_tol,
                cfg.quad_rel_tol,
                10_000,
            )?;
            Ok(r.value.iter().map(|z| z.re / t).collect())
        }
        VarSwapMethod::FiniteDifference => {
            let qv = QvExponent::new(m, cfg)?;
            let fd = |h: f64| -> Result<Vec<f64>> {
                let base = m.zcb(t)?;
                let shifted = qv.discounted_laplace(h, t)?;
                Ok(base.iter().zip(shifted).map(|(b, s)| (b - s) / (t * h)).collect())
            };
            let h = cfg.fd_step;
            let v1 = fd(h)?;
            let v2 = fd(0.5 * h)?;
            // first-order Richardson step: the bias is linear in h
            let rich: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| 2.0 * b - a).collect();
            for (a, b) in v1.iter().zip(&rich) {
                if (a - b).abs() > cfg.varswap_agreement * b.abs().max(1e-300) {
                    return Err(Error::Tolerance {
                        what: "finite-difference variance swap (Richardson check)".into(),
                        estimate: (a - b).abs() / b.abs(),
                        tol: cfg.varswap_agreement,
                    });
                }
            }
            Ok(v1)
        }
        VarSwapMethod::Laplace => {
            let params = EulerParams::from_settings(cfg);
            let id = CMat::identity(n, n);
            let one = linalg::ones(n);
            let v = laplace_invert_vec(
                |q| {
                    let r = linalg::inverse(&(&id * q - &a))?;
                    Ok((&r * &lv * (&r * &one)).iter().cloned().collect())
                },
                t,
                0.0,
                &params,
            )?;
            if v.error > cfg.laplace_tol {
                return Err(Error::Tolerance { what: "Laplace variance swap".into(), estimate: v.error, tol: cfg.laplace_tol });
            }
            Ok(v.value.iter().map(|x| x / t).collect())
        }
    }
}

/// Variance swap rate by all three routes, checking their agreement.
pub fn var_swap_rate_checked(m: &RegimeModel, t: f64, cfg: &NumericalSettings) -> Result<[f64; 3]> {
    let a = var_swap_rate(m, t, VarSwapMethod::Quadrature, cfg)?;
    let b = var_swap_rate(m, t, VarSwapMethod::FiniteDifference, cfg)?;
    let l = var_swap_rate(m, t, VarSwapMethod::Laplace, cfg)?;
    let worst = ((a - b).abs()).max((a - l).abs()) / a.abs();
    if worst > cfg.varswap_agreement {
        return Err(Error::Tolerance { what: "variance swap routes disagree".into(), estimate: worst, tol: cfg.varswap_agreement });
    }
    Ok([a, b, l])
}

/// Result of the volatility swap integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolSwap {
    pub rate: f64,
    /// Upper limit `U` of the numerically integrated part.
    pub cutoff: f64,
    /// Analytic contribution of `[U, ∞)`.
    pub tail: f64,
    pub quadrature_error: f64,
}

/// Discounted volatility swap rate `E[√(Σ_T/T)/B_T]` from the starting regime.
pub fn vol_swap_rate(m: &RegimeModel, t: f64, cfg: &NumericalSettings) -> Result<VolSwap> {
    if !(t > 0.0) {
        return domain(format!("maturity must be positive, got {t}"));
    }
    let s2 = m.sigma_min().powi(2);
    let log_tol = (1.0 / cfg.volswap_tol).ln();
    let cutoff = (log_tol + 3.0) / (s2 * t);
    let head = vol_swap_truncated(m, t, cutoff, cfg)?;
    let zcb = m.zcb(t)?[m.z0()];
    let tail = 2.0 * zcb / cutoff.sqrt() / (2.0 * (PI * t).sqrt());
    Ok(VolSwap { rate: head.0 + tail, cutoff, tail, quadrature_error: head.1 })
}

/// `(1/2√(πT))∫₀^U [(e^{T(Q−Λ_D)} − e^{T(K_Σ(u)−Λ_D)})1](z₀) u^{−3/2} du` and its error estimate.
pub fn vol_swap_truncated(m: &RegimeModel, t: f64, cutoff: f64, cfg: &NumericalSettings) -> Result<(f64, f64)> {
    let qv = QvExponent::new(m, cfg)?;
    let zcb = m.zcb(t)?;
    let z0 = m.z0();
    let mut failure: Option<Error> = None;
    // u = v² removes the u^{−3/2} singularity: du·u^{−3/2} = 2dv/v²
    let r = quad::integrate_vec(
        |v| {
            let u = v * v;
            if u == 0.0 {
                return vec![c(0.0)];
            }
            match qv.discounted_laplace(u, t) {
                Ok(l) => vec![c(2.0 * (zcb[z0] - l[z0]) / u)],
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![c(0.0)]
                }
            }
        },
        0.0,
        cutoff.sqrt(),
        cfg.quad_abs_tol,
        cfg.quad_rel_tol,
        10_000,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    let scale = 1.0 / (2.0 * (PI * t).sqrt());
    Ok((r.value[0].re * scale, r.error * scale))
}

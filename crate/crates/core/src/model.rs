//! The regime-switching Lévy model with double phase-type jumps.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{domain, invalid, Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::markov::Generator;
use crate::phase_type::DoublePhaseType;
use crate::settings::NumericalSettings;

/// Per-regime parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub jumps: DoublePhaseType,
    pub rd: f64,
    pub rf: f64,
}

impl Regime {
    /// Black-Scholes regime without jumps.
    pub fn diffusion(mu: f64, sigma: f64, rd: f64, rf: f64) -> Self {
        Regime {
            mu,
            sigma,
            lambda: 0.0,
            jumps: DoublePhaseType::double_exponential(0.5, 1.0, 1.0).expect("valid"),
            rd,
            rf,
        }
    }

    /// Rate of upward jumps `λp`.
    pub fn lambda_plus(&self) -> f64 {
        self.lambda * self.jumps.p()
    }

    /// Rate of downward jumps `λ(1−p)`.
    pub fn lambda_minus(&self) -> f64 {
        self.lambda * (1.0 - self.jumps.p())
    }

    /// Decay rate of upward jumps, +∞ when they never occur.
    pub fn alpha_plus(&self) -> f64 {
        if self.lambda_plus() > 0.0 {
            self.jumps.alpha_plus()
        } else {
            f64::INFINITY
        }
    }

    pub fn alpha_minus(&self) -> f64 {
        if self.lambda_minus() > 0.0 {
            self.jumps.alpha_minus()
        } else {
            f64::INFINITY
        }
    }

    /// Local variance rate `σ² + λE[J²]`.
    pub fn variance_rate(&self) -> f64 {
        self.sigma * self.sigma + self.lambda * self.jumps.second_moment()
    }
}

/// Common strip of analyticity `Im u ∈ (−α*⁺, α*⁻)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripBounds {
    pub alpha_plus_star: f64,
    pub alpha_minus_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeModel {
    q: Generator,
    regimes: Vec<Regime>,
    x0: f64,
    z0: usize,
    strip: StripBounds,
}

/// Outcome of the martingale check.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub passed: bool,
    /// Regimes where upward jumps have no exponential moment of order one.
    pub moment_failures: Vec<usize>,
    /// `max_i |ψ_i(−i) − (R_D(i) − R_F(i))|` over regimes where it is defined.
    pub drift_residual: f64,
    pub message: String,
}

impl RegimeModel {
    pub fn new(q: Generator, regimes: Vec<Regime>, x0: f64, z0: usize) -> Result<Self> {
        let n = q.dim();
        if regimes.len() != n {
            return Err(Error::Dimension(format!("generator has {n} states but {} regimes were given", regimes.len())));
        }
        if z0 >= n {
            return invalid(format!("initial regime {z0} is out of range 0..{n}"));
        }
        if !x0.is_finite() {
            return invalid("initial log-price must be finite");
        }
        for (i, r) in regimes.iter().enumerate() {
            if !(r.sigma > 0.0) || !r.sigma.is_finite() {
                return invalid(format!("regime {i}: sigma must be strictly positive"));
            }
            if !(r.lambda >= 0.0) || !r.lambda.is_finite() {
                return invalid(format!("regime {i}: lambda must be non-negative"));
            }
            if !(r.rd >= 0.0) || !r.rd.is_finite() {
                return invalid(format!("regime {i}: rd must be non-negative"));
            }
            if !(r.rf >= 0.0) || !r.rf.is_finite() {
                return invalid(format!("regime {i}: rf must be non-negative"));
            }
            if !r.mu.is_finite() {
                return invalid(format!("regime {i}: mu must be finite"));
            }
        }
        let strip = StripBounds {
            alpha_plus_star: regimes.iter().map(Regime::alpha_plus).fold(f64::INFINITY, f64::min),
            alpha_minus_star: regimes.iter().map(Regime::alpha_minus).fold(f64::INFINITY, f64::min),
        };
        Ok(RegimeModel { q, regimes, x0, z0, strip })
    }

    /// Single-regime Black-Scholes model with martingale drift.
    pub fn black_scholes(sigma: f64, rd: f64, rf: f64, x0: f64) -> Result<Self> {
        let q = Generator::new(DMatrix::zeros(1, 1))?;
        let m = Self::new(q, vec![Regime::diffusion(0.0, sigma, rd, rf)], x0, 0)?;
        m.solve_drift()
    }

    pub fn generator(&self) -> &Generator {
        &self.q
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn regime(&self, i: usize) -> &Regime {
        &self.regimes[i]
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn z0(&self) -> usize {
        self.z0
    }

    pub fn strip(&self) -> StripBounds {
        self.strip
    }

    pub fn with_start(&self, x0: f64, z0: usize) -> Result<Self> {
        Self::new(self.q.clone(), self.regimes.clone(), x0, z0)
    }

    pub fn with_regimes(&self, regimes: Vec<Regime>) -> Result<Self> {
        Self::new(self.q.clone(), regimes, self.x0, self.z0)
    }

    pub fn has_jumps(&self) -> bool {
        self.regimes.iter().any(|r| r.lambda > 0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.regimes.iter().map(|r| r.sigma).fold(f64::INFINITY, f64::min)
    }

    pub fn rd_vector(&self) -> Vec<f64> {
        self.regimes.iter().map(|r| r.rd).collect()
    }

    /// `Im u` range check for regime `i`.
    fn check_strip(&self, i: usize, u: C64) -> Result<()> {
        let r = &self.regimes[i];
        if !(u.im > -r.alpha_plus()) || !(u.im < r.alpha_minus()) {
            return domain(format!(
                "Im(u) = {} is outside the strip ({}, {}) of regime {i}",
                u.im,
                -r.alpha_plus(),
                r.alpha_minus()
            ));
        }
        Ok(())
    }

    /// Characteristic exponent `ψ_i(u)` with `E[e^{iuX_t}] = e^{tψ(u)}` in a frozen regime.
    pub fn psi(&self, i: usize, u: C64) -> Result<C64> {
        self.check_strip(i, u)?;
        self.psi_unchecked(i, u)
    }

    pub(crate) fn psi_unchecked(&self, i: usize, u: C64) -> Result<C64> {
        let r = &self.regimes[i];
        let iu = I * u;
        let mut v = iu * r.mu + 0.5 * r.sigma * r.sigma * iu * iu;
        if r.lambda > 0.0 {
            v += r.lambda * (r.jumps.mgf_unchecked(iu)? - 1.0);
        }
        Ok(v)
    }

    /// Characteristic matrix exponent `K(u) = Q + diag(ψ_i(u))`.
    pub fn char_exponent(&self, u: C64) -> Result<CMat> {
        let mut k = self.q.to_complex();
        for i in 0..self.n_regimes() {
            k[(i, i)] += self.psi(i, u)?;
        }
        Ok(k)
    }

    /// `K(u) − Λ_D`.
    pub(crate) fn discounted_exponent(&self, u: C64) -> Result<CMat> {
        let mut k = self.char_exponent(u)?;
        for (i, r) in self.regimes.iter().enumerate() {
            k[(i, i)] -= r.rd;
        }
        Ok(k)
    }

    /// `e^{iux}·exp(t(K(u) − Λ_D))`.
    pub fn discounted_cf(&self, u: C64, t: f64) -> Result<CMat> {
        if !(t >= 0.0) {
            return domain(format!("time must be non-negative, got {t}"));
        }
        let e = linalg::expm(&(self.discounted_exponent(u)? * c(t)))?;
        Ok(e * (I * u * self.x0).exp())
    }

    /// Vector over starting regimes of `E[e^{iuX_t}/B_t^D]`.
    pub fn discounted_cf_vector(&self, u: C64, t: f64) -> Result<CVec> {
        let m = self.discounted_cf(u, t)?;
        Ok(m * linalg::ones(self.n_regimes()))
    }

    /// Discounted forward `E_i[S_T/B_T^D]` per starting regime.
    pub fn discounted_forward(&self, t: f64) -> Result<Vec<f64>> {
        Ok(self.discounted_cf_vector(-I, t)?.iter().map(|z| z.re).collect())
    }

    /// `E_i[S_T B_T^F/B_T^D]` per starting regime; equals `S₀` for a martingale model.
    pub fn martingale_value(&self, t: f64) -> Result<Vec<f64>> {
        let mut k = self.discounted_exponent(-I)?;
        for (i, r) in self.regimes.iter().enumerate() {
            k[(i, i)] += r.rf;
        }
        let e = linalg::expm(&(k * c(t)))? * linalg::ones(self.n_regimes());
        Ok(e.iter().map(|z| z.re * self.x0.exp()).collect())
    }

    /// Zero-coupon bond prices `exp(t(Q − Λ_D))1` per starting regime.
    pub fn zcb(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return domain(format!("time must be non-negative, got {t}"));
        }
        let mut m = self.q.to_complex();
        for (i, r) in self.regimes.iter().enumerate() {
            m[(i, i)] -= r.rd;
        }
        let v = linalg::expm(&(m * c(t)))? * linalg::ones(self.n_regimes());
        Ok(v.iter().map(|z| z.re).collect())
    }

    pub fn check_martingale(&self) -> MartingaleReport {
        self.check_martingale_with(1e-10)
    }

    pub fn check_martingale_with(&self, tol: f64) -> MartingaleReport {
        let mut moment_failures = Vec::new();
        let mut residual: f64 = 0.0;
        for (i, r) in self.regimes.iter().enumerate() {
            if r.lambda_plus() > 0.0 && !(r.jumps.alpha_plus() > 1.0) {
                moment_failures.push(i);
                continue;
            }
            match self.psi_unchecked(i, -I) {
                Ok(v) => residual = residual.max((v - c(r.rd - r.rf)).norm()),
                Err(_) => residual = f64::INFINITY,
            }
        }
        let mut msgs = Vec::new();
        if !moment_failures.is_empty() {
            msgs.push(format!("exponential moment condition fails in regimes {moment_failures:?} (alpha+ <= 1)"));
        }
        if !(residual <= tol) {
            msgs.push(format!("drift condition psi(-i) = rd - rf violated, residual {residual:e}"));
        }
        MartingaleReport {
            passed: msgs.is_empty(),
            moment_failures,
            drift_residual: residual,
            message: if msgs.is_empty() { "ok".into() } else { msgs.join("; ") },
        }
    }

    /// Model with drifts chosen so that `ψ_i(−i) = R_D(i) − R_F(i)`.
    pub fn solve_drift(&self) -> Result<Self> {
        let mut regimes = self.regimes.clone();
        for (i, r) in regimes.iter_mut().enumerate() {
            let mut comp = 0.0;
            if r.lambda > 0.0 {
                if r.lambda_plus() > 0.0 && !(r.jumps.alpha_plus() > 1.0) {
                    return domain(format!(
                        "regime {i}: upward jumps have no exponential moment (alpha+ = {} <= 1)",
                        r.jumps.alpha_plus()
                    ));
                }
                comp = r.lambda * (r.jumps.mgf_unchecked(c(1.0))?.re - 1.0);
            }
            r.mu = r.rd - r.rf - 0.5 * r.sigma * r.sigma - comp;
        }
        self.with_regimes(regimes)
    }

    /// Joint density of `(X_t, Z_t)` from the starting regime, at each of `ys`.
    pub fn joint_density(&self, t: f64, ys: &[f64], cfg: &NumericalSettings) -> Result<Vec<DensityPoint>> {
        let inv = DensityInverter::new(self, t, ys, cfg)?;
        Ok(ys.iter().map(|&y| inv.at(y)).collect())
    }

    pub fn mean_rate_bound(&self) -> f64 {
        self.regimes
            .iter()
            .map(|r| (r.mu + r.lambda * r.jumps.mean()).abs())
            .fold(0.0, f64::max)
    }

    pub fn variance_rate_max(&self) -> f64 {
        self.regimes.iter().map(Regime::variance_rate).fold(0.0, f64::max)
    }

    /// Slowest exponential decay of the jump tails (+∞ without jumps).
    pub fn jump_decay_min(&self) -> f64 {
        self.strip.alpha_plus_star.min(self.strip.alpha_minus_star)
    }
}

/// `q_t(y, j)` for every regime `j`, their sum `q_t(y)`, and the inversion error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPoint {
    pub y: f64,
    pub per_regime: Vec<f64>,
    pub total: f64,
    pub error_bound: f64,
}

/// Fourier inversion of the joint density on a trapezoid frequency grid shared by many `y`.
pub(crate) struct DensityInverter {
    x0: f64,
    step: f64,
    rows: Vec<CVec>,
    /// `(e^{tK(ξ)}1)_{z0}`, inverted separately for the marginal density.
    sums: Vec<C64>,
    error_bound: f64,
}

impl DensityInverter {
    pub(crate) fn new(m: &RegimeModel, t: f64, ys: &[f64], cfg: &NumericalSettings) -> Result<Self> {
        if !(t > 0.0) {
            return domain(format!("density needs t > 0, got {t}"));
        }
        let tol = cfg.density_tol;
        let log_tol = (1.0 / tol).ln();
        let s2 = m.sigma_min().powi(2);
        let xi_max = (2.0 * (log_tol + 3.0) / (s2 * t)).sqrt();
        let centre = m.x0;
        let sd = (t * m.variance_rate_max()).sqrt();
        let drift = t * m.mean_rate_bound();
        let mut reach = 14.0 * sd + drift;
        let alpha = m.jump_decay_min();
        if alpha.is_finite() {
            let lam_t = m.regimes.iter().map(|r| r.lambda).fold(0.0, f64::max) * t;
            reach = reach.max(drift + (log_tol + 10.0 + 4.0 * (lam_t * log_tol).sqrt()) / alpha);
        }
        let far = ys.iter().map(|y| (y - centre).abs()).fold(0.0, f64::max);
        let period = far + reach;
        let step = 2.0 * PI / period;
        let count = (xi_max / step).ceil() as usize + 1;
        if count > cfg.fourier_max_nodes {
            return Err(Error::Tolerance {
                what: format!("density inversion needs {count} frequency nodes"),
                estimate: f64::INFINITY,
                tol,
            });
        }
        let z0 = m.z0;
        let mut rows = Vec::with_capacity(count + 1);
        for k in 0..=count {
            let xi = k as f64 * step;
            let e = linalg::expm(&(m.char_exponent(c(xi))? * c(t)))?;
            rows.push(e.row(z0).transpose());
        }
        let sums = rows.iter().map(|r| r.sum()).collect();
        let tail = (-0.5 * s2 * t * xi_max * xi_max).exp() / (PI * s2 * t * xi_max);
        Ok(DensityInverter { x0: m.x0, step, rows, sums, error_bound: tail })
    }

    pub(crate) fn at(&self, y: f64) -> DensityPoint {
        let n = self.rows[0].len();
        let mut acc = vec![c(0.0); n];
        let mut marginal = c(0.0);
        // sum from the tail inwards so small terms are not swamped
        for (k, row) in self.rows.iter().enumerate().rev() {
            let xi = k as f64 * self.step;
            let w = if k == 0 { 0.5 } else { 1.0 };
            let phase = (I * xi * (self.x0 - y)).exp() * w;
            for j in 0..n {
                acc[j] += row[j] * phase;
            }
            marginal += self.sums[k] * phase;
        }
        let per_regime: Vec<f64> = acc.iter().map(|z| z.re * self.step / PI).collect();
        let total = marginal.re * self.step / PI;
        DensityPoint { y, per_regime, total, error_bound: self.error_bound }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_exponent() {
        let m = RegimeModel::black_scholes(0.2, 0.03, 0.01, 0.0).unwrap();
        let mu = m.regime(0).mu;
        assert!((mu - (0.02 - 0.02)).abs() < 1e-15);
        let u = C64::new(1.3, -0.4);
        let expect = I * u * mu - 0.5 * 0.04 * u * u;
        assert!((m.psi(0, u).unwrap() - expect).norm() < 1e-15);
        assert!(m.psi(0, c(0.0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn zcb_constant_rate() {
        let m = RegimeModel::black_scholes(0.2, 0.05, 0.0, 0.0).unwrap();
        assert!((m.zcb(2.0).unwrap()[0] - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn martingale_for_black_scholes() {
        let m = RegimeModel::black_scholes(0.3, 0.02, 0.01, 0.1).unwrap();
        assert!(m.check_martingale().passed);
        let v = m.martingale_value(1.5).unwrap();
        assert!((v[0] - 0.1f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_sigma() {
        let q = Generator::new(DMatrix::zeros(1, 1)).unwrap();
        let e = RegimeModel::new(q, vec![Regime::diffusion(0.0, 0.0, 0.0, 0.0)], 0.0, 0).unwrap_err();
        assert!(e.to_string().contains("sigma must be strictly positive"));
    }

    #[test]
    fn moment_condition_failure_named() {
        let q = Generator::new(DMatrix::zeros(1, 1)).unwrap();
        let mut r = Regime::diffusion(0.0, 0.2, 0.0, 0.0);
        r.lambda = 1.0;
        r.jumps = DoublePhaseType::double_exponential(0.5, 0.9, 3.0).unwrap();
        let m = RegimeModel::new(q, vec![r], 0.0, 0).unwrap();
        let rep = m.check_martingale();
        assert!(!rep.passed);
        assert_eq!(rep.moment_failures, vec![0]);
        assert!(m.solve_drift().is_err());
    }

    #[test]
    fn gaussian_density() {
        let m = RegimeModel::black_scholes(0.25, 0.0, 0.0, 0.0).unwrap();
        let t = 0.7;
        let mu = m.regime(0).mu;
        let pts = m.joint_density(t, &[-0.3, 0.0, 0.2], &NumericalSettings::default()).unwrap();
        for p in pts {
            let s2 = 0.0625 * t;
            let g = (-(p.y - mu * t).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
            assert!((p.total - g).abs() < 1e-10, "{} vs {}", p.total, g);
        }
    }
}

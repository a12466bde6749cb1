//! Regime-switching approximations of stochastic-volatility models with jumps.
//!
//! A variance process is replaced by a birth-death chain on a finite grid whose local
//! mean and variance match the target's drift and diffusion, and an infinite-activity
//! jump measure is replaced by a compound Poisson law with phase-type tails.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::Generator;
use crate::model::{Regime, RegimeModel};
use crate::phase_type::{DoublePhaseType, PhaseType};
use crate::quad::{integrate, integrate_to_inf};
use crate::settings::NumericalSettings;

/// Tridiagonal generator on `grid` matching the drift `a(v)` and variance `s²(v)` of a diffusion.
///
/// Interior rows match the first two local moments exactly. The end rows reflect: their
/// single rate towards the interior matches the drift when it points inward and the variance otherwise.
pub fn build_variance_chain<A, S>(grid: &[f64], drift: A, variance: S) -> Result<Generator>
where
    A: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let n = grid.len();
    if n == 0 {
        return invalid("variance grid is empty");
    }
    for (i, &x) in grid.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return invalid(format!("variance grid level {i} must be positive, got {x}"));
        }
        if i > 0 && !(x > grid[i - 1]) {
            return invalid(format!("variance grid must be strictly increasing at level {i}"));
        }
    }
    let mut q = DMatrix::zeros(n, n);
    if n == 1 {
        return Generator::new(q);
    }
    for i in 0..n {
        let x = grid[i];
        let (a, s2) = (drift(x), variance(x));
        if !a.is_finite() || !(s2 >= 0.0) {
            return invalid(format!("drift or variance not usable at level {i} (v = {x})"));
        }
        let (down, up) = if i == 0 {
            let h = grid[1] - x;
            (0.0, if a > 0.0 { a / h } else { s2 / (h * h) })
        } else if i == n - 1 {
            let h = x - grid[i - 1];
            (if a < 0.0 { -a / h } else { s2 / (h * h) }, 0.0)
        } else {
            let hm = x - grid[i - 1];
            let hp = grid[i + 1] - x;
            let up = (s2 + a * hm) / (hp * (hp + hm));
            let down = (s2 - a * hp) / (hm * (hp + hm));
            (down, up)
        };
        if down < 0.0 || up < 0.0 {
            return Err(Error::Invalid(format!(
                "variance chain has a negative rate at level {i} (v = {x:.6e}); refine the grid there"
            )));
        }
        if i > 0 {
            q[(i, i - 1)] = down;
        }
        if i + 1 < n {
            q[(i, i + 1)] = up;
        }
        q[(i, i)] = -(down + up);
    }
    Generator::new(q)
}

/// Square-root variance process `dv = κ(θ − v)dt + ε√v dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cir {
    pub kappa: f64,
    pub theta: f64,
    pub eps: f64,
    pub v0: f64,
}

/// Placement of the variance grid. Unset bounds use the defaults described on [`Cir::grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOptions {
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    /// Lower clip for the default `v_min`.
    pub floor: f64,
    /// Stationary standard deviations above the mean covered by the default `v_max`.
    pub sds: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions { v_min: None, v_max: None, floor: 1e-4, sds: 4.0 }
    }
}

impl Cir {
    pub fn new(kappa: f64, theta: f64, eps: f64, v0: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("theta", theta), ("eps", eps), ("v0", v0)] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("CIR {name} must be positive, got {v}"));
            }
        }
        Ok(Cir { kappa, theta, eps, v0 })
    }

    pub fn drift(&self, v: f64) -> f64 {
        self.kappa * (self.theta - v)
    }

    pub fn variance(&self, v: f64) -> f64 {
        self.eps * self.eps * v
    }

    pub fn stationary_sd(&self) -> f64 {
        (self.theta * self.eps * self.eps / (2.0 * self.kappa)).sqrt()
    }

    /// Grid of `levels` points, geometric on each side of `v0`, which is a node.
    ///
    /// Default range: `v_min = θ·exp(−4ε/√(κθ))` clipped below at `floor`, and
    /// `v_max = θ + sds·sd` where `sd` is the stationary standard deviation; both are widened to contain `v0`.
    /// The endpoints do not depend on `levels`, so refinements cover the same range.
    /// Returns the grid and the index of `v0`.
    pub fn grid(&self, levels: usize, opts: &GridOptions) -> Result<(Vec<f64>, usize)> {
        if levels == 0 {
            return invalid("need at least one variance level");
        }
        if levels == 1 {
            return Ok((vec![self.v0], 0));
        }
        let lo = opts
            .v_min
            .unwrap_or_else(|| (self.theta * (-4.0 * self.eps / (self.kappa * self.theta).sqrt()).exp()).max(opts.floor))
            .min(self.v0);
        let hi = opts.v_max.unwrap_or(self.theta + opts.sds * self.stationary_sd()).max(self.v0);
        if !(lo > 0.0) || !(hi > lo) {
            return invalid(format!("variance grid bounds [{lo}, {hi}] are not an increasing positive pair"));
        }
        let steps = levels - 1;
        let (down, up) = ((self.v0 / lo).ln(), (hi / self.v0).ln());
        let mut below = (down / (down + up) * steps as f64).round() as usize;
        // keep a point on each side that has room for one
        if down > 0.0 && below == 0 {
            below = 1;
        }
        if up > 0.0 && below == steps {
            below = steps - 1;
        }
        let above = steps - below;
        let mut grid = Vec::with_capacity(levels);
        for j in (1..=below).rev() {
            grid.push(self.v0 * (-down * j as f64 / below as f64).exp());
        }
        grid.push(self.v0);
        for j in 1..=above {
            grid.push(self.v0 * (up * j as f64 / above as f64).exp());
        }
        Ok((grid, below))
    }

    /// Chain generator on `grid`.
    pub fn chain(&self, grid: &[f64]) -> Result<Generator> {
        build_variance_chain(grid, |v| self.drift(v), |v| self.variance(v))
    }
}

/// Lévy jump measure given by its density on `ℝ∖{0}`.
pub type LevyDensity = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Characteristic triplet `(c, σ², ν)`.
#[derive(Clone)]
pub struct LevyTriplet {
    pub drift: f64,
    pub sigma2: f64,
    /// `None` for a pure diffusion.
    pub density: Option<LevyDensity>,
}

impl fmt::Debug for LevyTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyTriplet")
            .field("drift", &self.drift)
            .field("sigma2", &self.sigma2)
            .field("density", &self.density.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl LevyTriplet {
    pub fn new(drift: f64, sigma2: f64, density: Option<LevyDensity>) -> Result<Self> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return invalid(format!("Gaussian variance must be non-negative, got {sigma2}"));
        }
        Ok(LevyTriplet { drift, sigma2, density })
    }

    /// Kou model: rate `λ`, up probability `p`, exponential tails with rates `η±`.
    pub fn double_exponential(drift: f64, sigma2: f64, lambda: f64, p: f64, eta_plus: f64, eta_minus: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !(0.0..=1.0).contains(&p) || !(eta_plus > 0.0) || !(eta_minus > 0.0) {
            return invalid("double-exponential measure needs λ ≥ 0, p in [0,1] and positive tail rates");
        }
        let density: LevyDensity = Arc::new(move |x: f64| {
            if x > 0.0 {
                lambda * p * eta_plus * (-eta_plus * x).exp()
            } else if x < 0.0 {
                lambda * (1.0 - p) * eta_minus * (eta_minus * x).exp()
            } else {
                0.0
            }
        });
        Self::new(drift, sigma2, if lambda > 0.0 { Some(density) } else { None })
    }

    /// CGMY measure `C e^{−Mx}/x^{1+Y}` for `x > 0` and `C e^{−G|x|}/|x|^{1+Y}` for `x < 0`; `Y = 0` is variance gamma.
    pub fn cgmy(drift: f64, sigma2: f64, c: f64, g: f64, m: f64, y: f64) -> Result<Self> {
        if !(c > 0.0) || !(g > 0.0) || !(m > 0.0) || !(y < 2.0) {
            return invalid("CGMY measure needs C, G, M > 0 and Y < 2");
        }
        let density: LevyDensity = Arc::new(move |x: f64| {
            if x > 0.0 {
                c * (-m * x).exp() / x.powf(1.0 + y)
            } else if x < 0.0 {
                c * (g * x).exp() / (-x).powf(1.0 + y)
            } else {
                0.0
            }
        });
        Self::new(drift, sigma2, Some(density))
    }

    /// `ν([x, ∞))` for `x > 0`, or `ν((−∞, x])` for `x < 0`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        let Some(nu) = &self.density else { return Ok(0.0) };
        if x == 0.0 {
            return Err(Error::Domain("tail of the jump measure is not defined at 0".into()));
        }
        let sign = x.signum();
        let (v, _) = integrate_to_inf(|y| nu(sign * y), x.abs(), 1e-14, 1e-11)?;
        Ok(v)
    }
}

/// Compound Poisson approximation with phase-type tails.
#[derive(Debug, Clone, PartialEq)]
pub struct DphApproximation {
    /// Mass of jumps of size at least `1/n`.
    pub lambda: f64,
    pub jumps: DoublePhaseType,
    /// Gaussian variance including the folded small jumps.
    pub sigma2: f64,
    /// Largest error of the fitted tail functions on the fitting grid.
    pub fit_error: f64,
}

/// Truncate `ν` at `1/n`, fold small jumps into the Gaussian part and fit each conditional tail
/// (measured from `1/n`) by a moment-matched mixture of up to four exponentials.
pub fn levy_to_dph(l: &LevyTriplet, n: usize, cfg: &NumericalSettings) -> Result<DphApproximation> {
    if n == 0 {
        return invalid("refinement level must be at least 1");
    }
    let Some(nu) = &l.density else {
        return Ok(DphApproximation {
            lambda: 0.0,
            jumps: DoublePhaseType::double_exponential(0.5, 1.0, 1.0)?,
            sigma2: l.sigma2,
            fit_error: 0.0,
        });
    };
    let eps = 1.0 / n as f64;
    let mut small = 0.0;
    for sign in [1.0, -1.0] {
        let (v, _) = integrate(|x| x * x * nu(sign * x), 0.0, eps, 1e-15, 1e-10)?;
        small += v;
    }
    let up = fit_tail(|x| nu(x), eps, cfg)?;
    let down = fit_tail(|x| nu(-x), eps, cfg)?;
    let lambda = up.mass + down.mass;
    if !(lambda > 0.0) {
        return Ok(DphApproximation {
            lambda: 0.0,
            jumps: DoublePhaseType::double_exponential(0.5, 1.0, 1.0)?,
            sigma2: l.sigma2 + small,
            fit_error: 0.0,
        });
    }
    let p = up.mass / lambda;
    let jumps = DoublePhaseType::new(p, up.law.unwrap_or_else(PhaseType::empty), down.law.unwrap_or_else(PhaseType::empty))?;
    Ok(DphApproximation { lambda, jumps, sigma2: l.sigma2 + small, fit_error: up.error.max(down.error) })
}

struct TailFit {
    mass: f64,
    law: Option<PhaseType>,
    error: f64,
}

const FIT_POINTS: usize = 80;

fn fit_tail<F: Fn(f64) -> f64>(nu: F, eps: f64, cfg: &NumericalSettings) -> Result<TailFit> {
    let (mass, _) = integrate_to_inf(&nu, eps, 1e-15, 1e-11)?;
    if !(mass > 1e-300) {
        return Ok(TailFit { mass: 0.0, law: None, error: 0.0 });
    }
    let (first, _) = integrate_to_inf(|x| (x - eps) * nu(x), eps, 1e-15, 1e-11)?;
    let mean = first / mass;
    // fitting window: out to where the conditional tail drops below 1e-8
    let survival = |y: f64| -> Result<f64> { Ok(integrate_to_inf(&nu, eps + y, 1e-16, 1e-11)?.0 / mass) };
    let mut y_max = mean;
    while survival(y_max)? > 1e-8 && y_max < 1e4 * mean {
        y_max *= 2.0;
    }
    let ys: Vec<f64> = (0..FIT_POINTS).map(|i| y_max * i as f64 / (FIT_POINTS - 1) as f64).collect();
    // cumulative segment integrals are cheaper than one tail integral per point
    let mut target = vec![0.0; FIT_POINTS];
    let mut acc = survival(y_max)? * mass;
    target[FIT_POINTS - 1] = acc;
    for i in (0..FIT_POINTS - 1).rev() {
        acc += integrate(&nu, eps + ys[i], eps + ys[i + 1], 1e-16, 1e-12)?.0;
        target[i] = acc;
    }
    let target: Vec<f64> = target.iter().map(|t| t / mass).collect();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for k in 1..=4usize {
        let spreads: &[f64] = if k == 1 { &[1.0] } else { &[1.25, 1.5, 2.0, 3.0, 5.0, 8.0, 13.0] };
        for &rho in spreads {
            for &centre in &[0.5, 0.75, 1.0, 1.5, 2.0] {
                let rates: Vec<f64> =
                    (0..k).map(|j| centre / mean * rho.powf(j as f64 - 0.5 * (k - 1) as f64)).collect();
                let Some(w) = constrained_weights(&rates, &ys, &target, mean) else { continue };
                let err = ys
                    .iter()
                    .zip(&target)
                    .map(|(y, t)| (w.iter().zip(&rates).map(|(wj, rj)| wj * (-rj * y).exp()).sum::<f64>() - t).abs())
                    .fold(0.0, f64::max);
                if best.as_ref().is_none_or(|b| err < b.0) {
                    best = Some((err, rates, w));
                }
            }
        }
        if best.as_ref().is_some_and(|b| b.0 < 0.1 * cfg.dph_fit_tol) {
            break;
        }
    }
    let Some((error, rates, weights)) = best else {
        return Err(Error::Numerical("no exponential mixture with non-negative weights fits the jump tail".into()));
    };
    if error > cfg.dph_fit_tol {
        return Err(Error::Tolerance { what: "phase-type fit of jump tail".into(), estimate: error, tol: cfg.dph_fit_tol });
    }
    let law = PhaseType::hyperexponential(&weights, &rates)?;
    Ok(TailFit { mass, law: Some(law), error })
}

/// Least squares on the tail function with weights summing to one and matching the mean.
fn constrained_weights(rates: &[f64], ys: &[f64], target: &[f64], mean: f64) -> Option<Vec<f64>> {
    let k = rates.len();
    let n_con = if k == 1 { 1 } else { 2 };
    let mut a = DMatrix::zeros(ys.len(), k);
    for (i, y) in ys.iter().enumerate() {
        for (j, r) in rates.iter().enumerate() {
            a[(i, j)] = (-r * y).exp();
        }
    }
    let b = DVector::from_column_slice(target);
    let mut kkt = DMatrix::zeros(k + n_con, k + n_con);
    let mut rhs = DVector::zeros(k + n_con);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(a.transpose() * &a * 2.0));
    rhs.rows_mut(0, k).copy_from(&(a.transpose() * &b * 2.0));
    for j in 0..k {
        kkt[(k, j)] = 1.0;
        kkt[(j, k)] = 1.0;
        if n_con == 2 {
            kkt[(k + 1, j)] = 1.0 / rates[j];
            kkt[(j, k + 1)] = 1.0 / rates[j];
        }
    }
    rhs[k] = 1.0;
    if n_con == 2 {
        rhs[k + 1] = mean;
    }
    let sol = kkt.lu().solve(&rhs)?;
    let w: Vec<f64> = sol.rows(0, k).iter().copied().collect();
    if w.iter().any(|x| !(*x >= 0.0)) || w.iter().all(|x| *x == 0.0) {
        return None;
    }
    let keep: f64 = w.iter().sum();
    Some(w.into_iter().map(|x| x / keep).collect())
}

/// How the variance level enters the composed model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Stochastic integral: volatility and jump sizes scale with `√v`.
    Int,
    /// Time change: variance and jump intensity scale with `v`.
    Tc,
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "int" => Ok(Flavor::Int),
            "tc" => Ok(Flavor::Tc),
            _ => invalid(format!("unknown flavor '{s}', expected int or tc")),
        }
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Int => "int",
            Flavor::Tc => "tc",
        })
    }
}

/// Lévy driver with phase-type jumps, before modulation.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDiffusion {
    pub sigma: f64,
    pub lambda: f64,
    pub jumps: DoublePhaseType,
}

impl From<DphApproximation> for JumpDiffusion {
    fn from(a: DphApproximation) -> Self {
        JumpDiffusion { sigma: a.sigma2.sqrt(), lambda: a.lambda, jumps: a.jumps }
    }
}

/// Regime-switching model driven by `chain` on variance levels `grid`, with martingale drifts.
pub fn compose_model(
    chain: &Generator,
    grid: &[f64],
    z0: usize,
    base: &JumpDiffusion,
    flavor: Flavor,
    rd: f64,
    rf: f64,
) -> Result<RegimeModel> {
    if chain.dim() != grid.len() {
        return Err(Error::Dimension(format!("chain has {} states but grid has {} levels", chain.dim(), grid.len())));
    }
    let regimes = grid
        .iter()
        .map(|&v| {
            let root = v.sqrt();
            let (lambda, jumps) = match flavor {
                Flavor::Int => (base.lambda, base.jumps.scale(root)?),
                Flavor::Tc => (base.lambda * v, base.jumps.clone()),
            };
            Ok(Regime { mu: 0.0, sigma: base.sigma * root, lambda, jumps, rd, rf })
        })
        .collect::<Result<Vec<_>>>()?;
    RegimeModel::new(chain.clone(), regimes, 0.0, z0)?.solve_drift()
}

/// Stochastic-volatility target: CIR variance modulating a jump diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct SvTarget {
    pub variance: Cir,
    pub base: JumpDiffusion,
    pub flavor: Flavor,
    pub rd: f64,
    pub rf: f64,
    pub grid: GridOptions,
}

impl SvTarget {
    /// Approximating model with `levels` variance states.
    pub fn model(&self, levels: usize) -> Result<RegimeModel> {
        let (grid, z0) = self.variance.grid(levels, &self.grid)?;
        let chain = self.variance.chain(&grid)?;
        compose_model(&chain, &grid, z0, &self.base, self.flavor, self.rd, self.rf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub levels: usize,
    pub prices: Vec<f64>,
    /// Change against the previous row, `None` on the first.
    pub diffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// True when for every price column `|diff|` strictly decreases down the table.
    pub fn differences_shrink(&self) -> bool {
        let diffs: Vec<&Vec<f64>> = self.rows.iter().filter_map(|r| r.diffs.as_ref()).collect();
        diffs.windows(2).all(|w| w[0].iter().zip(w[1]).all(|(a, b)| b.abs() < a.abs()))
    }
}

/// Prices under approximations with each number of levels in `levels`, computed in parallel.
pub fn convergence_report<B, P>(build: B, levels: &[usize], price: P) -> Result<ConvergenceReport>
where
    B: Fn(usize) -> Result<RegimeModel> + Sync,
    P: Fn(&RegimeModel) -> Result<Vec<f64>> + Sync,
{
    if levels.len() < 3 {
        return invalid("a convergence report needs at least three grid sizes");
    }
    let prices = levels.par_iter().map(|&n| build(n).and_then(|m| price(&m))).collect::<Result<Vec<_>>>()?;
    let rows = levels
        .iter()
        .enumerate()
        .map(|(i, &n)| ConvergenceRow {
            levels: n,
            prices: prices[i].clone(),
            diffs: (i > 0).then(|| prices[i].iter().zip(&prices[i - 1]).map(|(a, b)| a - b).collect()),
        })
        .collect();
    Ok(ConvergenceReport { rows })
}

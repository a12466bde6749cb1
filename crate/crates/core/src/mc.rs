//! Monte-Carlo simulation of `(X, Z)` with barrier monitoring and realised variance.
//!
//! Regime holding times, jump times and jump sizes are drawn exactly, and between events the
//! log-price moves by exact Gaussian increments. Barrier crossings inside a diffusion segment are
//! detected with the Brownian-bridge crossing probability of each barrier, and the crossing time
//! is drawn from the bridge's conditional passage law.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, invalid, Result};
use crate::european::OptionKind;
use crate::model::RegimeModel;
use crate::settings::NumericalSettings;
use crate::special::{erfcx, norm_cdf};

/// What to simulate and monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub horizon: f64,
    /// Log-price barriers; use infinities for one-sided or no monitoring.
    pub lower: f64,
    pub upper: f64,
    /// Time at which `X` is recorded for forward-start payoffs.
    pub observe: Option<f64>,
    /// Continuous monitoring with the bridge correction; `false` checks only segment end points.
    pub bridge: bool,
    /// Diffusion segments are cut to at most this length.
    pub max_step: Option<f64>,
    /// Record per-regime occupation times and jump counts.
    pub occupation: bool,
}

impl SimSpec {
    pub fn new(horizon: f64) -> Self {
        SimSpec {
            horizon,
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            observe: None,
            bridge: true,
            max_step: None,
            occupation: false,
        }
    }

    pub fn with_barriers(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn monitored(&self) -> bool {
        self.lower.is_finite() || self.upper.is_finite()
    }
}

/// Simulated paths, one entry per path in path order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathBatch {
    pub seed: u64,
    pub horizon: f64,
    pub n_regimes: usize,
    pub terminal: Vec<f64>,
    pub regimes: Vec<usize>,
    /// `∫₀ᵀ R_D(Z_s) ds`.
    pub discount: Vec<f64>,
    /// First exit time from the corridor, NaN when the path stayed inside.
    pub hit_time: Vec<f64>,
    /// Whether the exit was through the upper barrier.
    pub hit_upper: Vec<bool>,
    /// `∫₀^τ R_D(Z_s) ds` at the exit time, NaN without exit.
    pub hit_discount: Vec<f64>,
    /// Realised variance `Σ_T = ∫σ² ds + ΣJ²`.
    pub qv: Vec<f64>,
    /// `X` at the observation time, when requested.
    pub observed: Option<Vec<f64>>,
    /// `∫₀^{T₁} R_D(Z_s) ds` at the observation time, when requested.
    pub observed_discount: Option<Vec<f64>>,
    /// Row-major `path × regime` occupation times, when requested.
    pub occupation: Option<Vec<f64>>,
    /// Row-major `path × regime` jump counts, when requested.
    pub jumps: Option<Vec<u32>>,
}

impl PathBatch {
    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    pub fn hit(&self, i: usize) -> bool {
        !self.hit_time[i].is_nan()
    }
}

struct PathRecord {
    x: f64,
    z: usize,
    disc: f64,
    hit_time: f64,
    hit_upper: bool,
    hit_disc: f64,
    qv: f64,
    observed: f64,
    observed_disc: f64,
    occupation: Vec<f64>,
    jumps: Vec<u32>,
}

/// Simulates `n_paths` paths from the model's starting state. Path `i` uses the ChaCha8 stream
/// `i` under `seed`, so results do not depend on scheduling.
pub fn simulate(m: &RegimeModel, spec: &SimSpec, n_paths: usize, seed: u64, cfg: &NumericalSettings) -> Result<PathBatch> {
    if n_paths == 0 {
        return invalid("need at least one path");
    }
    if !(spec.horizon > 0.0) || !spec.horizon.is_finite() {
        return domain(format!("horizon must be positive and finite, got {}", spec.horizon));
    }
    if !(spec.lower < spec.upper) {
        return domain("lower barrier must be below upper barrier");
    }
    if spec.monitored() && !(m.x0() > spec.lower && m.x0() < spec.upper) {
        return domain(format!("start {} is not strictly inside the barriers", m.x0()));
    }
    if let Some(t1) = spec.observe {
        if !(0.0..=spec.horizon).contains(&t1) {
            return domain(format!("observation time {t1} must lie in [0, horizon]"));
        }
    }
    if let Some(h) = spec.max_step {
        if !(h > 0.0) {
            return domain("maximum step must be positive");
        }
    }
    let sim = Simulator::new(m, spec, cfg);
    let records: Vec<PathRecord> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            sim.path(&mut rng)
        })
        .collect();
    let n0 = m.n_regimes();
    let mut b = PathBatch {
        seed,
        horizon: spec.horizon,
        n_regimes: n0,
        terminal: Vec::with_capacity(n_paths),
        regimes: Vec::with_capacity(n_paths),
        discount: Vec::with_capacity(n_paths),
        hit_time: Vec::with_capacity(n_paths),
        hit_upper: Vec::with_capacity(n_paths),
        hit_discount: Vec::with_capacity(n_paths),
        qv: Vec::with_capacity(n_paths),
        observed: spec.observe.map(|_| Vec::with_capacity(n_paths)),
        observed_discount: spec.observe.map(|_| Vec::with_capacity(n_paths)),
        occupation: spec.occupation.then(|| Vec::with_capacity(n_paths * n0)),
        jumps: spec.occupation.then(|| Vec::with_capacity(n_paths * n0)),
    };
    for r in records {
        b.terminal.push(r.x);
        b.regimes.push(r.z);
        b.discount.push(r.disc);
        b.hit_time.push(r.hit_time);
        b.hit_upper.push(r.hit_upper);
        b.hit_discount.push(r.hit_disc);
        b.qv.push(r.qv);
        if let Some(o) = b.observed.as_mut() {
            o.push(r.observed);
        }
        if let Some(o) = b.observed_discount.as_mut() {
            o.push(r.observed_disc);
        }
        if let Some(o) = b.occupation.as_mut() {
            o.extend(r.occupation);
        }
        if let Some(j) = b.jumps.as_mut() {
            j.extend(r.jumps);
        }
    }
    Ok(b)
}

struct Simulator<'a> {
    m: &'a RegimeModel,
    spec: &'a SimSpec,
    /// Largest `σ²dt` before a monitored segment is split.
    var_cap: f64,
}

impl<'a> Simulator<'a> {
    fn new(m: &'a RegimeModel, spec: &'a SimSpec, cfg: &NumericalSettings) -> Self {
        let width = spec.upper - spec.lower;
        let var_cap = if width.is_finite() { width * width / cfg.mc_subdivision_ratio } else { f64::INFINITY };
        Simulator { m, spec, var_cap }
    }

    fn path(&self, rng: &mut ChaCha8Rng) -> PathRecord {
        let m = self.m;
        let q = m.generator().matrix();
        let n0 = m.n_regimes();
        let horizon = self.spec.horizon;
        let mut r = PathRecord {
            x: m.x0(),
            z: m.z0(),
            disc: 0.0,
            hit_time: f64::NAN,
            hit_upper: false,
            hit_disc: f64::NAN,
            qv: 0.0,
            observed: f64::NAN,
            observed_disc: f64::NAN,
            occupation: if self.spec.occupation { vec![0.0; n0] } else { Vec::new() },
            jumps: if self.spec.occupation { vec![0; n0] } else { Vec::new() },
        };
        let mut t = 0.0;
        let mut pending_observe = self.spec.observe;
        if pending_observe == Some(0.0) {
            r.observed = r.x;
            r.observed_disc = 0.0;
            pending_observe = None;
        }
        while t < horizon {
            let reg = m.regime(r.z);
            let switch_rate = -q[(r.z, r.z)];
            let total = switch_rate + reg.lambda;
            let wait = if total > 0.0 {
                let e: f64 = Exp1.sample(rng);
                e / total
            } else {
                f64::INFINITY
            };
            let stop = pending_observe.unwrap_or(horizon).min(horizon);
            let event = t + wait < stop;
            let end = if event { t + wait } else { stop };
            self.diffuse(&mut r, t, end - t, rng);
            t = end;
            if !event {
                if pending_observe.is_some_and(|t1| t >= t1) {
                    r.observed = r.x;
                    r.observed_disc = r.disc;
                    pending_observe = None;
                }
                continue;
            }
            let u: f64 = rng.random::<f64>() * total;
            if u < reg.lambda {
                let j = reg.jumps.sample(rng);
                r.x += j;
                r.qv += j * j;
                if self.spec.occupation {
                    r.jumps[r.z] += 1;
                }
                if r.hit_time.is_nan() && (r.x >= self.spec.upper || r.x <= self.spec.lower) {
                    r.hit_time = t;
                    r.hit_upper = r.x >= self.spec.upper;
                    r.hit_disc = r.disc;
                }
            } else {
                let mut target = u - reg.lambda;
                let mut next = r.z;
                for j in 0..n0 {
                    if j == r.z {
                        continue;
                    }
                    next = j;
                    target -= q[(r.z, j)];
                    if target < 0.0 {
                        break;
                    }
                }
                r.z = next;
            }
        }
        r
    }

    /// Gaussian motion over `[t, t + dt]` in the current regime, with monitoring.
    fn diffuse(&self, r: &mut PathRecord, t: f64, dt: f64, rng: &mut ChaCha8Rng) {
        if dt <= 0.0 {
            return;
        }
        let reg = self.m.regime(r.z);
        let s2 = reg.sigma * reg.sigma;
        let monitor = self.spec.monitored() && r.hit_time.is_nan();
        let mut pieces = 1usize;
        if let Some(h) = self.spec.max_step {
            pieces = pieces.max((dt / h).ceil() as usize);
        }
        if monitor && self.spec.bridge && s2 * dt > self.var_cap {
            pieces = pieces.max((s2 * dt / self.var_cap).ceil() as usize);
        }
        let h = dt / pieces as f64;
        let mut start = t;
        for _ in 0..pieces {
            let z: f64 = StandardNormal.sample(rng);
            let x1 = r.x + reg.mu * h + reg.sigma * h.sqrt() * z;
            if self.spec.monitored() && r.hit_time.is_nan() {
                if let Some((s, upper)) = self.crossing(r.x, x1, s2, h, rng) {
                    r.hit_time = start + s;
                    r.hit_upper = upper;
                    r.hit_disc = r.disc + reg.rd * s;
                }
            }
            r.x = x1;
            r.disc += reg.rd * h;
            r.qv += s2 * h;
            if self.spec.occupation {
                r.occupation[r.z] += h;
            }
            start += h;
        }
    }

    /// Whether the segment `x0 → x1` of length `h` leaves the corridor, and when.
    fn crossing(&self, x0: f64, x1: f64, s2: f64, h: f64, rng: &mut ChaCha8Rng) -> Option<(f64, bool)> {
        let (l, u) = (self.spec.lower, self.spec.upper);
        if !self.spec.bridge {
            return if x1 >= u {
                Some((h, true))
            } else if x1 <= l {
                Some((h, false))
            } else {
                None
            };
        }
        let p_up = if x1 >= u { 1.0 } else if u.is_finite() { (-2.0 * (u - x0) * (u - x1) / (s2 * h)).exp() } else { 0.0 };
        let p_down = if x1 <= l { 1.0 } else if l.is_finite() { (-2.0 * (x0 - l) * (x1 - l) / (s2 * h)).exp() } else { 0.0 };
        let v: f64 = rng.random();
        let upper = if v < p_up {
            true
        } else if v < p_up + p_down {
            false
        } else {
            return None;
        };
        let w: f64 = rng.random();
        let s = if upper {
            bridge_passage_time(u - x0, x1 - x0, s2, h, p_up, w)
        } else {
            bridge_passage_time(x0 - l, x0 - x1, s2, h, p_down, w)
        };
        Some((s, upper))
    }
}

/// Draw the first time a Brownian bridge from 0 to `y` over `[0, h]` reaches `b > 0`, given that it does.
///
/// `p_hit` is the conditioning probability and `w` a uniform draw; the conditional distribution
/// function is inverted by bisection.
pub fn bridge_passage_time(b: f64, y: f64, s2: f64, h: f64, p_hit: f64, w: f64) -> f64 {
    let cdf = |s: f64| -> f64 {
        let m = y * s / h;
        let v = s2 * s * (h - s) / h;
        let sd = v.sqrt();
        let d = b - m;
        let k = 2.0 * b / (s2 * s);
        let z = (d - k * v) / sd;
        let beyond = norm_cdf(-d / sd);
        // e^{−kd + k²v/2}Φ(z), rewritten to avoid overflow when z is very negative
        let below = if z < 0.0 {
            (-d * d / (2.0 * v)).exp() * 0.5 * erfcx(-z / std::f64::consts::SQRT_2)
        } else {
            (-k * d + 0.5 * k * k * v).exp() * norm_cdf(z)
        };
        (beyond + below) / p_hit
    };
    let (mut lo, mut hi) = (0.0, h);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < w {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Discounted functionals of a [`PathBatch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payoff {
    Zcb,
    Vanilla { kind: OptionKind, strike: f64 },
    /// `(S_T − K·S_{T1})⁺`.
    ForwardStart { strike: f64 },
    Dnt,
    KnockOut { kind: OptionKind, strike: f64 },
    KnockIn { kind: OptionKind, strike: f64 },
    /// `amount` paid at the exit time.
    Rebate { amount: f64 },
    /// `Σ_T/T`.
    VarSwap,
    /// `√(Σ_T/T)`.
    VolSwap,
    CharRe { u: f64 },
    CharIm { u: f64 },
    /// `e^{−qτ}` on exit through the upper barrier, times `1/B^D_τ` when `discounted`.
    Passage { q: f64, discounted: bool },
}

impl fmt::Display for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payoff::Zcb => write!(f, "zcb"),
            Payoff::Vanilla { kind, strike } => write!(f, "vanilla {kind} K={strike}"),
            Payoff::ForwardStart { strike } => write!(f, "forward-start K={strike}"),
            Payoff::Dnt => write!(f, "dnt"),
            Payoff::KnockOut { kind, strike } => write!(f, "knock-out {kind} K={strike}"),
            Payoff::KnockIn { kind, strike } => write!(f, "knock-in {kind} K={strike}"),
            Payoff::Rebate { amount } => write!(f, "rebate {amount}"),
            Payoff::VarSwap => write!(f, "var-swap"),
            Payoff::VolSwap => write!(f, "vol-swap"),
            Payoff::CharRe { u } => write!(f, "char-function re u={u}"),
            Payoff::CharIm { u } => write!(f, "char-function im u={u}"),
            Payoff::Passage { q, discounted } => write!(f, "passage-transform q={q} discounted={discounted}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `(value − mean)/se`; infinite when the standard error vanishes and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = value - self.mean;
        if self.se > 0.0 {
            d / self.se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY * d.signum()
        }
    }
}

fn vanilla(kind: OptionKind, s: f64, k: f64) -> f64 {
    match kind {
        OptionKind::Call => (s - k).max(0.0),
        OptionKind::Put => (k - s).max(0.0),
    }
}

/// Per-path discounted values of `payoff`.
pub fn payoff_values(b: &PathBatch, payoff: Payoff) -> Result<Vec<f64>> {
    let n = b.len();
    let t = b.horizon;
    let needs_hits = matches!(
        payoff,
        Payoff::Dnt | Payoff::KnockOut { .. } | Payoff::KnockIn { .. } | Payoff::Rebate { .. } | Payoff::Passage { .. }
    );
    if needs_hits && b.hit_time.is_empty() {
        return invalid(format!("{payoff} needs a monitored batch"));
    }
    let df = |i: usize| (-b.discount[i]).exp();
    let out = (0..n)
        .map(|i| {
            let s = b.terminal[i].exp();
            Ok(match payoff {
                Payoff::Zcb => df(i),
                Payoff::Vanilla { kind, strike } => df(i) * vanilla(kind, s, strike),
                Payoff::ForwardStart { strike } => {
                    let Some(obs) = &b.observed else {
                        return invalid("forward-start payoff needs a batch with an observation time");
                    };
                    df(i) * (s - strike * obs[i].exp()).max(0.0)
                }
                Payoff::Dnt => {
                    if b.hit(i) {
                        0.0
                    } else {
                        df(i)
                    }
                }
                Payoff::KnockOut { kind, strike } => {
                    if b.hit(i) {
                        0.0
                    } else {
                        df(i) * vanilla(kind, s, strike)
                    }
                }
                Payoff::KnockIn { kind, strike } => {
                    if b.hit(i) {
                        df(i) * vanilla(kind, s, strike)
                    } else {
                        0.0
                    }
                }
                Payoff::Rebate { amount } => {
                    if b.hit(i) {
                        amount * (-b.hit_discount[i]).exp()
                    } else {
                        0.0
                    }
                }
                Payoff::VarSwap => df(i) * b.qv[i] / t,
                Payoff::VolSwap => df(i) * (b.qv[i] / t).sqrt(),
                Payoff::CharRe { u } => df(i) * (u * b.terminal[i]).cos(),
                Payoff::CharIm { u } => df(i) * (u * b.terminal[i]).sin(),
                Payoff::Passage { q, discounted } => {
                    if b.hit(i) && b.hit_upper[i] {
                        let d = if discounted { b.hit_discount[i] } else { 0.0 };
                        (-q * b.hit_time[i] - d).exp()
                    } else {
                        0.0
                    }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out)
}

/// Discounted mean of `payoff` and its standard error.
pub fn estimate(b: &PathBatch, payoff: Payoff) -> Result<Estimate> {
    Ok(mean_and_se(&payoff_values(b, payoff)?))
}

/// Sample mean and standard error with pairwise summation in a fixed order.
pub fn mean_and_se(values: &[f64]) -> Estimate {
    let n = values.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return Estimate { mean, se: f64::NAN, n };
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Estimate { mean, se: (var / n as f64).sqrt(), n }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passage_time_cdf_is_a_distribution() {
        let (b, y, s2, h): (f64, f64, f64, f64) = (0.3, 0.1, 0.04, 1.0);
        let p = (-2.0 * b * (b - y) / (s2 * h)).exp();
        let early = bridge_passage_time(b, y, s2, h, p, 1e-9);
        let late = bridge_passage_time(b, y, s2, h, p, 1.0 - 1e-9);
        assert!(early < late && early >= 0.0 && late <= h);
        let med = bridge_passage_time(b, y, s2, h, p, 0.5);
        assert!(med > early && med < late);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64 * 0.5).collect();
        assert_eq!(pairwise_sum(&v), v.iter().sum::<f64>());
    }
}

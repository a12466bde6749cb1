//! Transform pricing of vanilla and forward-start options, implied volatility and smile wings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, c, CVec, C64, I};
use crate::model::RegimeModel;
use crate::settings::NumericalSettings;
use crate::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl std::str::FromStr for OptionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "call" => Ok(OptionKind::Call),
            "put" => Ok(OptionKind::Put),
            other => Err(Error::Invalid(format!("unknown option kind '{other}' (expected call or put)"))),
        }
    }
}

impl std::fmt::Display for OptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaQuote {
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
    pub implied_vol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingSlopes {
    pub q_plus: f64,
    pub q_minus: f64,
    pub slope_right: f64,
    pub slope_left: f64,
}

/// Black price from forward, discount factor, strike, maturity and volatility.
pub fn black_price(kind: OptionKind, forward: f64, df: f64, strike: f64, t: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    if sd <= 0.0 {
        return df * match kind {
            OptionKind::Call => (forward - strike).max(0.0),
            OptionKind::Put => (strike - forward).max(0.0),
        };
    }
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => df * (forward * norm_cdf(d1) - strike * norm_cdf(d2)),
        OptionKind::Put => df * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

/// Black-Scholes price with continuous rates.
pub fn bs_price(kind: OptionKind, spot: f64, strike: f64, t: f64, vol: f64, rd: f64, rf: f64) -> f64 {
    black_price(kind, spot * ((rd - rf) * t).exp(), (-rd * t).exp(), strike, t, vol)
}

fn black_vega(forward: f64, df: f64, strike: f64, t: f64, vol: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = (forward / strike).ln() / sd + 0.5 * sd;
    df * forward * norm_pdf(d1) * t.sqrt()
}

/// Black implied volatility of `price` by safeguarded Newton iteration on a bracket.
pub fn implied_vol_black(kind: OptionKind, price: f64, forward: f64, df: f64, strike: f64, t: f64) -> Result<f64> {
    if !(strike > 0.0 && forward > 0.0 && df > 0.0 && t > 0.0) {
        return domain("implied volatility needs positive strike, forward, discount factor and maturity");
    }
    let (lower, upper) = match kind {
        OptionKind::Call => (df * (forward - strike).max(0.0), df * forward),
        OptionKind::Put => (df * (strike - forward).max(0.0), df * strike),
    };
    if !(price > lower && price < upper) {
        return domain(format!("price {price} is outside the no-arbitrage bounds ({lower}, {upper})"));
    }
    let f = |v: f64| black_price(kind, forward, df, strike, t, v) - price;
    let (mut lo, mut hi) = (1e-8, 1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Numerical("implied volatility above 1000".into()));
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fv = f(v);
        if fv == 0.0 {
            return Ok(v);
        }
        if fv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let vega = black_vega(forward, df, strike, t, v);
        let mut next = v - fv / vega;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-15 * v || hi - lo <= 1e-15 * v {
            v = next;
            break;
        }
        v = next;
    }
    let err = f(v).abs();
    if err > 1e-10 && err > 1e-8 * price {
        return Err(Error::Numerical(format!("implied volatility did not converge (price error {err:e})")));
    }
    Ok(v)
}

/// Forward price and discount factor implied by the model for the starting regime.
pub fn forward_and_discount(m: &RegimeModel, t: f64) -> Result<(f64, f64)> {
    let z0 = m.z0();
    let df = m.zcb(t)?[z0];
    let fwd = m.discounted_forward(t)?[z0] / df;
    Ok((fwd, df))
}

/// Black implied volatility of a model price.
pub fn implied_vol(m: &RegimeModel, quote: &VanillaQuote, kind: OptionKind) -> Result<f64> {
    let (fwd, df) = forward_and_discount(m, quote.maturity)?;
    implied_vol_black(kind, quote.price, fwd, df, quote.strike, quote.maturity)
}

/// Transform in log-strike of the call price, per starting regime:
/// `e^{(1+iξ)x}/(iξ−ξ²)·[exp(T(K(ξ−i)−Λ_D))1]`.
pub fn call_transform(m: &RegimeModel, xi: C64, t: f64) -> Result<CVec> {
    let den = I * xi - xi * xi;
    if den.norm() < 1e-300 {
        return domain("call transform has poles at 0 and i");
    }
    let u = xi - I;
    let v = m.discounted_cf_vector(u, t)?;
    Ok(v / den)
}

/// Damping used for a given kind, pulled inside the strip when the default is too large.
pub fn damping(m: &RegimeModel, kind: OptionKind, cfg: &NumericalSettings) -> Result<f64> {
    let s = m.strip();
    match kind {
        OptionKind::Call => {
            let room = s.alpha_plus_star - 1.0;
            if !(room > 0.0) {
                return domain("calls need alpha+ > 1 in every jumping regime");
            }
            Ok(cfg.damping.abs().min(0.5 * room))
        }
        OptionKind::Put => {
            let room = s.alpha_minus_star;
            Ok(-(1.0 + cfg.damping.abs().min(0.5 * room)))
        }
    }
}

/// Trapezoid grid for the damped Fourier inversion.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FourierGrid {
    pub step: f64,
    pub nodes: usize,
    pub alpha: f64,
}

pub(crate) fn fourier_grid(
    m: &RegimeModel,
    kind: OptionKind,
    t: f64,
    max_moneyness: f64,
    cfg: &NumericalSettings,
) -> Result<FourierGrid> {
    let alpha = damping(m, kind, cfg)?;
    let log_tol = (1.0 / cfg.fourier_tol).ln() + 3.0;
    let sd = (t * m.variance_rate_max()).sqrt();
    let drift = t * m.mean_rate_bound();
    let s = m.strip();
    // decay rates of e^{αk}V(k) to the right and left of the money
    let (rho_r, rho_l) = match kind {
        OptionKind::Call => (s.alpha_plus_star - 1.0 - alpha, alpha),
        OptionKind::Put => (-(1.0 + alpha), 1.0 + alpha + s.alpha_minus_star),
    };
    let mut reach = 14.0 * sd + drift;
    let lam_t = m.regimes().iter().map(|r| r.lambda).fold(0.0, f64::max) * t;
    // only the side facing the jump tail needs the Poisson allowance
    let (jump_r, jump_l) = match kind {
        OptionKind::Call => (true, false),
        OptionKind::Put => (false, true),
    };
    for (rho, jumpy) in [(rho_r, jump_r), (rho_l, jump_l)] {
        if rho.is_finite() {
            let extra = if jumpy { 4.0 * (lam_t * log_tol).sqrt() } else { 0.0 };
            reach = reach.max(drift + (log_tol + extra) / rho);
        }
    }
    let period = max_moneyness + reach;
    let step = 2.0 * PI / period;
    let s2 = m.sigma_min().powi(2);
    let growth = 0.5 * s2 * t * (1.0 + alpha).powi(2);
    let s_gauss = (2.0 * (log_tol + growth) / (s2 * t)).sqrt() + 1.0;
    let s_max = truncation_point(m, 1.0 + alpha, t, (alpha.abs() * max_moneyness).exp(), s_gauss, cfg)?;
    let nodes = (s_max / step).ceil() as usize + 1;
    if nodes > cfg.fourier_max_nodes {
        return Err(Error::Tolerance {
            what: format!("Fourier inversion needs {nodes} nodes (cap {})", cfg.fourier_max_nodes),
            estimate: f64::INFINITY,
            tol: cfg.fourier_tol,
        });
    }
    Ok(FourierGrid { step, nodes, alpha })
}

/// Largest entry of `exp(t(Q + diag(ψ(−iβ) − σ²ξ²/2 − R_D)))1`.
///
/// Bounds `|E[e^{i(ξ−iβ)X_t}/B_t^D]|` from every starting regime, since the modulus of the jump
/// transform is at most its value at `ξ = 0` and `Q` has non-negative off-diagonal entries.
pub(crate) fn cf_envelope(m: &RegimeModel, beta: f64, t: f64, xi: f64) -> Result<f64> {
    let mut a = m.generator().to_complex();
    for (i, r) in m.regimes().iter().enumerate() {
        let psi = m.psi(i, C64::new(0.0, -beta))?.re;
        a[(i, i)] += c(psi - 0.5 * r.sigma * r.sigma * xi * xi - r.rd);
    }
    let e = linalg::expm(&(a * c(t)))?;
    Ok(e.row_iter().map(|row| row.iter().map(|z| z.re).sum::<f64>()).fold(0.0, f64::max))
}

/// Smallest `S ≤ s_gauss` beyond which the transform tail `∫_S scale·env(s)/s² ds` is below half the Fourier tolerance.
fn truncation_point(m: &RegimeModel, beta: f64, t: f64, scale: f64, s_gauss: f64, cfg: &NumericalSettings) -> Result<f64> {
    if m.n_regimes() == 1 {
        return Ok(s_gauss);
    }
    let target = 0.5 * cfg.fourier_tol * PI;
    let ok = |s: f64| -> Result<bool> { Ok(scale * cf_envelope(m, beta, t, s)? / s <= target) };
    let (mut lo, mut hi) = (1.0f64, s_gauss);
    if ok(lo)? {
        return Ok(lo);
    }
    if !ok(hi)? {
        return Ok(hi);
    }
    while hi - lo > 0.02 * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Vanilla prices for every strike (outer) and starting regime (inner).
pub fn vanilla_prices_all_regimes(
    m: &RegimeModel,
    kind: OptionKind,
    strikes: &[f64],
    t: f64,
    cfg: &NumericalSettings,
) -> Result<Vec<Vec<f64>>> {
    if !(t > 0.0) {
        return domain(format!("maturity must be positive, got {t}"));
    }
    if strikes.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
        return domain("strikes must be positive");
    }
    let ks: Vec<f64> = strikes.iter().map(|k| k.ln()).collect();
    let far = ks.iter().map(|k| (k - m.x0()).abs()).fold(0.0, f64::max);
    let g = fourier_grid(m, kind, t, far, cfg)?;
    let n0 = m.n_regimes();
    let values: Vec<CVec> = (0..g.nodes)
        .map(|j| call_transform(m, C64::new(j as f64 * g.step, -g.alpha), t))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(strikes.len());
    for &k in &ks {
        let mut acc = vec![0.0; n0];
        for (j, v) in values.iter().enumerate().rev() {
            let s = j as f64 * g.step;
            let w = if j == 0 { 0.5 } else { 1.0 };
            let phase = (-I * s * k).exp();
            for (i, a) in acc.iter_mut().enumerate() {
                *a += w * (phase * v[i]).re;
            }
        }
        let scale = (-g.alpha * k).exp() * g.step / PI;
        out.push(acc.into_iter().map(|a| a * scale).collect());
    }
    Ok(out)
}

/// Vanilla prices from the starting regime for a strip of strikes.
pub fn price_european_many(
    m: &RegimeModel,
    kind: OptionKind,
    strikes: &[f64],
    t: f64,
    cfg: &NumericalSettings,
) -> Result<Vec<f64>> {
    let z0 = m.z0();
    Ok(vanilla_prices_all_regimes(m, kind, strikes, t, cfg)?.into_iter().map(|v| v[z0]).collect())
}

pub fn price_european(m: &RegimeModel, kind: OptionKind, strike: f64, t: f64, cfg: &NumericalSettings) -> Result<f64> {
    Ok(price_european_many(m, kind, &[strike], t, cfg)?[0])
}

/// Price of `(S_{T₂} − κ S_{T₁})⁺` paid at `T₂`.
pub fn price_forward_start(m: &RegimeModel, kappa: f64, t1: f64, t2: f64, cfg: &NumericalSettings) -> Result<f64> {
    if !(t1 >= 0.0 && t2 > t1) {
        return domain(format!("forward start needs 0 <= t1 < t2, got t1={t1}, t2={t2}"));
    }
    if !(kappa > 0.0) {
        return domain("relative strike must be positive");
    }
    let unit = m.with_start(0.0, m.z0())?;
    let calls = vanilla_prices_all_regimes(&unit, OptionKind::Call, &[kappa], t2 - t1, cfg)?.remove(0);
    let weights = m.discounted_cf(-I, t1)?;
    let row = weights.row(m.z0());
    let mut v = c(0.0);
    for (j, cj) in calls.iter().enumerate() {
        v += row[j] * *cj;
    }
    Ok(v.re)
}

/// Asymptotic wing slopes of implied total variance per unit log-moneyness.
pub fn wing_slopes(m: &RegimeModel) -> Result<WingSlopes> {
    if !m.generator().is_irreducible() {
        return domain("wing slopes need an irreducible regime chain");
    }
    let mut q_plus = f64::INFINITY;
    let mut q_minus = f64::INFINITY;
    for r in m.regimes() {
        if r.lambda_plus() > 0.0 {
            q_plus = q_plus.min(r.jumps.alpha_plus() - 1.0);
        }
        if r.lambda_minus() > 0.0 {
            q_minus = q_minus.min(r.jumps.alpha_minus());
        }
    }
    Ok(WingSlopes { q_plus, q_minus, slope_right: lee_slope(q_plus), slope_left: lee_slope(q_minus) })
}

/// `2 − 4(√(q²+q) − q)`, with the limit 0 at `q = ∞`.
pub fn lee_slope(q: f64) -> f64 {
    if q.is_infinite() {
        return 0.0;
    }
    if q <= 0.0 {
        return 2.0;
    }
    // rationalised form avoids cancellation for large q
    let d = q / ((q * q + q).sqrt() + q);
    2.0 - 4.0 * d
}

/// Weights `f_j = q_t(y,j)/q_t(y)` of the regime at time `t` given `X_t = y`.
pub fn forward_smile_weights(m: &RegimeModel, y: f64, t: f64, cfg: &NumericalSettings) -> Result<Vec<f64>> {
    let p = m.joint_density(t, &[y], cfg)?.remove(0);
    if !(p.total > 10.0 * p.error_bound) || !(p.total > 0.0) {
        return domain(format!("density at y = {y} vanishes; forward smile weights undefined"));
    }
    Ok(p.per_regime.iter().map(|v| (v / p.total).max(0.0)).collect())
}

/// Forward smile at `T₁`, conditional on `X_{T₁} = y`: weights and the mixed vanilla prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSmile {
    pub weights: Vec<f64>,
    pub prices: Vec<f64>,
    pub implied_vols: Vec<Option<f64>>,
}

/// Prices `S_{T₁} Σ_j f_j C^{(j)}_{T₂−T₁}(κ)` for the relative strikes `kappas`.
pub fn forward_smile(
    m: &RegimeModel,
    y: f64,
    t1: f64,
    t2: f64,
    kappas: &[f64],
    cfg: &NumericalSettings,
) -> Result<ForwardSmile> {
    if !(t2 > t1) {
        return domain("forward smile needs t2 > t1");
    }
    let weights = forward_smile_weights(m, y, t1, cfg)?;
    let unit = m.with_start(0.0, m.z0())?;
    let tau = t2 - t1;
    let calls = vanilla_prices_all_regimes(&unit, OptionKind::Call, kappas, tau, cfg)?;
    let zcb = unit.zcb(tau)?;
    let fwd = unit.discounted_forward(tau)?;
    let df: f64 = weights.iter().zip(&zcb).map(|(w, z)| w * z).sum();
    let f: f64 = weights.iter().zip(&fwd).map(|(w, z)| w * z).sum::<f64>() / df;
    let s1 = y.exp();
    let mut prices = Vec::with_capacity(kappas.len());
    let mut vols = Vec::with_capacity(kappas.len());
    for (k, row) in kappas.iter().zip(calls) {
        let p: f64 = weights.iter().zip(&row).map(|(w, c)| w * c).sum();
        prices.push(s1 * p);
        vols.push(implied_vol_black(OptionKind::Call, p, f, df, *k, tau).ok());
    }
    Ok(ForwardSmile { weights, prices, implied_vols: vols })
}

/// Put-call parity right-hand side `S₀[exp(T(K(−i)−Λ_D))1] − K·zcb` from the starting regime.
pub fn parity_gap(m: &RegimeModel, strike: f64, t: f64) -> Result<f64> {
    let z0 = m.z0();
    Ok(m.discounted_forward(t)?[z0] - strike * m.zcb(t)?[z0])
}

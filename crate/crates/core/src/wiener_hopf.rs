//! Matrix Wiener-Hopf factorisation of the fluid generator and first-passage matrices.
//!
//! For a discount vector `h` the factorisation `(η⁺, Q⁺, η⁻, Q⁻)` solves
//! `½Σ²ηQ² ∓ VηQ + Q_hη = 0` with `Q_h = Q₀ − diag(h)`.
//! It is computed from the invariant subspaces of a linearisation of the quadratic
//! pencil `½Σ²γ² − Vγ + Q_h`, then polished by Newton's method.

use crate::error::{domain, Error, Result};
use crate::fluid::FluidEmbedding;
use crate::linalg::{self, c, CMat, CVec, C64, I};
use crate::settings::NumericalSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Up,
    Down,
}

/// Roots of `det(½Σ²γ² − Vγ + Q_h) = 0` and the matching null vectors.
#[derive(Debug, Clone)]
pub struct QepSpectrum {
    pub roots: Vec<C64>,
    /// Column `k` spans the kernel of the pencil at `roots[k]`.
    pub vectors: CMat,
}

impl QepSpectrum {
    pub fn stable(&self, margin: f64) -> Vec<usize> {
        (0..self.roots.len()).filter(|&k| self.roots[k].re < -margin).collect()
    }

    pub fn unstable(&self, margin: f64) -> Vec<usize> {
        (0..self.roots.len()).filter(|&k| self.roots[k].re > margin).collect()
    }
}

fn q_h(emb: &FluidEmbedding, h: &CVec) -> Result<CMat> {
    if h.len() != emb.dim() {
        return Err(Error::Dimension(format!("discount vector has {} entries, expected {}", h.len(), emb.dim())));
    }
    let mut q = linalg::to_complex(emb.q0());
    for i in 0..emb.dim() {
        q[(i, i)] -= h[i];
    }
    Ok(q)
}

fn check_h(emb: &FluidEmbedding, h: &CVec) -> Result<()> {
    for i in 0..emb.dim() {
        if h[i].re < 0.0 || !h[i].re.is_finite() || !h[i].im.is_finite() {
            return domain(format!("discount vector entry {i} has negative or non-finite real part"));
        }
    }
    for k in 0..emb.n_regimes() {
        if !(h[emb.regime_state(k)].re > 0.0) {
            return domain(format!("discount vector must have positive real part on regime {k}"));
        }
    }
    Ok(())
}

/// Companion-type linearisation in `z = (w, γ·w|regimes)`.
fn linearisation(emb: &FluidEmbedding, qh: &CMat) -> CMat {
    let n = emb.dim();
    let n0 = emb.n_regimes();
    let mut l = CMat::zeros(n + n0, n + n0);
    let (sigma, v) = (emb.sigma(), emb.drift());
    let regime_of = |s: usize| (0..n0).find(|&k| emb.regime_state(k) == s);
    for s in 0..n {
        match regime_of(s) {
            Some(k) => {
                l[(s, n + k)] = c(1.0);
                let s2 = sigma[s] * sigma[s];
                for j in 0..n {
                    l[(n + k, j)] = -qh[(s, j)] * (2.0 / s2);
                }
                l[(n + k, n + k)] = c(2.0 * v[s] / s2);
            }
            None => {
                for j in 0..n {
                    l[(s, j)] = qh[(s, j)] * v[s];
                }
            }
        }
    }
    l
}

pub fn qep_spectral_data(emb: &FluidEmbedding, h: &CVec) -> Result<QepSpectrum> {
    check_h(emb, h)?;
    let qh = q_h(emb, h)?;
    let e = linalg::eig(&linearisation(emb, &qh))?;
    let n = emb.dim();
    let vectors = e.vectors.rows(0, n).into_owned();
    Ok(QepSpectrum { roots: e.values, vectors })
}

#[derive(Debug, Clone)]
pub struct WhFactorisation {
    pub eta_plus: CMat,
    pub q_plus: CMat,
    pub eta_minus: CMat,
    pub q_minus: CMat,
    pub h: CVec,
    /// Relative max-norm residuals of the up and down equations.
    pub residuals: (f64, f64),
    pub newton_steps: usize,
    /// Whether the defective-spectrum perturbation was used.
    pub perturbed: bool,
}

/// `½Σ²WG² − s·VWG + Q_hW` and a scale for relative residuals.
fn residual(emb: &FluidEmbedding, qh: &CMat, w: &CMat, g: &CMat, sign: f64) -> (CMat, f64) {
    let wg = w * g;
    let mut a = &wg * g;
    let mut b = wg;
    for (i, (s, v)) in emb.sigma().iter().zip(emb.drift()).enumerate() {
        a.row_mut(i).scale_mut(0.5 * s * s);
        b.row_mut(i).scale_mut(-sign * v);
    }
    let cq = qh * w;
    let scale = linalg::max_abs(&a).max(linalg::max_abs(&b)).max(linalg::max_abs(&cq)).max(f64::MIN_POSITIVE);
    (a + b + cq, scale)
}

fn relative_residual(emb: &FluidEmbedding, qh: &CMat, w: &CMat, g: &CMat, sign: f64) -> f64 {
    let (r, scale) = residual(emb, qh, w, g, sign);
    linalg::max_abs(&r) / scale
}

/// Rows of `W` that are fixed to the identity: the first `k` for the up side, the last `k` for the down side.
fn identity_rows(n: usize, k: usize, side: Side) -> std::ops::Range<usize> {
    match side {
        Side::Up => 0..k,
        Side::Down => n - k..n,
    }
}

fn sign(side: Side) -> f64 {
    match side {
        Side::Up => 1.0,
        Side::Down => -1.0,
    }
}

/// Newton's method on the free rows of `W` and all of `G`.
fn newton(
    emb: &FluidEmbedding,
    qh: &CMat,
    w: &mut CMat,
    g: &mut CMat,
    side: Side,
    steps: usize,
) -> Result<usize> {
    let n = w.nrows();
    let k = w.ncols();
    let fixed = identity_rows(n, k, side);
    let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
    let n_unknown = free.len() * k + k * k;
    let s = sign(side);
    let sig2: Vec<f64> = emb.sigma().iter().map(|x| 0.5 * x * x).collect();
    let v = emb.drift();
    let mut done = 0;
    for _ in 0..steps {
        let (r, _) = residual(emb, qh, w, g, s);
        let before = relative_residual(emb, qh, w, g, s);
        let g2 = &*g * &*g;
        let mut jac = CMat::zeros(n * k, n_unknown);
        let mut col = 0;
        // dW = e_a e_b': ½Σ²e_a(G²)_b − sV e_a G_b + Q_h[:,a] e_b'
        for &a in &free {
            for b in 0..k {
                for j in 0..k {
                    jac[(a + j * n, col)] += g2[(b, j)] * sig2[a] - g[(b, j)] * (s * v[a]);
                }
                for i in 0..n {
                    jac[(i + b * n, col)] += qh[(i, a)];
                }
                col += 1;
            }
        }
        // dG = e_a e_b': ½Σ²(W[:,a]G[b,:] + (WG)[:,a]e_b') − sV W[:,a]e_b'
        let wg = &*w * &*g;
        for a in 0..k {
            for b in 0..k {
                for i in 0..n {
                    for j in 0..k {
                        jac[(i + j * n, col)] += w[(i, a)] * g[(b, j)] * sig2[i];
                    }
                    jac[(i + b * n, col)] += wg[(i, a)] * sig2[i] - w[(i, a)] * (s * v[i]);
                }
                col += 1;
            }
        }
        let rhs = CMat::from_iterator(n * k, 1, r.iter().map(|z| -z));
        let delta = match linalg::solve(&jac, &rhs) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut w2 = w.clone();
        let mut g2n = g.clone();
        let mut col = 0;
        for &a in &free {
            for b in 0..k {
                w2[(a, b)] += delta[(col, 0)];
                col += 1;
            }
        }
        for a in 0..k {
            for b in 0..k {
                g2n[(a, b)] += delta[(col, 0)];
                col += 1;
            }
        }
        let after = relative_residual(emb, qh, &w2, &g2n, s);
        if !(after < before) {
            break;
        }
        *w = w2;
        *g = g2n;
        done += 1;
    }
    Ok(done)
}

enum SpectralFailure {
    Defective,
    Other(Error),
}

/// `(W, G)` from the stable (up) or anti-stable (down) invariant subspace.
fn spectral_side(
    emb: &FluidEmbedding,
    spec: &QepSpectrum,
    side: Side,
    cfg: &NumericalSettings,
) -> std::result::Result<(CMat, CMat), SpectralFailure> {
    let n = emb.dim();
    let scale = spec.roots.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    let margin = cfg.wh_split_margin * scale;
    let near = spec.roots.iter().filter(|z| z.re.abs() <= margin).count();
    if near > 0 {
        return Err(SpectralFailure::Other(Error::Numerical(format!(
            "{near} root(s) of the Wiener-Hopf pencil lie on the imaginary axis"
        ))));
    }
    let (idx, k) = match side {
        Side::Up => (spec.stable(margin), emb.n_plus()),
        Side::Down => (spec.unstable(margin), emb.n_minus()),
    };
    if idx.len() != k {
        return Err(SpectralFailure::Other(Error::Numerical(format!(
            "expected {k} roots in the {} half-plane, found {}",
            if side == Side::Up { "left" } else { "right" },
            idx.len()
        ))));
    }
    let mut m = CMat::zeros(n, k);
    let mut gamma = CMat::zeros(k, k);
    for (col, &r) in idx.iter().enumerate() {
        m.set_column(col, &spec.vectors.column(r));
        gamma[(col, col)] = spec.roots[r];
    }
    let rows = identity_rows(n, k, side);
    let block = m.rows(rows.start, k).into_owned();
    if linalg::condition_number(&block) > cfg.wh_defect_cond {
        return Err(SpectralFailure::Defective);
    }
    let inv = linalg::inverse(&block).map_err(|_| SpectralFailure::Defective)?;
    let w = &m * &inv;
    let mut g = &block * gamma * &inv;
    if side == Side::Down {
        g = -g;
    }
    Ok((w, g))
}

fn spectral_pair(emb: &FluidEmbedding, h: &CVec, cfg: &NumericalSettings) -> Result<Option<[(CMat, CMat); 2]>> {
    let spec = qep_spectral_data(emb, h)?;
    let mut out = Vec::with_capacity(2);
    for side in [Side::Up, Side::Down] {
        match spectral_side(emb, &spec, side, cfg) {
            Ok(p) => out.push(p),
            Err(SpectralFailure::Defective) => return Ok(None),
            Err(SpectralFailure::Other(e)) => return Err(e),
        }
    }
    let down = out.pop().expect("two sides");
    let up = out.pop().expect("two sides");
    Ok(Some([up, down]))
}

/// Computes the factorisation for discount vector `h`.
pub fn factorize(emb: &FluidEmbedding, h: &CVec, cfg: &NumericalSettings) -> Result<WhFactorisation> {
    check_h(emb, h)?;
    let qh = q_h(emb, h)?;
    let mut perturbed = false;
    let [(mut wp, mut gp), (mut wm, mut gm)] = match spectral_pair(emb, h, cfg)? {
        Some(p) => p,
        None => {
            // clustered or defective roots: average factorisations at h ± δ(1+i)
            perturbed = true;
            let hmax = h.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let delta = C64::new(1.0, 1.0) * (cfg.wh_perturbation * hmax.max(1.0));
            let mut shifted = Vec::with_capacity(2);
            for sgn in [1.0, -1.0] {
                let mut h2 = h.clone();
                for k in 0..emb.n_regimes() {
                    h2[emb.regime_state(k)] += delta * sgn;
                }
                match spectral_pair(emb, &h2, cfg)? {
                    Some(p) => shifted.push(p),
                    None => {
                        return Err(Error::Numerical(
                            "Wiener-Hopf eigenvector basis stays singular under perturbation".into(),
                        ))
                    }
                }
            }
            let [(a1, b1), (c1, d1)] = shifted.pop().expect("two shifts");
            let [(a0, b0), (c0, d0)] = shifted.pop().expect("two shifts");
            [((a0 + a1) * c(0.5), (b0 + b1) * c(0.5)), ((c0 + c1) * c(0.5), (d0 + d1) * c(0.5))]
        }
    };
    let mut steps = 0;
    for (w, g, side) in [(&mut wp, &mut gp, Side::Up), (&mut wm, &mut gm, Side::Down)] {
        let res = relative_residual(emb, &qh, w, g, sign(side));
        let unknowns = (w.nrows() - w.ncols()) * w.ncols() + w.ncols() * w.ncols();
        if (res > cfg.wh_newton_skip_below || perturbed) && unknowns <= cfg.wh_newton_max_unknowns {
            steps += newton(emb, &qh, w, g, side, cfg.wh_newton_steps)?;
        }
    }
    let residuals = (relative_residual(emb, &qh, &wp, &gp, 1.0), relative_residual(emb, &qh, &wm, &gm, -1.0));
    let worst = residuals.0.max(residuals.1);
    if !(worst <= cfg.wh_residual_tol) {
        return Err(Error::Tolerance { what: "Wiener-Hopf factorisation residual".into(), estimate: worst, tol: cfg.wh_residual_tol });
    }
    Ok(WhFactorisation { eta_plus: wp, q_plus: gp, eta_minus: wm, q_minus: gm, h: h.clone(), residuals, newton_steps: steps, perturbed })
}

/// Factorisation for `h = R_D + q` on the regimes.
pub fn factorize_q(emb: &FluidEmbedding, q: C64, cfg: &NumericalSettings) -> Result<WhFactorisation> {
    factorize(emb, &emb.discount_vector(q)?, cfg)
}

fn delta_block(n: usize, k: usize, side: Side) -> CMat {
    let mut d = CMat::zeros(n, k);
    let start = identity_rows(n, k, side).start;
    for j in 0..k {
        d[(start + j, j)] = c(1.0);
    }
    d
}

impl WhFactorisation {
    /// Newton polishing from the current factors (useful after perturbing them).
    pub fn refine(&self, emb: &FluidEmbedding, steps: usize) -> Result<Self> {
        let qh = q_h(emb, &self.h)?;
        let mut out = self.clone();
        out.newton_steps += newton(emb, &qh, &mut out.eta_plus, &mut out.q_plus, Side::Up, steps)?;
        out.newton_steps += newton(emb, &qh, &mut out.eta_minus, &mut out.q_minus, Side::Down, steps)?;
        out.residuals = (
            relative_residual(emb, &qh, &out.eta_plus, &out.q_plus, 1.0),
            relative_residual(emb, &qh, &out.eta_minus, &out.q_minus, -1.0),
        );
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.eta_plus.nrows()
    }

    pub fn n_plus(&self) -> usize {
        self.eta_plus.ncols()
    }

    pub fn n_minus(&self) -> usize {
        self.eta_minus.ncols()
    }

    /// `Φ⁺(x) = η⁺e^{(a−x)Q⁺}` below `a` (identity rows above), `Φ⁻(x) = η⁻e^{(x−a)Q⁻}` above `a`.
    pub fn passage_matrix(&self, a: f64, x: f64, side: Side) -> Result<CMat> {
        match side {
            Side::Up if x <= a => Ok(&self.eta_plus * linalg::expm(&(&self.q_plus * c(a - x)))?),
            Side::Down if x >= a => Ok(&self.eta_minus * linalg::expm(&(&self.q_minus * c(x - a)))?),
            Side::Up => Ok(delta_block(self.dim(), self.n_plus(), Side::Up)),
            Side::Down => Ok(delta_block(self.dim(), self.n_minus(), Side::Down)),
        }
    }

    /// Two-sided exit matrices `(Ψ⁺, Ψ⁻)` for the corridor `[l, u]`.
    pub fn two_sided_matrix(&self, l: f64, u: f64, x: f64) -> Result<(CMat, CMat)> {
        if !(l < u) {
            return domain(format!("lower barrier {l} must be below upper barrier {u}"));
        }
        let (n, np, nm) = (self.dim(), self.n_plus(), self.n_minus());
        if x > u {
            return Ok((delta_block(n, np, Side::Up), CMat::zeros(n, nm)));
        }
        if x < l {
            return Ok((CMat::zeros(n, np), delta_block(n, nm, Side::Down)));
        }
        let ep_width = linalg::expm(&(&self.q_plus * c(u - l)))?;
        let em_width = linalg::expm(&(&self.q_minus * c(u - l)))?;
        let z_plus = (&self.eta_plus * ep_width).rows(n - nm, nm).into_owned();
        let z_minus = (&self.eta_minus * em_width).rows(0, np).into_owned();
        let up = &self.eta_plus * linalg::expm(&(&self.q_plus * c(u - x)))?;
        let down = &self.eta_minus * linalg::expm(&(&self.q_minus * c(x - l)))?;
        let corr_p = linalg::inverse(&(CMat::identity(np, np) - &z_minus * &z_plus))
            .map_err(|_| Error::Singular("I − Z⁻Z⁺ is singular".into()))?;
        let corr_m = linalg::inverse(&(CMat::identity(nm, nm) - &z_plus * &z_minus))
            .map_err(|_| Error::Singular("I − Z⁺Z⁻ is singular".into()))?;
        let psi_p = (&up - &down * &z_plus) * corr_p;
        let psi_m = (&down - &up * &z_minus) * corr_m;
        Ok((psi_p, psi_m))
    }
}

/// `P(sup_{t<e_q} X_t − X_0 > a)` for each level in `levels`, per starting regime, with `e_q` an
/// independent exponential time of rate `q`; with `discounted` the event is weighted by `1/B^D` at passage.
pub fn supremum_tail(
    emb: &FluidEmbedding,
    q: f64,
    levels: &[f64],
    discounted: bool,
    cfg: &NumericalSettings,
) -> Result<Vec<Vec<f64>>> {
    if !(q > 0.0) {
        return domain(format!("killing rate must be positive, got {q}"));
    }
    let h = if discounted {
        emb.discount_vector(c(q))?
    } else {
        let mut h = CVec::zeros(emb.dim());
        for i in 0..emb.n_regimes() {
            h[emb.regime_state(i)] = c(q);
        }
        h
    };
    let f = factorize(emb, &h, cfg)?;
    levels
        .iter()
        .map(|&a| {
            if !(a >= 0.0) {
                return domain(format!("passage level must be non-negative, got {a}"));
            }
            let phi = f.passage_matrix(a, 0.0, Side::Up)?;
            Ok((0..emb.n_regimes()).map(|i| phi.row(emb.regime_state(i)).sum().re).collect())
        })
        .collect()
}

/// Jump-phase blocks of the embedding, complexified once for repeated overshoot evaluation.
#[derive(Debug, Clone)]
pub struct OvershootData {
    n: usize,
    n_plus: usize,
    n_minus: usize,
    regime_states: Vec<usize>,
    decay: Vec<(f64, f64)>,
    /// Per regime: up block (first state, `B⁺`, exit vector) and the same for the down block.
    blocks: Vec<[Option<(usize, CMat, CVec)>; 2]>,
}

impl OvershootData {
    pub fn new(emb: &FluidEmbedding) -> Self {
        let q0 = emb.q0();
        let mut blocks = Vec::with_capacity(emb.n_regimes());
        for j in 0..emb.n_regimes() {
            let zj = emb.regime_state(j);
            let pick = |range: std::ops::Range<usize>| {
                if range.is_empty() {
                    return None;
                }
                let len = range.len();
                let b = linalg::to_complex(&q0.view((range.start, range.start), (len, len)).into_owned());
                let exit = CVec::from_iterator(len, range.clone().map(|p| c(q0[(p, zj)])));
                Some((range.start, b, exit))
            };
            blocks.push([pick(emb.up_phases(j)), pick(emb.down_phases(j))]);
        }
        OvershootData {
            n: emb.dim(),
            n_plus: emb.n_plus(),
            n_minus: emb.n_minus(),
            regime_states: (0..emb.n_regimes()).map(|j| emb.regime_state(j)).collect(),
            decay: (0..emb.n_regimes()).map(|j| emb.jump_decay(j)).collect(),
            blocks,
        }
    }

    /// `(k⁺, k⁻)` for exiting into regime `j`, including the factors `e^{iu·u}` and `e^{iu·l}`.
    pub fn vectors(&self, l: f64, u: f64, arg: C64, j: usize) -> Result<(CVec, CVec)> {
        if j >= self.regime_states.len() {
            return Err(Error::Invalid(format!("regime {j} out of range")));
        }
        let (ap, am) = self.decay[j];
        if !(arg.im > -ap && arg.im < am) {
            return domain(format!("Im(u) = {} outside the strip ({}, {}) of regime {j}", arg.im, -ap, am));
        }
        let zj = self.regime_states[j];
        let off = self.n - self.n_minus;
        let iu = I * arg;
        let mut kp = CVec::zeros(self.n_plus);
        let mut km = CVec::zeros(self.n_minus);
        kp[zj] = c(1.0);
        km[zj - off] = c(1.0);
        for (block, s, target, shift) in [(&self.blocks[j][0], -iu, &mut kp, 0), (&self.blocks[j][1], iu, &mut km, off)] {
            if let Some((start, b, exit)) = block {
                let len = b.nrows();
                let a = CMat::identity(len, len) * s - b;
                let v = linalg::solve_vec(&a, exit)?;
                for k in 0..len {
                    target[start + k - shift] = v[k];
                }
            }
        }
        Ok((kp * (iu * u).exp(), km * (iu * l).exp()))
    }
}

/// Overshoot vectors `(k⁺, k⁻)` for exiting into regime `j`, evaluated at `e^{iu·barrier}`.
pub fn overshoot_vectors(emb: &FluidEmbedding, l: f64, u: f64, arg: C64, j: usize) -> Result<(CVec, CVec)> {
    OvershootData::new(emb).vectors(l, u, arg, j)
}

/// `H(i) = E_{x,i}[e^{iuX_τ − ∫h}1{Z_τ = j}]` for every starting regime `i`.
pub fn barrier_char_h(
    f: &WhFactorisation,
    emb: &FluidEmbedding,
    l: f64,
    u: f64,
    x: f64,
    arg: C64,
    j: usize,
) -> Result<CVec> {
    let (pp, pm) = f.two_sided_matrix(l, u, x)?;
    let (kp, km) = overshoot_vectors(emb, l, u, arg, j)?;
    let full = pp * kp + pm * km;
    Ok(CVec::from_iterator(emb.n_regimes(), (0..emb.n_regimes()).map(|i| full[emb.regime_state(i)])))
}

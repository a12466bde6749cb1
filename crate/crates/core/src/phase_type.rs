//! Phase-type and double phase-type laws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{domain, invalid, Error, Result};
use crate::linalg::{self, c, to_complex, to_complex_vec, CVec, C64};

const MASS_TOL: f64 = 1e-10;

/// Absorption time of a transient chain started from `alpha` with sub-generator `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseType {
    alpha: DVector<f64>,
    a: DMatrix<f64>,
    decay: f64,
}

impl PhaseType {
    pub fn new(alpha: DVector<f64>, a: DMatrix<f64>) -> Result<Self> {
        let n = alpha.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "phase-type with {} initial weights needs a {n}x{n} matrix, got {}x{}",
                n,
                a.nrows(),
                a.ncols()
            )));
        }
        if alpha.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return invalid("phase-type initial weights must be non-negative");
        }
        if alpha.sum() > 1.0 + MASS_TOL {
            return invalid(format!("phase-type initial weights sum to {} > 1", alpha.sum()));
        }
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() {
                    return invalid(format!("sub-generator entry ({i},{j}) is not finite"));
                }
                if i != j && v < 0.0 {
                    return invalid(format!("sub-generator entry ({i},{j}) is negative"));
                }
                row += v;
            }
            if row > MASS_TOL * a[(i, i)].abs().max(1.0) {
                return invalid(format!("sub-generator row {i} sums to {row} > 0"));
            }
        }
        let decay = if n == 0 { f64::INFINITY } else { -linalg::spectral_abscissa(&to_complex(&a))? };
        if !(decay > 0.0) {
            return invalid("sub-generator is not transient (spectral abscissa is not negative)");
        }
        Ok(PhaseType { alpha, a, decay })
    }

    /// Exponential law with the given rate.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return invalid(format!("exponential rate must be positive, got {rate}"));
        }
        Self::new(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, -rate))
    }

    /// Erlang law with `k` phases of the given rate.
    pub fn erlang(k: usize, rate: f64) -> Result<Self> {
        let mut a = DMatrix::zeros(k, k);
        for i in 0..k {
            a[(i, i)] = -rate;
            if i + 1 < k {
                a[(i, i + 1)] = rate;
            }
        }
        let mut alpha = DVector::zeros(k);
        if k > 0 {
            alpha[0] = 1.0;
        }
        Self::new(alpha, a)
    }

    /// Hyperexponential mixture `Σ w_k Exp(r_k)`.
    pub fn hyperexponential(weights: &[f64], rates: &[f64]) -> Result<Self> {
        if weights.len() != rates.len() {
            return Err(Error::Dimension("weights and rates differ in length".into()));
        }
        let a = DMatrix::from_diagonal(&DVector::from_iterator(rates.len(), rates.iter().map(|r| -r)));
        Self::new(DVector::from_column_slice(weights), a)
    }

    /// The law with no phases: an atom at zero carrying all mass.
    pub fn empty() -> Self {
        PhaseType { alpha: DVector::zeros(0), a: DMatrix::zeros(0, 0), decay: f64::INFINITY }
    }

    pub fn phases(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Mass on `(0, ∞)`.
    pub fn mass(&self) -> f64 {
        self.alpha.sum()
    }

    /// Exit rates `−A·1`.
    pub fn exit_vector(&self) -> DVector<f64> {
        -(&self.a * DVector::from_element(self.phases(), 1.0))
    }

    /// `−spectral_abscissa(A)`: the exponential decay rate of the tail.
    pub fn decay_rate(&self) -> f64 {
        self.decay
    }

    fn survival_vector(&self, t: f64) -> Result<CVec> {
        let e = linalg::expm(&(to_complex(&self.a) * c(t)))?;
        Ok(e.transpose() * to_complex_vec(&self.alpha))
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return domain(format!("phase-type density needs t > 0, got {t}"));
        }
        if self.phases() == 0 {
            return Ok(0.0);
        }
        let row = self.survival_vector(t)?;
        let exit = to_complex_vec(&self.exit_vector());
        Ok(row.dot(&exit).re.max(0.0))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("phase-type cdf needs t >= 0, got {t}"));
        }
        Ok((1.0 - self.survival(t)?).clamp(0.0, 1.0))
    }

    /// `α′e^{tA}1`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if self.phases() == 0 {
            return Ok(0.0);
        }
        Ok(self.survival_vector(t)?.iter().map(|z| z.re).sum::<f64>())
    }

    /// `n!·α′(−A)⁻ⁿ1`.
    pub fn moment(&self, n: u32) -> Result<f64> {
        if n == 0 {
            return domain("moment order must be at least 1");
        }
        if self.phases() == 0 {
            return Ok(0.0);
        }
        let neg = to_complex(&(-&self.a));
        let mut v = linalg::ones(self.phases());
        let mut fact = 1.0;
        for k in 1..=n {
            v = linalg::solve_vec(&neg, &v).map_err(|_| Error::Singular("sub-generator is singular".into()))?;
            fact *= k as f64;
        }
        Ok(fact * to_complex_vec(&self.alpha).dot(&v).re)
    }

    pub fn mean(&self) -> f64 {
        self.moment(1).unwrap_or(f64::NAN)
    }

    /// `E[e^{uX}] = α′(A+uI)⁻¹A1 + (1−α′1)`, for `Re u < decay_rate − margin`.
    pub fn mgf(&self, u: C64, margin: f64) -> Result<C64> {
        if !(u.re < self.decay - margin) {
            return domain(format!(
                "mgf argument {u} is outside the domain Re(u) < {} of this phase-type law",
                self.decay
            ));
        }
        self.mgf_unchecked(u)
    }

    pub(crate) fn mgf_unchecked(&self, u: C64) -> Result<C64> {
        let n = self.phases();
        if n == 0 {
            return Ok(c(1.0));
        }
        let mut m = to_complex(&self.a);
        for i in 0..n {
            m[(i, i)] += u;
        }
        let rhs = to_complex_vec(&(&self.a * DVector::from_element(n, 1.0)));
        let x = linalg::solve_vec(&m, &rhs)?;
        Ok(to_complex_vec(&self.alpha).dot(&x) + (1.0 - self.mass()))
    }

    /// Law of `c·X`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return domain(format!("scale factor must be positive, got {factor}"));
        }
        Ok(PhaseType { alpha: self.alpha.clone(), a: &self.a / factor, decay: self.decay / factor })
    }

    /// Samples the absorption time; returns 0 when the chain starts absorbed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = self.phases();
        let mut u: f64 = rng.random();
        let mut state = None;
        for i in 0..n {
            if u < self.alpha[i] {
                state = Some(i);
                break;
            }
            u -= self.alpha[i];
        }
        let mut t = 0.0;
        while let Some(i) = state {
            let rate = -self.a[(i, i)];
            let e: f64 = Exp1.sample(rng);
            t += e / rate;
            let mut v: f64 = rng.random::<f64>() * rate;
            state = None;
            for j in 0..n {
                if j != i {
                    if v < self.a[(i, j)] {
                        state = Some(j);
                        break;
                    }
                    v -= self.a[(i, j)];
                }
            }
        }
        t
    }

    /// Initial law of the residual lifetime given survival past `s`.
    pub fn residual_after(&self, s: f64) -> Result<Self> {
        let row = self.survival_vector(s)?;
        let w: f64 = row.iter().map(|z| z.re).sum();
        if !(w > 0.0) {
            return domain("survival probability vanishes");
        }
        let alpha = DVector::from_iterator(self.phases(), row.iter().map(|z| (z.re / w).max(0.0)));
        Self::new(alpha, self.a.clone())
    }
}

/// Two-sided jump law: up with probability `p` and size `PH(β⁺,B⁺)`, down otherwise with size `PH(β⁻,B⁻)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoublePhaseType {
    p: f64,
    plus: PhaseType,
    minus: PhaseType,
}

impl DoublePhaseType {
    pub fn new(p: f64, plus: PhaseType, minus: PhaseType) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("upward jump probability must lie in [0,1], got {p}"));
        }
        if p > 0.0 && (plus.mass() - 1.0).abs() > MASS_TOL {
            return invalid(format!("upward jump law has mass {} on (0,inf); an atom at zero is not allowed", plus.mass()));
        }
        if p < 1.0 && (minus.mass() - 1.0).abs() > MASS_TOL {
            return invalid(format!("downward jump law has mass {} on (0,inf); an atom at zero is not allowed", minus.mass()));
        }
        // tails that never fire are dropped so they cannot contribute phases
        let plus = if p > 0.0 { plus } else { PhaseType::empty() };
        let minus = if p < 1.0 { minus } else { PhaseType::empty() };
        Ok(DoublePhaseType { p, plus, minus })
    }

    /// Kou's double-exponential law.
    pub fn double_exponential(p: f64, eta_plus: f64, eta_minus: f64) -> Result<Self> {
        let plus = if p > 0.0 { PhaseType::exponential(eta_plus)? } else { PhaseType::empty() };
        let minus = if p < 1.0 { PhaseType::exponential(eta_minus)? } else { PhaseType::empty() };
        Self::new(p, plus, minus)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn plus(&self) -> &PhaseType {
        &self.plus
    }

    pub fn minus(&self) -> &PhaseType {
        &self.minus
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if x == 0.0 || !x.is_finite() {
            return domain("double phase-type density is undefined at 0");
        }
        if x > 0.0 {
            if self.p == 0.0 {
                return Ok(0.0);
            }
            Ok(self.p * self.plus.pdf(x)?)
        } else {
            if self.p == 1.0 {
                return Ok(0.0);
            }
            Ok((1.0 - self.p) * self.minus.pdf(-x)?)
        }
    }

    /// `E[e^{uJ}]` without a domain check.
    pub(crate) fn mgf_unchecked(&self, u: C64) -> Result<C64> {
        let mut v = c(0.0);
        if self.p > 0.0 {
            v += self.p * self.plus.mgf_unchecked(u)?;
        }
        if self.p < 1.0 {
            v += (1.0 - self.p) * self.minus.mgf_unchecked(-u)?;
        }
        Ok(v)
    }

    /// `E[e^{uJ}]` for `−α⁻ < Re u < α⁺`.
    pub fn mgf(&self, u: C64, margin: f64) -> Result<C64> {
        if self.p > 0.0 && !(u.re < self.plus.decay_rate() - margin) {
            return domain(format!("Re(u) = {} is beyond the upward decay rate {}", u.re, self.plus.decay_rate()));
        }
        if self.p < 1.0 && !(-u.re < self.minus.decay_rate() - margin) {
            return domain(format!("Re(u) = {} is beyond the downward decay rate {}", u.re, self.minus.decay_rate()));
        }
        self.mgf_unchecked(u)
    }

    /// `α⁺`, or +∞ when upward jumps never occur.
    pub fn alpha_plus(&self) -> f64 {
        if self.p > 0.0 {
            self.plus.decay_rate()
        } else {
            f64::INFINITY
        }
    }

    pub fn alpha_minus(&self) -> f64 {
        if self.p < 1.0 {
            self.minus.decay_rate()
        } else {
            f64::INFINITY
        }
    }

    pub fn mean(&self) -> f64 {
        self.p * self.plus.moment(1).unwrap_or(0.0) - (1.0 - self.p) * self.minus.moment(1).unwrap_or(0.0)
    }

    /// `E[J²]`.
    pub fn second_moment(&self) -> f64 {
        self.p * self.plus.moment(2).unwrap_or(0.0) + (1.0 - self.p) * self.minus.moment(2).unwrap_or(0.0)
    }

    /// Law of `c·J`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        Ok(DoublePhaseType { p: self.p, plus: self.plus.scale(factor)?, minus: self.minus.scale(factor)? })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let up = rng.random::<f64>() < self.p;
        if up {
            self.plus.sample(rng)
        } else {
            -self.minus.sample(rng)
        }
    }
}

pub fn ph_pdf(d: &PhaseType, t: f64) -> Result<f64> {
    d.pdf(t)
}

pub fn ph_cdf(d: &PhaseType, t: f64) -> Result<f64> {
    d.cdf(t)
}

pub fn ph_moment(d: &PhaseType, n: u32) -> Result<f64> {
    d.moment(n)
}

pub fn ph_mgf(d: &PhaseType, u: C64) -> Result<C64> {
    d.mgf(u, crate::settings::NumericalSettings::default().mgf_margin)
}

pub fn dph_pdf(d: &DoublePhaseType, x: f64) -> Result<f64> {
    d.pdf(x)
}

pub fn dph_scale(d: &DoublePhaseType, factor: f64) -> Result<DoublePhaseType> {
    d.scale(factor)
}

pub fn dph_sample<R: Rng + ?Sized>(d: &DoublePhaseType, rng: &mut R) -> f64 {
    d.sample(rng)
}

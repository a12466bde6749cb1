//! Generators of finite Markov chains, semigroups with potential and resolvents.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, to_complex, CMat, C64};
use crate::settings::NumericalSettings;

/// A validated Markov generator: non-negative off-diagonal rates, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    q: DMatrix<f64>,
}

impl Generator {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        validate_generator(m)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn to_complex(&self) -> CMat {
        to_complex(&self.q)
    }

    /// Total rate of leaving state `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.q[(i, i)]
    }

    /// True when every state reaches every other state through positive rates.
    pub fn is_irreducible(&self) -> bool {
        let n = self.dim();
        if n <= 1 {
            return true;
        }
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    let rate = if forward { self.q[(i, j)] } else { self.q[(j, i)] };
                    if j != i && rate > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Stationary distribution of an irreducible chain.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut a = to_complex(&self.q.transpose());
        for j in 0..n {
            a[(n - 1, j)] = c(1.0);
        }
        let mut b = CMat::zeros(n, 1);
        b[(n - 1, 0)] = c(1.0);
        let x = linalg::solve(&a, &b)?;
        Ok(x.iter().map(|z| z.re).collect())
    }
}

/// Accepts `m` as a generator, or names the first violated invariant.
pub fn validate_generator(m: DMatrix<f64>) -> Result<Generator> {
    validate_generator_with(m, NumericalSettings::default().generator_tol)
}

pub fn validate_generator_with(m: DMatrix<f64>, tol: f64) -> Result<Generator> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("generator must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Err(Error::Invalid("generator must have at least one state".into()));
    }
    for i in 0..m.nrows() {
        let mut sum = 0.0;
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::Invalid(format!("entry ({i},{j}) is not finite")));
            }
            if i != j && v < 0.0 {
                return Err(Error::Invalid(format!("off-diagonal entry ({i},{j}) is negative ({v})")));
            }
            sum += v;
        }
        if sum.abs() > tol * m[(i, i)].abs().max(1.0) {
            return Err(Error::Invalid(format!("row {i} sums to {sum}")));
        }
    }
    Ok(Generator { q: m })
}

/// Exponential of a complex square matrix.
pub fn matrix_exp(m: &CMat) -> Result<CMat> {
    linalg::expm(m)
}

/// `exp(t(Q + diag(B)))`: entry (i,j) is `E_i[exp(∫₀ᵗ B(Z_s) ds); Z_t = j]`.
pub fn semigroup_with_potential(q: &Generator, b: &[C64], t: f64) -> Result<CMat> {
    if b.len() != q.dim() {
        return Err(Error::Dimension(format!("potential has length {} but chain has {} states", b.len(), q.dim())));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let mut m = q.to_complex();
    for (i, bi) in b.iter().enumerate() {
        m[(i, i)] += bi;
    }
    linalg::expm(&(m * c(t)))
}

/// `(qI − M)⁻¹`.
pub fn resolvent(m: &CMat, q: C64) -> Result<CMat> {
    let n = m.nrows();
    let a = CMat::identity(n, n) * q - m;
    linalg::inverse(&a).map_err(|e| match e {
        Error::Singular(s) => Error::Singular(format!("qI - M is not invertible at q = {q}: {s}")),
        other => other,
    })
}

/// Largest real part of the spectrum of `m`.
pub fn spectral_abscissa(m: &CMat) -> Result<f64> {
    linalg::spectral_abscissa(m)
}

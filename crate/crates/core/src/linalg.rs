//! Dense complex linear algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

pub fn to_complex_vec(v: &DVector<f64>) -> CVec {
    v.map(c)
}

pub fn ones(n: usize) -> CVec {
    CVec::from_element(n, c(1.0))
}

/// Largest modulus over all entries.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b`, failing on (numerically) singular `a`.
pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot solve {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let lu = a.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorisation hit a zero pivot".into()))?;
    if !is_finite(&x) {
        return Err(Error::Singular("solution is not finite".into()));
    }
    Ok(x)
}

pub fn solve_vec(a: &CMat, b: &CVec) -> Result<CVec> {
    let bm = CMat::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve(a, &bm)?;
    Ok(CVec::from_column_slice(x.as_slice()))
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    solve(a, &CMat::identity(a.nrows(), a.nrows()))
}

/// 1-norm condition number computed from an explicit inverse.
pub fn condition_number(a: &CMat) -> f64 {
    match inverse(a) {
        Ok(inv) => norm1(a) * norm1(&inv),
        Err(_) => f64::INFINITY,
    }
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 4] = [1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1, 2.097847961257068];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("expm of a {}x{} matrix", n, m.ncols())));
    }
    if !is_finite(m) {
        return Err(Error::Invalid("matrix exponential of non-finite entries".into()));
    }
    if n == 0 {
        return Ok(m.clone());
    }
    if n == 1 {
        return Ok(CMat::from_element(1, 1, m[(0, 0)].exp()));
    }
    let id = CMat::identity(n, n);
    let nrm = norm1(m);
    let a2 = m * m;
    for (&theta, coeffs) in THETA.iter().zip([&PADE3[..], &PADE5[..], &PADE7[..], &PADE9[..]]) {
        if nrm <= theta {
            return pade_low(m, &a2, coeffs, &id);
        }
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scale = c(0.5f64.powi(s));
    let a = m * scale;
    let a2 = &a2 * (scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let u_inner = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]))
        + &a6 * c(b[7])
        + &a4 * c(b[5])
        + &a2 * c(b[3])
        + &id * c(b[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]))
        + &a6 * c(b[6])
        + &a4 * c(b[4])
        + &a2 * c(b[2])
        + &id * c(b[0]);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &CMat, a2: &CMat, b: &[f64], id: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let mut u = CMat::zeros(n, n);
    let mut v = CMat::zeros(n, n);
    let mut pow = id.clone();
    let mut k = 0;
    while k < b.len() {
        v += &pow * c(b[k]);
        if k + 1 < b.len() {
            u += &pow * c(b[k + 1]);
        }
        pow = &pow * a2;
        k += 2;
    }
    let u = a * u;
    solve(&(&v - &u), &(&v + &u))
}

/// Diagonal similarity `d` with `d⁻¹ m d` balanced (row and column norms comparable).
pub fn balance(m: &CMat) -> (CMat, Vec<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut d = vec![1.0; n];
    const RADIX: f64 = 2.0;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += a[(j, i)].norm();
                    row += a[(i, j)].norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let total = col + row;
            let mut f = 1.0;
            let mut g = row / RADIX;
            while col < g {
                f *= RADIX;
                col *= RADIX * RADIX;
            }
            g = row * RADIX;
            while col > g {
                f /= RADIX;
                col /= RADIX * RADIX;
            }
            if (col + row) / f < 0.95 * total {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
    (a, d)
}

fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let s = Schur::try_new(m.clone(), f64::EPSILON, 100 * m.nrows().max(10))
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (q, t) = s.unpack();
    Ok((q, t))
}

/// Eigenvalues of a dense complex matrix (balanced Schur form).
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if !is_finite(m) {
        return Err(Error::Invalid("eigenvalues of non-finite matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(vec![]);
    }
    let (b, _) = balance(m);
    let (_, t) = schur(&b)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues together with unit-norm right eigenvectors (as columns).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: CMat,
}

pub fn eig(m: &CMat) -> Result<Eigen> {
    let n = m.nrows();
    if !is_finite(m) {
        return Err(Error::Invalid("eigen-decomposition of non-finite matrix".into()));
    }
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let (b, d) = balance(m);
    let (q, t) = schur(&b)?;
    let tnorm = max_abs(&t).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = c(1.0);
        for i in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[(j, k)];
            }
            let mut den = t[(i, i)] - lam;
            if den.norm() < smin {
                den = c(smin);
            }
            y[(i, k)] = -s / den;
        }
        // keep the back-substitution from overflowing on clustered roots
        let big = (0..=k).map(|i| y[(i, k)].norm()).fold(0.0, f64::max);
        if big > 1e100 {
            for i in 0..=k {
                y[(i, k)] /= c(big);
            }
        }
    }
    let mut v = q * y;
    for j in 0..n {
        for i in 0..n {
            v[(i, j)] *= c(d[i]);
        }
        let nrm = v.column(j).norm();
        if nrm > 0.0 {
            v.column_mut(j).unscale_mut(nrm);
        }
    }
    Ok(Eigen { values: (0..n).map(|i| t[(i, i)]).collect(), vectors: v })
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(m: &CMat) -> Result<f64> {
    let ev = eigenvalues(m)?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// `f(m)` through an eigen-decomposition. Returns `None` when the eigenbasis
/// condition number exceeds `cond_max`.
pub fn matrix_function<F: Fn(C64) -> C64>(m: &CMat, f: F, cond_max: f64) -> Result<Option<CMat>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Some(m.clone()));
    }
    let e = eig(m)?;
    let cond = condition_number(&e.vectors);
    if !(cond < cond_max) {
        return Ok(None);
    }
    let vinv = inverse(&e.vectors)?;
    let mut vf = e.vectors.clone();
    for j in 0..n {
        let fj = f(e.values[j]);
        for i in 0..n {
            vf[(i, j)] *= fj;
        }
    }
    Ok(Some(vf * vinv))
}

/// Row vector times matrix times column vector.
pub fn quad_form(row: &CVec, m: &CMat, col: &CVec) -> C64 {
    (row.transpose() * m * col)[(0, 0)]
}

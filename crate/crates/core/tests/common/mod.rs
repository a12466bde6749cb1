#![allow(dead_code)]

use nalgebra::{dmatrix, dvector};
use rsjd::{DoublePhaseType, Generator, PhaseType, Regime, RegimeModel};

/// Two regimes with double-exponential jumps, drift solved.
pub fn two_regime_de() -> RegimeModel {
    let q = Generator::new(dmatrix![-0.8, 0.8; 1.5, -1.5]).unwrap();
    let mut a = Regime::diffusion(0.0, 0.15, 0.02, 0.01);
    a.lambda = 0.6;
    a.jumps = DoublePhaseType::double_exponential(0.4, 9.0, 6.0).unwrap();
    let mut b = Regime::diffusion(0.0, 0.35, 0.04, 0.0);
    b.lambda = 1.5;
    b.jumps = DoublePhaseType::double_exponential(0.3, 7.0, 4.5).unwrap();
    RegimeModel::new(q, vec![a, b], 0.0, 0).unwrap().solve_drift().unwrap()
}

/// Two regimes with genuinely phase-type tails (hyperexponential up, Coxian down).
pub fn two_regime_ph() -> RegimeModel {
    let q = Generator::new(dmatrix![-1.0, 1.0; 2.0, -2.0]).unwrap();
    let up = PhaseType::hyperexponential(&[0.7, 0.3], &[12.0, 5.0]).unwrap();
    let down = PhaseType::new(dvector![0.8, 0.2], dmatrix![-8.0, 3.0; 0.0, -4.0]).unwrap();
    let mut a = Regime::diffusion(0.0, 0.18, 0.03, 0.01);
    a.lambda = 1.0;
    a.jumps = DoublePhaseType::new(0.45, up.clone(), down.clone()).unwrap();
    let mut b = Regime::diffusion(0.0, 0.3, 0.03, 0.01);
    b.lambda = 2.0;
    b.jumps = DoublePhaseType::new(0.35, up, down).unwrap();
    RegimeModel::new(q, vec![a, b], 0.0, 0).unwrap().solve_drift().unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tail(rng: &mut ChaCha8Rng) -> PhaseType {
    let k = rng.random_range(1..=3usize);
    let mut alpha: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    let mut b = nalgebra::DMatrix::zeros(k, k);
    for i in 0..k {
        let rate = rng.random_range(4.0..25.0);
        b[(i, i)] = -rate;
        let mut left = rate * rng.random_range(0.0..0.7);
        for j in 0..k {
            if j != i && left > 0.0 {
                let v = left * rng.random_range(0.0..1.0);
                b[(i, j)] = v;
                left -= v;
            }
        }
    }
    PhaseType::new(nalgebra::DVector::from_vec(alpha), b).unwrap()
}

/// Random irreducible model with up to `max_regimes` regimes and up to three phases per tail.
pub fn random_model(seed: u64, max_regimes: usize) -> RegimeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = rng.random_range(1..=max_regimes);
    let mut q = nalgebra::DMatrix::zeros(n0, n0);
    for i in 0..n0 {
        for j in 0..n0 {
            if i != j {
                q[(i, j)] = rng.random_range(0.1..2.0);
            }
        }
        let s: f64 = q.row(i).sum();
        q[(i, i)] = -s;
    }
    let regimes = (0..n0)
        .map(|_| {
            let mut r = Regime::diffusion(0.0, rng.random_range(0.08..0.5), rng.random_range(0.0..0.06), rng.random_range(0.0..0.03));
            r.lambda = if rng.random_bool(0.85) { rng.random_range(0.2..3.0) } else { 0.0 };
            let p = match rng.random_range(0..5) {
                0 => 1.0,
                1 => 0.0,
                _ => rng.random_range(0.2..0.8),
            };
            r.jumps = DoublePhaseType::new(p, random_tail(&mut rng), random_tail(&mut rng)).unwrap();
            r
        })
        .collect();
    RegimeModel::new(Generator::new(q).unwrap(), regimes, 0.0, 0).unwrap().solve_drift().unwrap()
}

mod common;

use nalgebra::DMatrix;
use rsjd::fluid::build_embedding;
use rsjd::linalg::{self, c, CMat, C64};
use rsjd::wiener_hopf::{barrier_char_h, factorize, factorize_q, qep_spectral_data, Side};
use rsjd::{DoublePhaseType, Generator, NumericalSettings, PhaseType, Regime, RegimeModel};

fn frozen(regimes: Vec<Regime>) -> RegimeModel {
    let n = regimes.len();
    RegimeModel::new(Generator::new(DMatrix::zeros(n, n)).unwrap(), regimes, 0.0, 0).unwrap()
}

fn omegas(mu: f64, sigma: f64, rate: f64) -> (f64, f64) {
    let a = mu / (sigma * sigma);
    let root = (a * a + 2.0 * rate / (sigma * sigma)).sqrt();
    (-a + root, a + root)
}

fn assert_probabilistic(f: &rsjd::wiener_hopf::WhFactorisation, tol: f64) {
    for (eta, q, top) in [(&f.eta_plus, &f.q_plus, true), (&f.eta_minus, &f.q_minus, false)] {
        let (n, k) = (eta.nrows(), eta.ncols());
        let start = if top { 0 } else { n - k };
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..k {
                let v = eta[(i, j)];
                assert!(v.im.abs() < tol && v.re > -tol && v.re < 1.0 + tol, "eta({i},{j}) = {v}");
                if i >= start && i < start + k {
                    let id = if i - start == j { 1.0 } else { 0.0 };
                    assert!((v.re - id).abs() < tol);
                }
                row += v.re;
            }
            assert!(row <= 1.0 + tol);
        }
        for i in 0..k {
            let mut row = 0.0;
            for j in 0..k {
                let v = q[(i, j)];
                assert!(v.im.abs() < tol);
                if i != j {
                    assert!(v.re > -tol, "Q({i},{j}) = {v}");
                }
                row += v.re;
            }
            assert!(row <= tol);
        }
    }
}

#[test]
fn frozen_brownian_closed_form() {
    let cfg = NumericalSettings::default();
    let regimes = vec![
        Regime::diffusion(0.05, 0.2, 0.03, 0.0),
        Regime::diffusion(-0.1, 0.35, 0.01, 0.0),
        Regime::diffusion(0.0, 0.15, 0.0, 0.0),
    ];
    let m = frozen(regimes.clone());
    let e = build_embedding(&m);
    for q in [C64::new(0.5, 0.0), C64::new(2.0, 0.0), C64::new(10.0, 5.0)] {
        let f = factorize_q(&e, q, &cfg).unwrap();
        for (i, r) in regimes.iter().enumerate() {
            // complex rates: the principal root keeps Re ω > 0
            let s2 = r.sigma * r.sigma;
            let a = r.mu / s2;
            let root = (C64::new(a * a, 0.0) + (q + r.rd) * (2.0 / s2)).sqrt();
            let (wp, wm) = (root - a, root + a);
            assert!((f.q_plus[(i, i)] + wp).norm() < 1e-10 * wp.norm());
            assert!((f.q_minus[(i, i)] + wm).norm() < 1e-10 * wm.norm());
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((f.eta_plus[(i, j)] - id).norm() < 1e-10);
                if i != j {
                    assert!(f.q_plus[(i, j)].norm() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn symmetric_driftless() {
    let cfg = NumericalSettings::default();
    let e = build_embedding(&frozen(vec![Regime::diffusion(0.0, 0.3, 0.0, 0.0)]));
    let f = factorize_q(&e, c(1.7), &cfg).unwrap();
    let w = (2.0f64 * 1.7).sqrt() / 0.3;
    assert!((f.q_plus[(0, 0)].re + w).abs() < 1e-12);
    assert!((f.q_minus[(0, 0)].re + w).abs() < 1e-12);
}

#[test]
fn pencil_root_count() {
    for seed in 0..10 {
        let m = common::random_model(seed, 3);
        let e = build_embedding(&m);
        let h = e.discount_vector(c(0.8)).unwrap();
        let s = qep_spectral_data(&e, &h).unwrap();
        assert_eq!(s.roots.len(), e.n_plus() + e.n_minus());
        assert_eq!(s.stable(1e-9).len(), e.n_plus());
        assert_eq!(s.unstable(1e-9).len(), e.n_minus());
        assert!(s.roots.iter().all(|z| z.re.abs() > 1e-6));
    }
}

/// Laplace exponent κ(θ) = log E e^{θX_1} of a single-regime model with exponential tails.
fn kappa(mu: f64, sigma: f64, lambda: f64, p: f64, up: f64, down: f64, th: f64) -> f64 {
    mu * th + 0.5 * sigma * sigma * th * th + lambda * (p * up / (up - th) + (1.0 - p) * down / (down + th) - 1.0)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (f(mid) > 0.0) == (fa > 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[test]
fn kou_ascending_ladder_exponents() {
    let cfg = NumericalSettings::default();
    let (mu, sigma, lambda, p, up, down, r) = (0.02, 0.25, 1.2, 0.4, 9.0, 6.0, 0.03);
    let mut reg = Regime::diffusion(mu, sigma, r, 0.0);
    reg.lambda = lambda;
    reg.jumps = DoublePhaseType::double_exponential(p, up, down).unwrap();
    let m = frozen(vec![reg]);
    let e = build_embedding(&m);
    let q = 0.7;
    let f = factorize_q(&e, c(q), &cfg).unwrap();
    let g = |th: f64| kappa(mu, sigma, lambda, p, up, down, th) - q - r;
    let b1 = bisect(g, 1e-12, up - 1e-12);
    let b2 = bisect(g, up + 1e-12, 1e3);
    let mut ev: Vec<f64> = linalg::eigenvalues(&f.q_plus).unwrap().iter().map(|z| -z.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - b1).abs() < 1e-9 * b1 && (ev[1] - b2).abs() < 1e-9 * b2, "{ev:?} vs {b1} {b2}");
    let d1 = bisect(|t| g(-t), 1e-12, down - 1e-12);
    let d2 = bisect(|t| g(-t), down + 1e-12, 1e3);
    let mut ev: Vec<f64> = linalg::eigenvalues(&f.q_minus).unwrap().iter().map(|z| -z.re).collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - d1).abs() < 1e-9 * d1 && (ev[1] - d2).abs() < 1e-9 * d2);
}

#[test]
fn random_models_residuals_and_structure() {
    let cfg = NumericalSettings::default();
    for seed in 100..125 {
        let m = common::random_model(seed, 4);
        let e = build_embedding(&m);
        for q in [C64::new(0.5, 0.0), C64::new(2.0, 0.0), C64::new(10.0, 5.0)] {
            let f = factorize_q(&e, q, &cfg).unwrap();
            assert!(f.residuals.0 < 1e-10 && f.residuals.1 < 1e-10, "seed {seed}: {:?}", f.residuals);
            if q.im == 0.0 {
                assert_probabilistic(&f, 1e-8);
            }
            for mat in [&f.q_plus, &f.q_minus] {
                assert!(linalg::spectral_abscissa(mat).unwrap() <= 1e-8);
            }
        }
    }
}

#[test]
fn semigroups_are_substochastic() {
    let cfg = NumericalSettings::default();
    let m = common::random_model(7, 3);
    let e = build_embedding(&m);
    let f = factorize_q(&e, c(1.0), &cfg).unwrap();
    for t in [0.01, 0.3, 2.0, 10.0] {
        for q in [&f.q_plus, &f.q_minus] {
            let p = linalg::expm(&(q * c(t))).unwrap();
            for i in 0..p.nrows() {
                assert!(p.row(i).iter().all(|z| z.re > -1e-10) && p.row(i).iter().map(|z| z.re).sum::<f64>() <= 1.0 + 1e-10);
            }
        }
    }
}

#[test]
fn uniqueness_probe() {
    let cfg = NumericalSettings::default();
    let m = common::random_model(11, 3);
    let e = build_embedding(&m);
    let f = factorize_q(&e, C64::new(1.5, 0.5), &cfg).unwrap();
    let mut g = f.clone();
    let bump = |a: &CMat| a.map(|z| z * (1.0 + 1e-3));
    let np = g.n_plus();
    let nrows = g.dim();
    g.q_plus = bump(&g.q_plus);
    g.q_minus = bump(&g.q_minus);
    // only the free rows of η may move
    for i in np..nrows {
        for j in 0..np {
            g.eta_plus[(i, j)] *= 1.0 + 1e-3;
        }
    }
    let r = g.refine(&e, 8).unwrap();
    assert!(linalg::max_abs(&(&r.q_plus - &f.q_plus)) < 1e-8 * linalg::max_abs(&f.q_plus));
    assert!(linalg::max_abs(&(&r.eta_plus - &f.eta_plus)) < 1e-8);
    assert!(linalg::max_abs(&(&r.q_minus - &f.q_minus)) < 1e-8 * linalg::max_abs(&f.q_minus));
}

#[test]
fn passage_matrix_cases() {
    let cfg = NumericalSettings::default();
    let m = common::random_model(5, 2);
    let e = build_embedding(&m);
    let f = factorize_q(&e, c(1.0), &cfg).unwrap();
    assert_eq!(f.passage_matrix(0.3, 0.3, Side::Up).unwrap(), f.eta_plus);
    let above = f.passage_matrix(0.3, 0.5, Side::Up).unwrap();
    for i in 0..e.dim() {
        for j in 0..e.n_plus() {
            assert_eq!(above[(i, j)], c(if i == j { 1.0 } else { 0.0 }));
        }
    }
    let e1 = build_embedding(&frozen(vec![Regime::diffusion(0.0, 0.2, 0.0, 0.0)]));
    let f1 = factorize_q(&e1, c(0.9), &cfg).unwrap();
    let phi = f1.passage_matrix(0.4, 0.1, Side::Up).unwrap();
    assert!((phi[(0, 0)].re - (-(0.3) * (1.8f64).sqrt() / 0.2).exp()).abs() < 1e-12);
    let phi = f1.passage_matrix(-0.4, 0.1, Side::Down).unwrap();
    assert!((phi[(0, 0)].re - (-(0.5) * (1.8f64).sqrt() / 0.2).exp()).abs() < 1e-12);
}

#[test]
fn brownian_two_sided_exit() {
    let cfg = NumericalSettings::default();
    let (l, u) = (-0.3, 0.25);
    for (mu, sigma, q) in [(0.0, 0.2, 1.3), (0.08, 0.3, 0.6)] {
        let e = build_embedding(&frozen(vec![Regime::diffusion(mu, sigma, 0.0, 0.0)]));
        let f = factorize_q(&e, c(q), &cfg).unwrap();
        let (wp, wm) = omegas(mu, sigma, q);
        for &x in &[-0.29, -0.1, 0.0, 0.2] {
            let (pp, pm) = f.two_sided_matrix(l, u, x).unwrap();
            let up = ((wp * (x - l)).exp() - (-wm * (x - l)).exp()) / ((wp * (u - l)).exp() - (-wm * (u - l)).exp());
            let down = ((wm * (u - x)).exp() - (-wp * (u - x)).exp()) / ((wm * (u - l)).exp() - (-wp * (u - l)).exp());
            assert!((pp[(0, 0)].re - up).abs() < 1e-10, "x={x}: {} vs {up}", pp[(0, 0)].re);
            assert!((pm[(0, 0)].re - down).abs() < 1e-10);
        }
    }
}

#[test]
fn wide_corridor_recovers_one_sided() {
    let cfg = NumericalSettings::default();
    let m = common::random_model(21, 3);
    let e = build_embedding(&m);
    let f = factorize_q(&e, c(2.0), &cfg).unwrap();
    let (pp, _) = f.two_sided_matrix(-40.0, 0.2, 0.0).unwrap();
    let phi = f.passage_matrix(0.2, 0.0, Side::Up).unwrap();
    assert!(linalg::max_abs(&(pp - phi)) < 1e-10);
}

#[test]
fn exit_probabilities_bounded() {
    let cfg = NumericalSettings::default();
    for seed in 30..36 {
        let m = common::random_model(seed, 3);
        let e = build_embedding(&m);
        let f = factorize_q(&e, c(0.4), &cfg).unwrap();
        for &x in &[-0.2, 0.0, 0.15] {
            let (pp, pm) = f.two_sided_matrix(-0.2, 0.15, x).unwrap();
            for i in 0..e.dim() {
                let s: f64 = pp.row(i).iter().chain(pm.row(i).iter()).map(|z| z.re).sum();
                assert!((-1e-10..=1.0 + 1e-10).contains(&s), "{s}");
            }
        }
    }
}

#[test]
fn barrier_h_reductions() {
    let cfg = NumericalSettings::default();
    // no jumps: only the barrier levels appear
    let e = build_embedding(&frozen(vec![Regime::diffusion(0.03, 0.25, 0.0, 0.0)]));
    let f = factorize_q(&e, c(0.8), &cfg).unwrap();
    let (l, u, x) = (-0.2, 0.3, 0.05);
    let (pp, pm) = f.two_sided_matrix(l, u, x).unwrap();
    let arg = C64::new(1.7, 0.4);
    let h = barrier_char_h(&f, &e, l, u, x, arg, 0).unwrap();
    let expect = pp[(0, 0)] * (rsjd::linalg::I * arg * u).exp() + pm[(0, 0)] * (rsjd::linalg::I * arg * l).exp();
    assert!((h[0] - expect).norm() < 1e-13);
    // with jumps, total exit mass at u = 0 is at most one
    let m = common::random_model(4, 3);
    let e = build_embedding(&m);
    let f = factorize_q(&e, c(0.3), &cfg).unwrap();
    let mut total = vec![0.0; m.n_regimes()];
    for j in 0..m.n_regimes() {
        let h = barrier_char_h(&f, &e, -0.1, 0.1, 0.0, c(0.0), j).unwrap();
        for i in 0..m.n_regimes() {
            assert!(h[i].re >= -1e-12);
            total[i] += h[i].re;
        }
    }
    assert!(total.iter().all(|t| *t <= 1.0 + 1e-10));
}

#[test]
fn strip_violation_rejected() {
    let cfg = NumericalSettings::default();
    let mut reg = Regime::diffusion(0.0, 0.2, 0.0, 0.0);
    reg.lambda = 1.0;
    reg.jumps = DoublePhaseType::new(0.5, PhaseType::exponential(5.0).unwrap(), PhaseType::exponential(4.0).unwrap()).unwrap();
    let e = build_embedding(&frozen(vec![reg]));
    let f = factorize_q(&e, c(1.0), &cfg).unwrap();
    assert!(barrier_char_h(&f, &e, -0.1, 0.1, 0.0, C64::new(0.0, -6.0), 0).is_err());
    assert!(barrier_char_h(&f, &e, -0.1, 0.1, 0.0, C64::new(0.0, 4.5), 0).is_err());
    assert!(barrier_char_h(&f, &e, 0.1, -0.1, 0.0, c(0.0), 0).is_err());
    let bad = e.discount_vector(c(1.0)).unwrap().map(|z| -z);
    assert!(factorize(&e, &bad, &cfg).is_err());
}

#[test]
fn perturbation_path_matches_direct() {
    let m = common::random_model(12, 3);
    let e = build_embedding(&m);
    let direct = factorize_q(&e, c(1.0), &NumericalSettings::default()).unwrap();
    let cfg = NumericalSettings { wh_defect_cond: 0.0, ..Default::default() };
    let h = e.discount_vector(c(1.0)).unwrap();
    let forced = factorize(&e, &h, &cfg);
    // every eigenbasis is "too ill-conditioned" here, so the perturbation cannot help either
    assert!(forced.is_err());
    let cfg = NumericalSettings { wh_defect_cond: 1e3, ..Default::default() };
    if let Ok(f) = factorize(&e, &h, &cfg) {
        assert!(linalg::max_abs(&(&f.q_plus - &direct.q_plus)) < 1e-8 * linalg::max_abs(&direct.q_plus));
    }
}

use nalgebra::dmatrix;
use rsjd::european::{
    bs_price, forward_smile_weights, implied_vol, parity_gap, price_european, price_european_many,
    price_forward_start, wing_slopes, OptionKind, VanillaQuote,
};
use rsjd::{DoublePhaseType, Generator, NumericalSettings, Regime, RegimeModel};

fn two_regime() -> RegimeModel {
    let q = Generator::new(dmatrix![-0.8, 0.8; 1.5, -1.5]).unwrap();
    let mut a = Regime::diffusion(0.0, 0.15, 0.02, 0.01);
    a.lambda = 0.6;
    a.jumps = DoublePhaseType::double_exponential(0.4, 9.0, 6.0).unwrap();
    let mut b = Regime::diffusion(0.0, 0.35, 0.04, 0.0);
    b.lambda = 1.5;
    b.jumps = DoublePhaseType::double_exponential(0.3, 7.0, 4.5).unwrap();
    RegimeModel::new(q, vec![a, b], 0.0, 0).unwrap().solve_drift().unwrap()
}

#[test]
fn black_scholes_reduction() {
    let cfg = NumericalSettings::default();
    let (sigma, r, d) = (0.25, 0.03, 0.01);
    let m = RegimeModel::black_scholes(sigma, r, d, 0.0).unwrap();
    let strikes: Vec<f64> = (0..=30).map(|i| 0.5 + 1.5 * i as f64 / 30.0).collect();
    for &t in &[0.25, 1.0, 5.0] {
        for kind in [OptionKind::Call, OptionKind::Put] {
            let prices = price_european_many(&m, kind, &strikes, t, &cfg).unwrap();
            for (k, p) in strikes.iter().zip(prices) {
                let bs = bs_price(kind, 1.0, *k, t, sigma, r, d);
                assert!((p - bs).abs() < 1e-9, "{kind} T={t} K={k}: {p} vs {bs}");
            }
        }
    }
}

#[test]
fn put_call_parity_regime_switching() {
    let cfg = NumericalSettings::default();
    let m = two_regime();
    for &k in &[0.6, 1.0, 1.8] {
        let c = price_european(&m, OptionKind::Call, k, 1.3, &cfg).unwrap();
        let p = price_european(&m, OptionKind::Put, k, 1.3, &cfg).unwrap();
        assert!((c - p - parity_gap(&m, k, 1.3).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn calls_decrease_and_are_convex_in_strike() {
    let cfg = NumericalSettings::default();
    let m = two_regime();
    let strikes: Vec<f64> = (0..60).map(|i| 0.4 + 0.03 * i as f64).collect();
    let c = price_european_many(&m, OptionKind::Call, &strikes, 0.7, &cfg).unwrap();
    for w in c.windows(3) {
        assert!(w[1] <= w[0] + 1e-12);
        assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
    }
}

#[test]
fn tiny_strike_call_is_discounted_forward() {
    let cfg = NumericalSettings::default();
    let m = two_regime();
    let c = price_european(&m, OptionKind::Call, 1e-3, 1.0, &cfg).unwrap();
    let fwd = m.discounted_forward(1.0).unwrap()[0];
    let zcb = m.zcb(1.0).unwrap()[0];
    assert!((c - (fwd - 1e-3 * zcb)).abs() < 1e-8);
}

#[test]
fn forward_start_at_zero_is_vanilla() {
    let cfg = NumericalSettings::default();
    let m = two_regime();
    let fs = price_forward_start(&m, 1.1, 0.0, 1.0, &cfg).unwrap();
    let v = price_european(&m, OptionKind::Call, 1.1, 1.0, &cfg).unwrap();
    assert!((fs - v).abs() < 1e-12);
}

#[test]
fn forward_start_is_homogeneous_in_spot() {
    let cfg = NumericalSettings::default();
    let m = two_regime();
    let a = price_forward_start(&m, 0.95, 0.5, 1.5, &cfg).unwrap();
    let shifted = m.with_start(0.7, 0).unwrap();
    let b = price_forward_start(&shifted, 0.95, 0.5, 1.5, &cfg).unwrap();
    assert!((b - 0.7f64.exp() * a).abs() < 1e-12 * b);
}

#[test]
fn implied_vol_of_black_scholes_model_is_flat() {
    let cfg = NumericalSettings::default();
    let m = RegimeModel::black_scholes(0.3, 0.02, 0.0, 0.0).unwrap();
    for &k in &[0.7, 1.0, 1.4] {
        let p = price_european(&m, OptionKind::Call, k, 2.0, &cfg).unwrap();
        let iv = implied_vol(&m, &VanillaQuote { strike: k, maturity: 2.0, price: p, implied_vol: None }, OptionKind::Call)
            .unwrap();
        assert!((iv - 0.3).abs() < 1e-8);
    }
}

#[test]
fn wing_slopes_of_double_exponential_model() {
    let m = two_regime();
    let w = wing_slopes(&m).unwrap();
    assert!((w.q_plus - 6.0).abs() < 1e-10);
    assert!((w.q_minus - 4.5).abs() < 1e-10);
    let bs = RegimeModel::black_scholes(0.2, 0.0, 0.0, 0.0).unwrap();
    let w = wing_slopes(&bs).unwrap();
    assert_eq!((w.slope_left, w.slope_right), (0.0, 0.0));
}

#[test]
fn reducible_chain_has_no_wing_slopes() {
    let q = Generator::new(dmatrix![-1.0, 1.0; 0.0, 0.0]).unwrap();
    let m = RegimeModel::new(
        q,
        vec![Regime::diffusion(0.0, 0.2, 0.0, 0.0), Regime::diffusion(0.0, 0.3, 0.0, 0.0)],
        0.0,
        0,
    )
    .unwrap();
    assert!(wing_slopes(&m).is_err());
}

#[test]
fn smile_weights_single_regime_and_symmetry() {
    let cfg = NumericalSettings::default();
    let bs = RegimeModel::black_scholes(0.2, 0.0, 0.0, 0.0).unwrap();
    assert_eq!(forward_smile_weights(&bs, 0.1, 1.0, &cfg).unwrap(), vec![1.0]);

    // two regimes with mirrored jumps and zero drift: X and -X have the same law when started symmetrically
    let q = Generator::new(dmatrix![-1.0, 1.0; 1.0, -1.0]).unwrap();
    let mut a = Regime::diffusion(0.0, 0.2, 0.0, 0.0);
    a.lambda = 1.0;
    a.jumps = DoublePhaseType::double_exponential(0.8, 5.0, 5.0).unwrap();
    let mut b = a.clone();
    b.jumps = DoublePhaseType::double_exponential(0.2, 5.0, 5.0).unwrap();
    let m0 = RegimeModel::new(q.clone(), vec![a.clone(), b.clone()], 0.0, 0).unwrap();
    let m1 = RegimeModel::new(q, vec![a, b], 0.0, 1).unwrap();
    for &y in &[0.1, 0.25] {
        let w0 = forward_smile_weights(&m0, y, 1.0, &cfg).unwrap();
        let w1 = forward_smile_weights(&m1, -y, 1.0, &cfg).unwrap();
        assert!((w0[0] - w1[1]).abs() < 1e-9);
        assert!((w0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

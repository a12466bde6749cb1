mod common;

use rsjd::barrier::{price_dnt, BarrierSpec};
use rsjd::european::{bs_price, OptionKind};
use rsjd::mc::{estimate, mean_and_se, simulate, Payoff, SimSpec};
use rsjd::special::norm_cdf;
use rsjd::{NumericalSettings, RegimeModel};

fn ks_normal(samples: &mut [f64], mean: f64, sd: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = norm_cdf((x - mean) / sd);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn brownian_terminal_law() {
    let cfg = NumericalSettings::default();
    let (sigma, t) = (0.3, 1.5);
    let m = RegimeModel::black_scholes(sigma, 0.04, 0.01, 0.0).unwrap();
    let mu = m.regime(0).mu;
    let b = simulate(&m, &SimSpec::new(t), 100_000, 11, &cfg).unwrap();
    let e = mean_and_se(&b.terminal);
    assert!((e.mean - mu * t).abs() < 3.0 * e.se);
    let sq: Vec<f64> = b.terminal.iter().map(|x| (x - mu * t).powi(2)).collect();
    let v = mean_and_se(&sq);
    assert!((v.mean - sigma * sigma * t).abs() < 3.0 * v.se);
    let mut xs = b.terminal.clone();
    assert!(ks_normal(&mut xs, mu * t, sigma * t.sqrt()) < 0.01);
    // realised variance is exact without jumps
    assert!(b.qv.iter().all(|q| (q - sigma * sigma * t).abs() < 1e-12));
}

#[test]
fn jump_counts_match_occupation() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_ph();
    let mut spec = SimSpec::new(2.0);
    spec.occupation = true;
    let b = simulate(&m, &spec, 50_000, 3, &cfg).unwrap();
    let (occ, jumps) = (b.occupation.as_ref().unwrap(), b.jumps.as_ref().unwrap());
    for i in 0..2 {
        let lam = m.regime(i).lambda;
        let d: Vec<f64> = (0..b.len()).map(|p| jumps[2 * p + i] as f64 - lam * occ[2 * p + i]).collect();
        let e = mean_and_se(&d);
        assert!(e.mean.abs() < 3.0 * e.se, "regime {i}: {e:?}");
    }
    let total: Vec<f64> = (0..b.len()).map(|p| occ[2 * p] + occ[2 * p + 1]).collect();
    assert!(total.iter().all(|t| (t - 2.0).abs() < 1e-12));
}

#[test]
fn fixed_seed_is_reproducible() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_de();
    let spec = SimSpec::new(1.0).with_barriers(-0.3, 0.3);
    let a = simulate(&m, &spec, 2000, 7, &cfg).unwrap();
    let b = simulate(&m, &spec, 2000, 7, &cfg).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    let c = simulate(&m, &spec, 2000, 8, &cfg).unwrap();
    assert_ne!(a.terminal, c.terminal);
}

#[test]
fn vanilla_matches_black_scholes() {
    let cfg = NumericalSettings::default();
    let (sigma, r, d, t) = (0.25, 0.03, 0.01, 1.0);
    let m = RegimeModel::black_scholes(sigma, r, d, 0.0).unwrap();
    let b = simulate(&m, &SimSpec::new(t), 100_000, 5, &cfg).unwrap();
    for (kind, k) in [(OptionKind::Call, 1.1), (OptionKind::Put, 0.9)] {
        let e = estimate(&b, Payoff::Vanilla { kind, strike: k }).unwrap();
        assert!(e.z_score(bs_price(kind, 1.0, k, t, sigma, r, d)).abs() < 3.0);
    }
    let zcb = estimate(&b, Payoff::Zcb).unwrap();
    assert_eq!(estimate(&b, Payoff::CharRe { u: 0.0 }).unwrap(), zcb);
    assert!((zcb.mean - (-r * t).exp()).abs() < 1e-14);
    let vs = estimate(&b, Payoff::VarSwap).unwrap();
    assert!((vs.mean - sigma * sigma * (-r * t).exp()).abs() < 1e-12);
}

#[test]
fn forward_start_at_zero_is_vanilla() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_de();
    let mut spec = SimSpec::new(1.0);
    spec.observe = Some(0.0);
    let b = simulate(&m, &spec, 5000, 1, &cfg).unwrap();
    let f = estimate(&b, Payoff::ForwardStart { strike: 1.05 }).unwrap();
    let v = estimate(&b, Payoff::Vanilla { kind: OptionKind::Call, strike: 1.05 }).unwrap();
    assert!((f.mean - v.mean).abs() < 1e-15);
    assert!(estimate(&simulate(&m, &SimSpec::new(1.0), 10, 1, &cfg).unwrap(), Payoff::ForwardStart { strike: 1.0 }).is_err());
}

#[test]
fn dnt_indicator_and_bridge_correction() {
    let cfg = NumericalSettings::default();
    let (sigma, t) = (0.3, 1.0);
    let m = RegimeModel::black_scholes(sigma, 0.02, 0.0, 0.0).unwrap();
    let (l, u) = (-0.25, 0.3);
    let exact = price_dnt(&m, BarrierSpec::new(l, u).unwrap(), t, &cfg).unwrap().price;
    let spec = SimSpec::new(t).with_barriers(l, u);
    let b = simulate(&m, &spec, 100_000, 21, &cfg).unwrap();
    let e = estimate(&b, Payoff::Dnt).unwrap();
    assert!(e.mean >= 0.0 && e.mean <= 1.0);
    assert!(e.z_score(exact).abs() < 3.0, "{e:?} vs {exact}");
    let r = estimate(&b, Payoff::Rebate { amount: 1.0 }).unwrap();
    assert!(r.mean > 0.0 && r.mean + e.mean <= 1.0);
    // negative control: coarse discrete monitoring overstates survival
    let mut coarse = spec.clone();
    coarse.bridge = false;
    coarse.max_step = Some(0.1);
    let c = estimate(&simulate(&m, &coarse, 100_000, 21, &cfg).unwrap(), Payoff::Dnt).unwrap();
    assert!(c.z_score(exact) < -3.0, "discrete monitoring should be biased: {c:?} vs {exact}");
}

#[test]
fn bridge_hit_times_follow_passage_law() {
    let cfg = NumericalSettings::default();
    let sigma: f64 = 0.4;
    let q = rsjd::Generator::new(nalgebra::DMatrix::zeros(1, 1)).unwrap();
    let m = RegimeModel::new(q, vec![rsjd::Regime::diffusion(0.0, sigma, 0.0, 0.0)], 0.0, 0).unwrap();
    let b_level = 0.2;
    let spec = SimSpec::new(1.0).with_barriers(f64::NEG_INFINITY, b_level);
    let batch = simulate(&m, &spec, 50_000, 4, &cfg).unwrap();
    // P(τ ≤ s) = 2Φ(−b/(σ√s)) for driftless Brownian motion
    for s in [0.1, 0.3, 0.6, 1.0] {
        let ind: Vec<f64> = batch.hit_time.iter().map(|h| if *h <= s { 1.0 } else { 0.0 }).collect();
        let e = mean_and_se(&ind);
        let exact = 2.0 * norm_cdf(-b_level / (sigma * s.sqrt()));
        assert!(e.z_score(exact).abs() < 3.5, "s={s}: {e:?} vs {exact}");
    }
}

#[test]
fn rejects_bad_specs() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_de();
    assert!(simulate(&m, &SimSpec::new(1.0), 0, 1, &cfg).is_err());
    assert!(simulate(&m, &SimSpec::new(-1.0), 10, 1, &cfg).is_err());
    assert!(simulate(&m, &SimSpec::new(1.0).with_barriers(0.1, 0.2), 10, 1, &cfg).is_err());
    let plain = simulate(&m, &SimSpec::new(1.0), 10, 1, &cfg).unwrap();
    assert!(plain.hit_time.iter().all(|h| h.is_nan()));
}

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsjd::european::OptionKind;
use rsjd::fluid::build_embedding;
use rsjd::mc::{estimate, simulate, Payoff, SimSpec};
use rsjd::wiener_hopf::supremum_tail;
use rsjd::{NumericalSettings, PhaseType};

#[test]
fn residual_life_matches_conditioned_samples() {
    let d = PhaseType::new(
        nalgebra::dvector![0.6, 0.4],
        nalgebra::dmatrix![-3.0, 2.0; 0.5, -1.0],
    )
    .unwrap();
    let s = 0.8;
    let res = d.residual_after(s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut excess: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).filter(|&t| t > s).map(|t| t - s).collect();
    excess.sort_by(f64::total_cmp);
    let n = excess.len() as f64;
    let ks = excess
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = res.cdf(x).unwrap();
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value.
    assert!(ks < 1.63 / n.sqrt(), "ks {ks}, n {n}");
}

#[test]
fn supremum_tail_matches_simulation() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_ph();
    let emb = build_embedding(&m);
    for (q, a) in [(1.0, 0.1), (2.0, 0.25), (0.5, 0.4)] {
        let exact = supremum_tail(&emb, q, &[a], false, &cfg).unwrap()[0][m.z0()];
        let horizon = 30.0 / q;
        let spec = SimSpec::new(horizon).with_barriers(f64::NEG_INFINITY, m.x0() + a);
        let b = simulate(&m, &spec, 40_000, 3, &cfg).unwrap();
        let e = estimate(&b, Payoff::Passage { q, discounted: false }).unwrap();
        let z = e.z_score(exact);
        assert!(z.abs() < 3.0, "q {q} a {a}: {exact} vs {} ± {} (z {z})", e.mean, e.se);
    }
}

#[test]
fn discounted_supremum_tail_matches_simulation() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_de();
    let emb = build_embedding(&m);
    let (q, a) = (1.0, 0.2);
    let exact = supremum_tail(&emb, q, &[a], true, &cfg).unwrap()[0][m.z0()];
    let spec = SimSpec::new(30.0).with_barriers(f64::NEG_INFINITY, m.x0() + a);
    let b = simulate(&m, &spec, 40_000, 5, &cfg).unwrap();
    let e = estimate(&b, Payoff::Passage { q, discounted: true }).unwrap();
    assert!(e.z_score(exact).abs() < 3.0, "{exact} vs {} ± {}", e.mean, e.se);
}

#[test]
fn discounted_forward_matches_simulation() {
    let cfg = NumericalSettings::default();
    let m = common::two_regime_de();
    let t = 1.5;
    let exact = m.discounted_forward(t).unwrap()[m.z0()];
    let b = simulate(&m, &SimSpec::new(t), 100_000, 9, &cfg).unwrap();
    let e = estimate(&b, Payoff::Vanilla { kind: OptionKind::Call, strike: 0.0 }).unwrap();
    assert!(e.z_score(exact).abs() < 3.0, "{exact} vs {} ± {}", e.mean, e.se);
    let zcb = m.zcb(t).unwrap()[m.z0()];
    let e = estimate(&b, Payoff::Zcb).unwrap();
    assert!(e.z_score(zcb).abs() < 3.0);
}

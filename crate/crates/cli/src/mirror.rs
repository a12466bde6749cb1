use rsjd::european::OptionKind;
use rsjd::fluid::build_embedding;
use rsjd::mc::{estimate, mean_and_se, simulate, Estimate, PathBatch, Payoff, SimSpec};
use rsjd::wiener_hopf::supremum_tail;
use rsjd::{NumericalSettings, RegimeModel};

use crate::args::{McArgs, McTarget, Pricing, WhdumpArgs};
use crate::commands::{analytic, corridor, keys, load, methods, parse_q};
use crate::{num, CliError, Table};

pub(crate) fn run(a: &McArgs) -> Result<Table, CliError> {
    if a.paths < 2 {
        return Err(CliError::Input("--paths must be at least 2".into()));
    }
    if !(a.window > 0.0) {
        return Err(CliError::Input("--window must be positive".into()));
    }
    match &a.what {
        McTarget::Price(p) => pricing(p, a),
        McTarget::Whdump(w) => passage(w, a),
    }
}

fn header(keys: &[&str], name: &str, check: bool) -> Vec<String> {
    let mut h: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
    h.extend([format!("mc_{name}"), "mc_se".into(), "paths".into(), "seed".into()]);
    if check {
        h.extend([name.to_string(), "z".into()]);
    }
    h
}

fn z_score(exact: f64, e: &Estimate) -> f64 {
    if e.se > 0.0 {
        e.z_score(exact)
    } else if exact == e.mean {
        0.0
    } else {
        f64::INFINITY.copysign(exact - e.mean)
    }
}

fn row(mut keys: Vec<String>, e: &Estimate, a: &McArgs, exact: Option<f64>) -> Vec<String> {
    keys.extend([num(e.mean), num(e.se), e.n.to_string(), a.seed.to_string()]);
    if let Some(v) = exact {
        keys.extend([num(v), num(z_score(v, e))]);
    }
    keys
}

fn pricing(p: &Pricing, a: &McArgs) -> Result<Table, CliError> {
    let (m, cfg) = load(p.model_args())?;
    let k = keys(p, &m);
    let est = estimates(p, &m, &cfg, a)?;
    let exact = if a.check { Some(analytic(p, &m, &cfg)?) } else { None };
    let name = exact.as_ref().map_or_else(|| value_name(p), |v| v.name);
    let mut t = Table::new(header(&k.names, name, a.check));
    for (i, (keys, e)) in k.rows.into_iter().zip(&est).enumerate() {
        t.push(row(keys, e, a, exact.as_ref().map(|v| v.values[i])));
    }
    Ok(t)
}

fn value_name(p: &Pricing) -> &'static str {
    match p {
        Pricing::Varswap { .. } | Pricing::Volswap { .. } => "rate",
        Pricing::Dkoc { .. } => "knock_out",
        Pricing::Density { .. } => "density",
        _ => "price",
    }
}

fn sim(m: &RegimeModel, spec: &SimSpec, a: &McArgs, cfg: &NumericalSettings) -> Result<PathBatch, CliError> {
    Ok(simulate(m, spec, a.paths, a.seed, cfg)?)
}

/// Estimates aligned with the key rows of the analytic subcommand.
fn estimates(p: &Pricing, m: &RegimeModel, cfg: &NumericalSettings, a: &McArgs) -> Result<Vec<Estimate>, CliError> {
    let each = |b: &PathBatch, payoffs: Vec<Payoff>| -> Result<Vec<Estimate>, CliError> {
        payoffs.into_iter().map(|pf| estimate(b, pf).map_err(CliError::from)).collect()
    };
    match p {
        Pricing::Vanilla { strike, maturity, kind, .. } => {
            let b = sim(m, &SimSpec::new(*maturity), a, cfg)?;
            let kind = OptionKind::from(*kind);
            each(&b, strike.iter().map(|k| Payoff::Vanilla { kind, strike: *k }).collect())
        }
        Pricing::Fwdstart { kappa, t1, t2, .. } => {
            let mut spec = SimSpec::new(*t2);
            spec.observe = Some(*t1);
            let b = sim(m, &spec, a, cfg)?;
            each(&b, kappa.iter().map(|k| Payoff::ForwardStart { strike: *k }).collect())
        }
        Pricing::Smile { y, t1, t2, kappa, .. } => {
            let mut spec = SimSpec::new(*t2);
            spec.observe = Some(*t1);
            let b = sim(m, &spec, a, cfg)?;
            let (obs, obs_disc) = (b.observed.as_ref().expect("observed"), b.observed_discount.as_ref().expect("observed"));
            let near: Vec<usize> = (0..b.len()).filter(|&i| (obs[i] - y).abs() < 0.5 * a.window).collect();
            if near.len() < 2 {
                return Err(CliError::Numerical(format!("fewer than two paths within {} of y = {y} at t1", 0.5 * a.window)));
            }
            Ok(kappa
                .iter()
                .map(|k| {
                    let v: Vec<f64> = near
                        .iter()
                        .map(|&i| {
                            let growth = (b.terminal[i] - obs[i]).exp();
                            (obs_disc[i] - b.discount[i]).exp() * (growth - k).max(0.0) * y.exp()
                        })
                        .collect();
                    mean_and_se(&v)
                })
                .collect())
        }
        Pricing::Varswap { maturity, method, .. } => {
            let b = sim(m, &SimSpec::new(*maturity), a, cfg)?;
            let e = estimate(&b, Payoff::VarSwap)?;
            Ok(vec![e; methods(*method).len()])
        }
        Pricing::Volswap { maturity, .. } => {
            let b = sim(m, &SimSpec::new(*maturity), a, cfg)?;
            each(&b, vec![Payoff::VolSwap])
        }
        Pricing::Dnt { lower, upper, maturity, .. } => {
            let c = corridor(*lower, *upper)?;
            let b = sim(m, &SimSpec::new(*maturity).with_barriers(c.lower, c.upper), a, cfg)?;
            each(&b, vec![Payoff::Dnt])
        }
        Pricing::Rebate { lower, upper, maturity, amount, .. } => {
            let c = corridor(*lower, *upper)?;
            let b = sim(m, &SimSpec::new(*maturity).with_barriers(c.lower, c.upper), a, cfg)?;
            each(&b, vec![Payoff::Rebate { amount: *amount }])
        }
        Pricing::Dkoc { lower, upper, strike, maturity, kind, .. } => {
            let c = corridor(*lower, *upper)?;
            let b = sim(m, &SimSpec::new(*maturity).with_barriers(c.lower, c.upper), a, cfg)?;
            let kind = OptionKind::from(*kind);
            each(&b, strike.iter().map(|k| Payoff::KnockOut { kind, strike: *k }).collect())
        }
        Pricing::Density { maturity, y, .. } => {
            let b = sim(m, &SimSpec::new(*maturity), a, cfg)?;
            let w = a.window;
            let mut out = Vec::new();
            for &yv in y {
                let inside: Vec<bool> = b.terminal.iter().map(|x| (x - yv).abs() < 0.5 * w).collect();
                let hist = |j: Option<usize>| {
                    let v: Vec<f64> = (0..b.len())
                        .map(|i| if inside[i] && j.is_none_or(|j| b.regimes[i] == j) { 1.0 / w } else { 0.0 })
                        .collect();
                    mean_and_se(&v)
                };
                out.push(hist(None));
                out.extend((0..m.n_regimes()).map(|j| hist(Some(j))));
            }
            Ok(out)
        }
    }
}

fn passage(w: &WhdumpArgs, a: &McArgs) -> Result<Table, CliError> {
    let (m, cfg) = load(&w.model)?;
    let q = parse_q(&w.q)?;
    if q.im != 0.0 || !(q.re > 0.0) {
        return Err(CliError::Input("mc whdump needs a positive real q".into()));
    }
    if w.level.is_empty() {
        return Err(CliError::Input("mc whdump needs at least one --level".into()));
    }
    let exact = if a.check { Some(supremum_tail(&build_embedding(&m), q.re, &w.level, false, &cfg)?) } else { None };
    let mut t = Table::new(header(&["block", "i", "j", "level"], "re", a.check));
    for (n, &lvl) in w.level.iter().enumerate() {
        if !(lvl > 0.0) {
            return Err(CliError::Input(format!("passage level must be positive, got {lvl}")));
        }
        // e^{-30} of the exponential clock lies beyond the horizon
        let spec = SimSpec::new(30.0 / q.re).with_barriers(f64::NEG_INFINITY, m.x0() + lvl);
        let b = sim(&m, &spec, a, &cfg)?;
        let e = estimate(&b, Payoff::Passage { q: q.re, discounted: false })?;
        let keys = vec!["passage".into(), m.z0().to_string(), String::new(), num(lvl)];
        t.push(row(keys, &e, a, exact.as_ref().map(|x| x[n][m.z0()])));
    }
    Ok(t)
}

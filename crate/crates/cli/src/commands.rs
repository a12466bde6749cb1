use num_complex::Complex64;
use rsjd::approximation::{convergence_report, Cir, Flavor, GridOptions, JumpDiffusion, SvTarget};
use rsjd::barrier::{price_dko_many, price_dnt, price_rebate, BarrierSpec};
use rsjd::european::{forward_smile, implied_vol, price_european_many, price_forward_start, OptionKind, VanillaQuote};
use rsjd::fluid::build_embedding;
use rsjd::vol_derivatives::{var_swap_rate, vol_swap_rate, VarSwapMethod};
use rsjd::wiener_hopf::{factorize_q, supremum_tail};
use rsjd::{DoublePhaseType, NumericalSettings, RegimeModel};

use crate::args::{ApproxCommand, Command, FlavorArg, Method, ModelArgs, Pricing, TargetArgs, WhdumpArgs};
use crate::{load_settings, mirror, num, parse_model_file, write_model, CliError, Table};

pub(crate) fn dispatch(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Price(p) => {
            let (m, cfg) = load(p.model_args())?;
            Ok(analytic_table(&p, &m, &cfg)?.to_csv())
        }
        Command::Whdump(a) => whdump(&a).map(|t| t.to_csv()),
        Command::Approx(a) => approx(a),
        Command::Mc(a) => mirror::run(&a).map(|t| t.to_csv()),
    }
}

pub(crate) fn load(a: &ModelArgs) -> Result<(RegimeModel, NumericalSettings), CliError> {
    let cfg = load_settings(a.settings.as_deref(), &a.set)?;
    let m = parse_model_file(&a.model)?;
    Ok((m, cfg))
}

pub(crate) fn corridor(lower: f64, upper: f64) -> Result<BarrierSpec, CliError> {
    Ok(BarrierSpec::from_prices(lower, upper)?)
}

pub(crate) fn methods(m: Method) -> Vec<VarSwapMethod> {
    match m {
        Method::Quadrature => vec![VarSwapMethod::Quadrature],
        Method::Fd => vec![VarSwapMethod::FiniteDifference],
        Method::Laplace => vec![VarSwapMethod::Laplace],
        Method::All => vec![VarSwapMethod::Quadrature, VarSwapMethod::FiniteDifference, VarSwapMethod::Laplace],
    }
}

/// Identifying columns shared by an analytic subcommand and its Monte-Carlo mirror.
pub(crate) struct Keys {
    pub names: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub(crate) fn keys(p: &Pricing, m: &RegimeModel) -> Keys {
    let (names, rows): (Vec<&'static str>, Vec<Vec<String>>) = match p {
        Pricing::Vanilla { strike, maturity, kind, .. } => (
            vec!["kind", "strike", "maturity"],
            strike.iter().map(|k| vec![OptionKind::from(*kind).to_string(), num(*k), num(*maturity)]).collect(),
        ),
        Pricing::Fwdstart { kappa, t1, t2, .. } => {
            (vec!["kappa", "t1", "t2"], kappa.iter().map(|k| vec![num(*k), num(*t1), num(*t2)]).collect())
        }
        Pricing::Smile { y, t1, t2, kappa, .. } => (
            vec!["y", "t1", "t2", "kappa"],
            kappa.iter().map(|k| vec![num(*y), num(*t1), num(*t2), num(*k)]).collect(),
        ),
        Pricing::Varswap { maturity, method, .. } => (
            vec!["maturity", "method"],
            methods(*method).iter().map(|mt| vec![num(*maturity), mt.to_string()]).collect(),
        ),
        Pricing::Volswap { maturity, .. } => (vec!["maturity"], vec![vec![num(*maturity)]]),
        Pricing::Dnt { lower, upper, maturity, .. } | Pricing::Rebate { lower, upper, maturity, .. } => {
            (vec!["lower", "upper", "maturity"], vec![vec![num(*lower), num(*upper), num(*maturity)]])
        }
        Pricing::Dkoc { lower, upper, strike, maturity, kind, .. } => (
            vec!["kind", "lower", "upper", "strike", "maturity"],
            strike
                .iter()
                .map(|k| vec![OptionKind::from(*kind).to_string(), num(*lower), num(*upper), num(*k), num(*maturity)])
                .collect(),
        ),
        Pricing::Density { maturity, y, .. } => {
            let mut rows = Vec::new();
            for v in y {
                rows.push(vec![num(*maturity), num(*v), "all".to_string()]);
                for j in 0..m.n_regimes() {
                    rows.push(vec![num(*maturity), num(*v), j.to_string()]);
                }
            }
            (vec!["maturity", "y", "regime"], rows)
        }
    };
    Keys { names, rows }
}

/// Analytic values aligned with [`keys`], plus command-specific extra columns.
pub(crate) struct Values {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub extra_names: Vec<String>,
    pub extras: Vec<Vec<String>>,
}

impl Values {
    fn plain(name: &'static str, values: Vec<f64>) -> Self {
        let n = values.len();
        Values { name, values, extra_names: Vec::new(), extras: vec![Vec::new(); n] }
    }
}

pub(crate) fn analytic(p: &Pricing, m: &RegimeModel, cfg: &NumericalSettings) -> Result<Values, CliError> {
    Ok(match p {
        Pricing::Vanilla { strike, maturity, kind, .. } => {
            let kind = OptionKind::from(*kind);
            let prices = price_european_many(m, kind, strike, *maturity, cfg)?;
            let extras = strike
                .iter()
                .zip(&prices)
                .map(|(k, price)| {
                    let q = VanillaQuote { strike: *k, maturity: *maturity, price: *price, implied_vol: None };
                    vec![implied_vol(m, &q, kind).map(num).unwrap_or_default()]
                })
                .collect();
            Values { name: "price", values: prices, extra_names: vec!["implied_vol".into()], extras }
        }
        Pricing::Fwdstart { kappa, t1, t2, .. } => Values::plain(
            "price",
            kappa.iter().map(|k| price_forward_start(m, *k, *t1, *t2, cfg)).collect::<Result<_, _>>()?,
        ),
        Pricing::Smile { y, t1, t2, kappa, .. } => {
            let s = forward_smile(m, *y, *t1, *t2, kappa, cfg)?;
            let mut extra_names = vec!["implied_vol".to_string()];
            extra_names.extend((0..m.n_regimes()).map(|j| format!("weight_{j}")));
            let extras = s
                .implied_vols
                .iter()
                .map(|v| {
                    let mut row = vec![v.map(num).unwrap_or_default()];
                    row.extend(s.weights.iter().map(|w| num(*w)));
                    row
                })
                .collect();
            Values { name: "price", values: s.prices, extra_names, extras }
        }
        Pricing::Varswap { maturity, method, .. } => Values::plain(
            "rate",
            methods(*method).into_iter().map(|mt| var_swap_rate(m, *maturity, mt, cfg)).collect::<Result<_, _>>()?,
        ),
        Pricing::Volswap { maturity, .. } => {
            let v = vol_swap_rate(m, *maturity, cfg)?;
            Values {
                name: "rate",
                values: vec![v.rate],
                extra_names: vec!["cutoff".into(), "tail".into(), "quadrature_error".into()],
                extras: vec![vec![num(v.cutoff), num(v.tail), num(v.quadrature_error)]],
            }
        }
        Pricing::Dnt { lower, upper, maturity, .. } => {
            let r = price_dnt(m, corridor(*lower, *upper)?, *maturity, cfg)?;
            Values { name: "price", values: vec![r.price], extra_names: vec!["error".into()], extras: vec![vec![num(r.error)]] }
        }
        Pricing::Rebate { lower, upper, maturity, amount, .. } => {
            let r = price_rebate(m, corridor(*lower, *upper)?, *maturity, *amount, cfg)?;
            Values { name: "price", values: vec![r.price], extra_names: vec!["error".into()], extras: vec![vec![num(r.error)]] }
        }
        Pricing::Dkoc { lower, upper, strike, maturity, kind, .. } => {
            let r = price_dko_many(m, corridor(*lower, *upper)?, strike, *maturity, OptionKind::from(*kind), cfg)?;
            Values {
                name: "knock_out",
                values: r.iter().map(|p| p.knock_out).collect(),
                extra_names: vec!["knock_in".into(), "vanilla".into(), "error".into()],
                extras: r.iter().map(|p| vec![num(p.knock_in), num(p.vanilla), num(p.error)]).collect(),
            }
        }
        Pricing::Density { maturity, y, .. } => {
            let pts = m.joint_density(*maturity, y, cfg)?;
            let mut values = Vec::new();
            let mut extras = Vec::new();
            for p in pts {
                values.push(p.total);
                values.extend(&p.per_regime);
                extras.extend(std::iter::repeat_n(vec![num(p.error_bound)], p.per_regime.len() + 1));
            }
            Values { name: "density", values, extra_names: vec!["error_bound".into()], extras }
        }
    })
}

fn analytic_table(p: &Pricing, m: &RegimeModel, cfg: &NumericalSettings) -> Result<Table, CliError> {
    let k = keys(p, m);
    let v = analytic(p, m, cfg)?;
    let mut header: Vec<String> = k.names.iter().map(|s| s.to_string()).collect();
    header.push(v.name.to_string());
    header.extend(v.extra_names.iter().cloned());
    let mut t = Table::new(header);
    for ((row, value), extra) in k.rows.into_iter().zip(v.values).zip(v.extras) {
        let mut r = row;
        r.push(num(value));
        r.extend(extra);
        t.push(r);
    }
    Ok(t)
}

pub(crate) fn parse_q(s: &str) -> Result<Complex64, CliError> {
    s.trim().parse::<Complex64>().map_err(|_| CliError::Input(format!("cannot parse q '{s}' as a real or complex number")))
}

fn whdump(a: &WhdumpArgs) -> Result<Table, CliError> {
    let (m, cfg) = load(&a.model)?;
    let q = parse_q(&a.q)?;
    let emb = build_embedding(&m);
    let f = factorize_q(&emb, q, &cfg)?;
    let mut t = Table::new(["block", "i", "j", "level", "re", "im"]);
    for (name, mat) in [("eta_plus", &f.eta_plus), ("q_plus", &f.q_plus), ("eta_minus", &f.eta_minus), ("q_minus", &f.q_minus)] {
        for i in 0..mat.nrows() {
            for j in 0..mat.ncols() {
                let z = mat[(i, j)];
                t.push(vec![name.into(), i.to_string(), j.to_string(), String::new(), num(z.re), num(z.im)]);
            }
        }
    }
    for (name, r) in [("residual_plus", f.residuals.0), ("residual_minus", f.residuals.1)] {
        t.push(vec![name.into(), String::new(), String::new(), String::new(), num(r), "0".into()]);
    }
    if !a.level.is_empty() {
        if q.im != 0.0 {
            return Err(CliError::Input("passage probabilities need a real q".into()));
        }
        let tails = supremum_tail(&emb, q.re, &a.level, false, &cfg)?;
        for (lvl, per) in a.level.iter().zip(tails) {
            for (i, p) in per.iter().enumerate() {
                t.push(vec!["passage".into(), i.to_string(), String::new(), num(*lvl), num(*p), "0".into()]);
            }
        }
    }
    Ok(t)
}

fn sv_target(a: &TargetArgs) -> Result<SvTarget, CliError> {
    let variance = Cir::new(a.kappa, a.theta, a.eps, a.v0.unwrap_or(a.theta))?;
    let base = match &a.base {
        Some(path) => {
            let m = parse_model_file(path)?;
            let r = m.regime(0);
            JumpDiffusion { sigma: r.sigma, lambda: r.lambda, jumps: r.jumps.clone() }
        }
        None => {
            let jumps = if a.lambda > 0.0 {
                let (Some(up), Some(down)) = (a.eta_plus, a.eta_minus) else {
                    return Err(CliError::Input("--lambda > 0 needs --eta-plus and --eta-minus (or --base)".into()));
                };
                DoublePhaseType::double_exponential(a.p, up, down)?
            } else {
                DoublePhaseType::double_exponential(0.5, 1.0, 1.0)?
            };
            JumpDiffusion { sigma: a.sigma, lambda: a.lambda, jumps }
        }
    };
    let flavor = match a.flavor {
        FlavorArg::Int => Flavor::Int,
        FlavorArg::Tc => Flavor::Tc,
    };
    let grid = GridOptions { v_min: a.v_min, v_max: a.v_max, ..GridOptions::default() };
    Ok(SvTarget { variance, base, flavor, rd: a.rd, rf: a.rf, grid })
}

fn approx(cmd: ApproxCommand) -> Result<String, CliError> {
    match cmd {
        ApproxCommand::Build { target, levels } => {
            let sv = sv_target(&target)?;
            let m = sv.model(levels)?;
            let m = m.with_start(target.x0, m.z0())?;
            let mut out = write_model(&m);
            out.push('\n');
            Ok(out)
        }
        ApproxCommand::Report { target, levels, strike, maturity, kind, settings, set } => {
            let cfg = load_settings(settings.as_deref(), &set)?;
            let sv = sv_target(&target)?;
            let kind = OptionKind::from(kind);
            let report = convergence_report(
                |n| {
                    let m = sv.model(n)?;
                    m.with_start(target.x0, m.z0())
                },
                &levels,
                |m| price_european_many(m, kind, &strike, maturity, &cfg),
            )?;
            let mut t = Table::new(["levels", "kind", "strike", "maturity", "price", "diff"]);
            for row in &report.rows {
                for (i, k) in strike.iter().enumerate() {
                    let diff = row.diffs.as_ref().map(|d| num(d[i])).unwrap_or_default();
                    t.push(vec![row.levels.to_string(), kind.to_string(), num(*k), num(maturity), num(row.prices[i]), diff]);
                }
            }
            Ok(t.to_csv())
        }
    }
}

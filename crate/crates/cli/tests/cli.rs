use std::path::{Path, PathBuf};
use std::process::Command;

use rsjd::european::{bs_price, OptionKind};
use rsjd_cli::{parse_model, parse_model_file, write_model, ModelFile};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn rsjd(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rsjd")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn csv(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = rows[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn golden_files_load() {
    let m = parse_model_file(&data("black_scholes.json")).unwrap();
    assert_eq!(m.n_regimes(), 1);
    assert_eq!(m.regime(0).mu, 0.0);
    assert!(m.check_martingale().passed);
    let m = parse_model(&std::fs::read_to_string(data("two_regime.json")).unwrap()).unwrap();
    assert!(m.check_martingale().passed, "missing mu means the drift is solved");
}

#[test]
fn zero_sigma_rejected() {
    let text = std::fs::read_to_string(data("two_regime.json")).unwrap().replace("\"sigma\": 0.3", "\"sigma\": 0.0");
    let err = parse_model(&text).unwrap_err();
    assert!(err.to_string().contains("sigma must be strictly positive"), "{err}");
    assert!(err.to_string().contains("regime 1"));
}

#[test]
fn write_then_read_is_identity() {
    for name in ["black_scholes.json", "two_regime.json"] {
        let m = parse_model_file(&data(name)).unwrap();
        let text = write_model(&m);
        let back = parse_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_model(&back), text);
    }
}

#[test]
fn malformed_files_name_the_problem() {
    let good: ModelFile = serde_json::from_str(&std::fs::read_to_string(data("two_regime.json")).unwrap()).unwrap();
    let mut f = good.clone();
    f.schema = 2;
    assert!(f.to_model().unwrap_err().to_string().contains("schema"));
    let mut f = good.clone();
    f.q[0][1] = 0.5;
    assert!(f.to_model().unwrap_err().to_string().contains("row 0"));
    let mut f = good.clone();
    f.regimes[0].mu = Some(0.1);
    assert!(f.to_model().unwrap_err().to_string().contains("every regime or for none"));
    let mut f = good;
    f.regimes[1].b_plus = vec![vec![-9.0, 0.0]];
    assert!(f.to_model().unwrap_err().to_string().contains("regime 1 b_plus"));
    assert!(parse_model("{\"schema\": 1, \"n0\": 1}").is_err());
    assert!(parse_model("{\"schema\": 1, \"n0\": 1, \"q\": [[0]], \"regimes\": [], \"x0\": 0, \"z0\": 0, \"extra\": 1}").is_err());
}

#[test]
fn vanilla_prints_one_row() {
    let model = data("black_scholes.json");
    let (code, out, _) = rsjd(&["vanilla", "--model", model.to_str().unwrap(), "--strike", "1", "--maturity", "1"]);
    assert_eq!(code, 0);
    let rows = csv(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], ["kind", "strike", "maturity", "price", "implied_vol"]);
    let p = column(&rows, "price")[0];
    let bs = bs_price(OptionKind::Call, 1.0, 1.0, 1.0, 0.2, 0.02, 0.0);
    assert!((p - bs).abs() < 1e-9, "{p} vs {bs}");
}

#[test]
fn whdump_lists_factors_and_residuals() {
    let model = data("two_regime.json");
    let (code, out, _) = rsjd(&["whdump", "--model", model.to_str().unwrap(), "--q", "2"]);
    assert_eq!(code, 0);
    let rows = csv(&out);
    for block in ["eta_plus", "q_plus", "eta_minus", "q_minus", "residual_plus", "residual_minus"] {
        assert!(rows.iter().any(|r| r[0] == block), "missing {block}");
    }
    let res: Vec<f64> = rows.iter().filter(|r| r[0].starts_with("residual")).map(|r| r[4].parse().unwrap()).collect();
    assert!(res.iter().all(|r| *r < 1e-8));
    let (code, out, _) = rsjd(&["whdump", "--model", model.to_str().unwrap(), "--q", "10+5i"]);
    assert_eq!(code, 0);
    assert!(csv(&out).iter().any(|r| r[0] == "q_plus" && r[5] != "0"));
}

#[test]
fn mc_is_reproducible_and_checks() {
    let model = data("two_regime.json");
    let args = ["mc", "dnt", "--model", model.to_str().unwrap(), "--lower", "0.8", "--upper", "1.25", "--maturity", "0.5", "--seed", "7", "--paths", "20000"];
    let (c1, a, _) = rsjd(&args);
    let (c2, b, _) = rsjd(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let mut checked = args.to_vec();
    checked.push("--check");
    let (code, out, _) = rsjd(&checked);
    assert_eq!(code, 0);
    let rows = csv(&out);
    assert!(column(&rows, "z")[0].abs() < 3.0);
    let (_, other, _) = rsjd(&["mc", "--seed", "8", "dnt", "--model", model.to_str().unwrap(), "--lower", "0.8", "--upper", "1.25", "--maturity", "0.5", "--paths", "20000"]);
    assert_ne!(a, other);
}

#[test]
fn every_pricing_subcommand_has_a_mirror() {
    let model = data("two_regime.json");
    let m = model.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["vanilla", "--model", m, "--strike", "0.9,1.1", "--maturity", "1", "--kind", "put"],
        vec!["fwdstart", "--model", m, "--kappa", "1", "--t1", "0.5", "--t2", "1"],
        vec!["smile", "--model", m, "--y", "0", "--t1", "0.5", "--t2", "1", "--kappa", "1"],
        vec!["varswap", "--model", m, "--maturity", "1", "--method", "all"],
        vec!["volswap", "--model", m, "--maturity", "1"],
        vec!["dnt", "--model", m, "--lower", "0.8", "--upper", "1.25", "--maturity", "0.5"],
        vec!["dkoc", "--model", m, "--lower", "0.8", "--upper", "1.25", "--strike", "1", "--maturity", "0.5"],
        vec!["rebate", "--model", m, "--lower", "0.8", "--upper", "1.25", "--maturity", "0.5", "--amount", "2"],
        vec!["density", "--model", m, "--maturity", "0.5", "--y", "-0.1,0.1"],
    ];
    for case in cases {
        let (code, analytic, err) = rsjd(&case);
        assert_eq!(code, 0, "{case:?}: {err}");
        let mut mc = vec!["mc"];
        mc.extend(&case);
        mc.extend(["--paths", "100000", "--check", "--window", "0.05"]);
        let (code, out, err) = rsjd(&mc);
        assert_eq!(code, 0, "{mc:?}: {err}");
        let (a, b) = (csv(&analytic), csv(&out));
        assert_eq!(a.len(), b.len());
        for z in column(&b, "z") {
            // the binned estimators carry a small window bias on top of noise
            assert!(z.abs() < 4.0, "{case:?}: z = {z}\n{out}");
        }
    }
}

#[test]
fn mc_whdump_passage() {
    let model = data("two_regime.json");
    let (code, out, _) = rsjd(&["mc", "whdump", "--model", model.to_str().unwrap(), "--q", "2", "--level", "0.1,0.2", "--check", "--paths", "20000"]);
    assert_eq!(code, 0);
    assert!(column(&csv(&out), "z").iter().all(|z| z.abs() < 3.0));
    let (code, _, err) = rsjd(&["mc", "whdump", "--model", model.to_str().unwrap(), "--q", "2+1i", "--level", "0.1"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn exit_codes() {
    let model = data("two_regime.json");
    let m = model.to_str().unwrap();
    let (code, _, _) = rsjd(&["vanilla", "--model", m, "--strike", "1"]);
    assert_eq!(code, 1);
    let (code, _, _) = rsjd(&["vanilla", "--model", m, "--strike", "1", "--maturity", "1", "--bogus"]);
    assert_eq!(code, 1);
    let (code, _, err) = rsjd(&["vanilla", "--model", "/nonexistent.json", "--strike", "1", "--maturity", "1"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, err) = rsjd(&["vanilla", "--model", m, "--strike", "1", "--maturity", "-1"]);
    assert_eq!(code, 1, "{err}");
    let (code, _, err) = rsjd(&["vanilla", "--model", m, "--strike", "1", "--maturity", "1", "--set", "fourier_max_nodes=10"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("numerical failure"));
    let (code, _, err) = rsjd(&["vanilla", "--model", m, "--strike", "1", "--maturity", "1", "--set", "no_such_setting=1"]);
    assert_eq!(code, 1);
    assert!(err.contains("no_such_setting"));
    let (code, out, _) = rsjd(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("whdump"));
}

#[test]
fn settings_overlay_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("settings.json");
    std::fs::write(&path, "{\"fourier_tol\": 1e-9}").unwrap();
    let model = data("two_regime.json");
    let base = ["vanilla", "--model", model.to_str().unwrap(), "--strike", "1", "--maturity", "1"];
    let (_, fine, _) = rsjd(&base);
    let mut with = base.to_vec();
    with.extend(["--settings", path.to_str().unwrap()]);
    let (code, coarse, _) = rsjd(&with);
    assert_eq!(code, 0);
    let (a, b) = (column(&csv(&fine), "price")[0], column(&csv(&coarse), "price")[0]);
    assert!((a - b).abs() < 1e-8);
    let s = rsjd_cli::load_settings(Some(&path), &["laplace_n=20".to_string()]).unwrap();
    assert_eq!((s.fourier_tol, s.laplace_n), (1e-9, 20));
}

#[test]
fn approx_build_emits_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = rsjd(&[
        "approx", "build", "--target", "cir", "--kappa", "1.5", "--theta", "0.04", "--eps", "0.3", "--flavor", "tc", "--levels", "12",
        "--lambda", "2", "--eta-plus", "20", "--eta-minus", "15", "--rd", "0.02",
    ]);
    assert_eq!(code, 0, "{err}");
    let m = parse_model(&out).unwrap();
    assert_eq!(m.n_regimes(), 12);
    assert!(m.check_martingale().passed);
    for (i, r) in m.regimes().iter().enumerate() {
        assert!((r.lambda / r.sigma.powi(2) - 2.0).abs() < 1e-12, "regime {i}");
    }
    let path = dir.path().join("approx.json");
    std::fs::write(&path, &out).unwrap();
    let (code, priced, _) = rsjd(&["vanilla", "--model", path.to_str().unwrap(), "--strike", "1", "--maturity", "1"]);
    assert_eq!(code, 0);
    assert_eq!(csv(&priced).len(), 2);
    let (code, _, err) = rsjd(&[
        "approx", "build", "--target", "cir", "--kappa", "1.5", "--theta", "0.04", "--eps", "0.3", "--flavor", "tc", "--levels", "5",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("negative rate at level"), "{err}");
}

#[test]
fn approx_report_differences() {
    let (code, out, err) = rsjd(&[
        "approx", "report", "--target", "cir", "--kappa", "1.5", "--theta", "0.04", "--eps", "0.3", "--flavor", "int", "--levels", "10,20,40",
        "--strike", "1", "--maturity", "1",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = csv(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1][5], "");
    let d: Vec<f64> = rows[2..].iter().map(|r| r[5].parse::<f64>().unwrap().abs()).collect();
    assert!(d[1] < d[0]);
}

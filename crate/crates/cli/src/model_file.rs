//! JSON model files, schema version 1.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "n0": 1,
//!   "q": [[0.0]],
//!   "regimes": [{ "mu": -0.02, "sigma": 0.2, "lambda": 0.0, "p": 1.0,
//!                 "beta_plus": [], "b_plus": [], "beta_minus": [], "b_minus": [],
//!                 "rd": 0.0, "rf": 0.0 }],
//!   "x0": 0.0,
//!   "z0": 0
//! }
//! ```
//!
//! `mu` may be omitted in every regime, in which case the martingale drift is solved for. A regime
//! with `lambda` 0 may leave out the jump blocks.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rsjd::{DoublePhaseType, Generator, PhaseType, Regime, RegimeModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: u32,
    pub n0: usize,
    pub q: Vec<Vec<f64>>,
    pub regimes: Vec<RegimeBlock>,
    pub x0: f64,
    pub z0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub beta_plus: Vec<f64>,
    #[serde(default)]
    pub b_plus: Vec<Vec<f64>>,
    #[serde(default)]
    pub beta_minus: Vec<f64>,
    #[serde(default)]
    pub b_minus: Vec<Vec<f64>>,
    #[serde(default)]
    pub rd: f64,
    #[serde(default)]
    pub rf: f64,
}

fn one() -> f64 {
    1.0
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Input(format!("{what} must be a {n}x{n} array of rows")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn phase_type(beta: &[f64], b: &[Vec<f64>], what: &str) -> Result<PhaseType, CliError> {
    if beta.is_empty() && b.is_empty() {
        return Ok(PhaseType::empty());
    }
    let a = matrix(b, beta.len(), what)?;
    PhaseType::new(DVector::from_column_slice(beta), a).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

impl ModelFile {
    pub fn from_model(m: &RegimeModel) -> Self {
        let regimes = m
            .regimes()
            .iter()
            .map(|r| RegimeBlock {
                mu: Some(r.mu),
                sigma: r.sigma,
                lambda: r.lambda,
                p: r.jumps.p(),
                beta_plus: r.jumps.plus().alpha().iter().copied().collect(),
                b_plus: rows_of(r.jumps.plus().generator()),
                beta_minus: r.jumps.minus().alpha().iter().copied().collect(),
                b_minus: rows_of(r.jumps.minus().generator()),
                rd: r.rd,
                rf: r.rf,
            })
            .collect();
        ModelFile {
            schema: SCHEMA_VERSION,
            n0: m.n_regimes(),
            q: rows_of(m.generator().matrix()),
            regimes,
            x0: m.x0(),
            z0: m.z0(),
        }
    }

    pub fn to_model(&self) -> Result<RegimeModel, CliError> {
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Input(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.regimes.len() != self.n0 {
            return Err(CliError::Input(format!("n0 is {} but {} regime blocks were given", self.n0, self.regimes.len())));
        }
        let q = Generator::new(matrix(&self.q, self.n0, "q")?).map_err(|e| CliError::Input(format!("q: {e}")))?;
        let with_mu = self.regimes.iter().filter(|r| r.mu.is_some()).count();
        if with_mu != 0 && with_mu != self.n0 {
            return Err(CliError::Input("mu must be given for every regime or for none".into()));
        }
        let regimes = self
            .regimes
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let no_tails = b.beta_plus.is_empty() && b.beta_minus.is_empty();
                if no_tails && b.lambda == 0.0 {
                    return Ok(Regime::diffusion(b.mu.unwrap_or(0.0), b.sigma, b.rd, b.rf));
                }
                let plus = phase_type(&b.beta_plus, &b.b_plus, &format!("regime {i} b_plus"))?;
                let minus = phase_type(&b.beta_minus, &b.b_minus, &format!("regime {i} b_minus"))?;
                let jumps = DoublePhaseType::new(b.p, plus, minus).map_err(|e| CliError::Input(format!("regime {i}: {e}")))?;
                Ok(Regime { mu: b.mu.unwrap_or(0.0), sigma: b.sigma, lambda: b.lambda, jumps, rd: b.rd, rf: b.rf })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let m = RegimeModel::new(q, regimes, self.x0, self.z0).map_err(|e| CliError::Input(e.to_string()))?;
        if with_mu == 0 {
            return m.solve_drift().map_err(|e| CliError::Input(e.to_string()));
        }
        Ok(m)
    }
}

pub fn parse_model(text: &str) -> Result<RegimeModel, CliError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| CliError::Input(format!("model file: {e}")))?;
    file.to_model()
}

pub fn parse_model_file(path: &Path) -> Result<RegimeModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_model(m: &RegimeModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(m)).expect("model file serialises")
}

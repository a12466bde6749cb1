//! Embedding of the jump model into a Markov-modulated Brownian (fluid) model.
//!
//! Each phase-type jump is replaced by a stretch of time in which the level moves at
//! unit speed, so jumps become continuous excursions through the phase states.
//! States are ordered as: up-jump phases (regime-major), regimes, down-jump phases.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::linalg::{C64, CVec};
use crate::model::RegimeModel;

#[derive(Debug, Clone)]
pub struct FluidEmbedding {
    q0: DMatrix<f64>,
    sigma: Vec<f64>,
    drift: Vec<f64>,
    rd: Vec<f64>,
    alpha_plus: Vec<f64>,
    alpha_minus: Vec<f64>,
    n0: usize,
    up: Vec<Range<usize>>,
    down: Vec<Range<usize>>,
}

impl FluidEmbedding {
    pub fn new(m: &RegimeModel) -> Self {
        let n0 = m.n_regimes();
        let mut up = Vec::with_capacity(n0);
        let mut next = 0;
        for r in m.regimes() {
            let k = if r.lambda_plus() > 0.0 { r.jumps.plus().phases() } else { 0 };
            up.push(next..next + k);
            next += k;
        }
        let n_up = next;
        next += n0;
        let mut down = Vec::with_capacity(n0);
        for r in m.regimes() {
            let k = if r.lambda_minus() > 0.0 { r.jumps.minus().phases() } else { 0 };
            down.push(next..next + k);
            next += k;
        }
        let n = next;
        let mut q0 = DMatrix::zeros(n, n);
        let q = m.generator().matrix();
        let mut sigma = vec![0.0; n];
        let mut drift = vec![0.0; n];
        for (i, r) in m.regimes().iter().enumerate() {
            let zi = n_up + i;
            for j in 0..n0 {
                q0[(zi, n_up + j)] = q[(i, j)];
            }
            q0[(zi, zi)] -= r.lambda;
            sigma[zi] = r.sigma;
            drift[zi] = r.mu;
            for (blocks, tail, rate, speed) in [
                (&up, r.jumps.plus(), r.lambda_plus(), 1.0),
                (&down, r.jumps.minus(), r.lambda_minus(), -1.0),
            ] {
                let block = blocks[i].clone();
                if block.is_empty() {
                    continue;
                }
                let b = tail.generator();
                let exit = tail.exit_vector();
                for (a, ia) in block.clone().enumerate() {
                    q0[(zi, ia)] = rate * tail.alpha()[a];
                    for (c, ic) in block.clone().enumerate() {
                        q0[(ia, ic)] = b[(a, c)];
                    }
                    q0[(ia, zi)] = exit[a];
                    drift[ia] = speed;
                }
            }
        }
        FluidEmbedding {
            q0,
            sigma,
            drift,
            rd: m.rd_vector(),
            alpha_plus: m.regimes().iter().map(|r| r.alpha_plus()).collect(),
            alpha_minus: m.regimes().iter().map(|r| r.alpha_minus()).collect(),
            n0,
            up,
            down,
        }
    }

    pub fn q0(&self) -> &DMatrix<f64> {
        &self.q0
    }

    /// Diagonal of `Σ`: the volatility on regime states, zero on phases.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Diagonal of `V`: `+1` on up phases, the regime drift, `−1` on down phases.
    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn dim(&self) -> usize {
        self.q0.nrows()
    }

    pub fn n_regimes(&self) -> usize {
        self.n0
    }

    pub fn n_up_phases(&self) -> usize {
        self.n0_offset()
    }

    pub fn n_down_phases(&self) -> usize {
        self.dim() - self.n0_offset() - self.n0
    }

    /// Number of states with non-negative speed: up phases and regimes.
    pub fn n_plus(&self) -> usize {
        self.n0_offset() + self.n0
    }

    /// Number of states with non-positive speed: regimes and down phases.
    pub fn n_minus(&self) -> usize {
        self.dim() - self.n0_offset()
    }

    fn n0_offset(&self) -> usize {
        self.up.last().map_or(0, |r| r.end)
    }

    /// Position of regime `i` in the full state space.
    pub fn regime_state(&self, i: usize) -> usize {
        self.n0_offset() + i
    }

    /// States of the up-jump phases of regime `i`.
    pub fn up_phases(&self, i: usize) -> Range<usize> {
        self.up[i].clone()
    }

    pub fn down_phases(&self, i: usize) -> Range<usize> {
        self.down[i].clone()
    }

    /// Decay rates of the up and down jump tails of regime `i` (infinite when absent).
    pub fn jump_decay(&self, i: usize) -> (f64, f64) {
        (self.alpha_plus[i], self.alpha_minus[i])
    }

    pub fn rd(&self) -> &[f64] {
        &self.rd
    }

    /// Discount vector `h = R_D + q` on regimes, zero on phases.
    pub fn discount_vector(&self, q: C64) -> Result<CVec> {
        if q.re < 0.0 {
            return domain(format!("discount vector needs Re(q) >= 0, got {q}"));
        }
        let mut h = CVec::zeros(self.dim());
        for i in 0..self.n0 {
            let v = q + self.rd[i];
            if !(v.re > 0.0) {
                return domain(format!("regime {i}: Re(R_D + q) = {} must be strictly positive", v.re));
            }
            h[self.regime_state(i)] = v;
        }
        Ok(h)
    }
}

pub fn build_embedding(m: &RegimeModel) -> FluidEmbedding {
    FluidEmbedding::new(m)
}

pub fn discount_vector(emb: &FluidEmbedding, q: C64) -> Result<CVec> {
    emb.discount_vector(q)
}

//! One record holding every tolerance and grid size used by the engine.
//!
//! All fields have defaults; a JSON overlay may set any subset of them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericalSettings {
    /// Absolute row-sum tolerance for generators, scaled by max(1, |diagonal|).
    pub generator_tol: f64,
    /// Margin kept between an mgf argument and the decay rate.
    pub mgf_margin: f64,
    /// Eigenvector condition number above which spectral formulas are abandoned.
    pub spectral_cond_max: f64,

    /// Damping exponent for call transforms; puts use its negative.
    pub damping: f64,
    /// Target absolute error for Fourier inversions (prices per unit spot).
    pub fourier_tol: f64,
    /// Hard cap on the number of Fourier nodes.
    pub fourier_max_nodes: usize,

    /// Target absolute error for density inversion.
    pub density_tol: f64,

    /// Relative tolerance for adaptive quadrature.
    pub quad_rel_tol: f64,
    /// Absolute tolerance for adaptive quadrature.
    pub quad_abs_tol: f64,

    /// Finite-difference step for the variance swap route.
    pub fd_step: f64,
    /// Allowed relative disagreement between variance swap routes.
    pub varswap_agreement: f64,
    /// Target truncation error for the volatility swap integral.
    pub volswap_tol: f64,

    /// Imaginary-axis margin for splitting pencil roots, relative to the spectral scale.
    pub wh_split_margin: f64,
    /// Eigenbasis condition number that triggers the perturbation fallback.
    pub wh_defect_cond: f64,
    /// Size of the regularising perturbation of the discount vector.
    pub wh_perturbation: f64,
    /// Maximum number of Newton steps on the factorisation residual.
    pub wh_newton_steps: usize,
    /// Newton refinement is skipped above this many unknowns.
    pub wh_newton_max_unknowns: usize,
    /// Relative residual below which Newton refinement is not attempted.
    pub wh_newton_skip_below: f64,
    /// Relative residual the factorisation must reach.
    pub wh_residual_tol: f64,

    /// Euler inversion: log of the inverse discretisation error (Bromwich abscissa is A/2t).
    pub laplace_a: f64,
    /// Euler inversion: number of plain terms.
    pub laplace_n: usize,
    /// Euler inversion: number of binomially averaged terms.
    pub laplace_m: usize,
    /// Maximum accepted Laplace inversion error estimate.
    pub laplace_tol: f64,

    /// Largest accepted error of a phase-type fit to a jump tail function.
    pub dph_fit_tol: f64,

    /// Monte-Carlo bridge subdivision: segments with σ²dt above width²/ratio are split.
    pub mc_subdivision_ratio: f64,
}

impl Default for NumericalSettings {
    fn default() -> Self {
        NumericalSettings {
            generator_tol: 1e-12,
            mgf_margin: 1e-9,
            spectral_cond_max: 1e8,
            damping: 1.25,
            fourier_tol: 1e-11,
            fourier_max_nodes: 1 << 16,
            density_tol: 1e-12,
            quad_rel_tol: 1e-11,
            quad_abs_tol: 1e-13,
            fd_step: 1e-6,
            varswap_agreement: 1e-5,
            volswap_tol: 1e-8,
            wh_split_margin: 1e-9,
            wh_defect_cond: 1e10,
            wh_perturbation: 1e-8,
            wh_newton_steps: 3,
            wh_newton_max_unknowns: 600,
            wh_newton_skip_below: 1e-13,
            wh_residual_tol: 1e-8,
            laplace_a: 25.0,
            laplace_n: 15,
            laplace_m: 11,
            laplace_tol: 1e-6,
            dph_fit_tol: 1e-2,
            mc_subdivision_ratio: 16.0,
        }
    }
}

//! Pricing engine for regime-switching Lévy models with double phase-type jumps.

pub mod approximation;
pub mod barrier;
pub mod error;
pub mod european;
pub mod fluid;
pub mod linalg;
pub mod markov;
pub mod mc;
pub mod model;
pub mod phase_type;
pub mod quad;
pub mod settings;
pub mod special;
pub mod vol_derivatives;
pub mod wiener_hopf;

pub use error::{Error, Result};
pub use markov::Generator;
pub use model::{Regime, RegimeModel};
pub use phase_type::{DoublePhaseType, PhaseType};
pub use settings::NumericalSettings;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/european.md")]
    mod european {}
    #[doc = include_str!("../../../book/src/volatility.md")]
    mod volatility {}
    #[doc = include_str!("../../../book/src/wiener_hopf.md")]
    mod wiener_hopf {}
    #[doc = include_str!("../../../book/src/barriers.md")]
    mod barriers {}
    #[doc = include_str!("../../../book/src/approximation.md")]
    mod approximation {}
    #[doc = include_str!("../../../book/src/monte_carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

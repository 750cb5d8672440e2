//! Spectral simulation of the fractional stochastic evolution equation
//! `(∂_t + A)^γ X = Ẇ^Q` with `A` and `Q` diagonal in a shared basis.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conv;
pub mod error;
pub mod frac_calc;
pub mod fqw;
pub mod grid;
pub mod markov;
pub mod noise;
pub mod quad;
pub mod sampler;
pub mod specfun;
pub mod spectral_model;

pub use error::{Error, Result};
pub use grid::{GridFunction, TimeGrid};
pub use spectral_model::{AssumptionReport, QProfile, SpectralModel};
pub use noise::{gen_noise, IncrementSource, NoisePanel, NoiseSource};
pub use sampler::{matern_cov, ModeEnsemble};

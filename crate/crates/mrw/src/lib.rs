//! Mean-reverting multifractal random walk (MRW) models for spot-price-like
//! series: exact simulators, approximate maximum-likelihood estimation via a
//! truncated-AR Laplace approximation, and wavelet-variogram diagnostics for
//! comparing damped (Ornstein-Uhlenbeck-type) against fractional
//! (Hurst-exponent) descriptions of anti-correlated returns.

pub mod analysis;
pub mod dataprep;
pub mod error;
pub mod estimate;
pub mod likelihood;
mod linalg;
pub mod model;
pub mod seed;
pub mod simulate;

pub use error::{MrwError, Result};
pub use model::{ModelParams, Variant, VariantKind};

//! Simulation, estimation and limit-law evaluation for the stable
//! Cox-Ingersoll-Ross model
//!
//! ```text
//! dX_t = (a - b X_t) dt + σ X_{t-}^{1/α} dZ_t,
//! ```
//!
//! where `Z` is a spectrally positive α-stable Lévy process, `1 < α <= 2`.

pub mod campaign;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod format;
pub mod limit_laws;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod stable_noise;
pub mod validate;

pub use error::{Error, Result};
pub use estimators::{clse, sigma_hat, wclse, EstimateSet, Family};
pub use model::{DerivedParams, ModelParams, TailConstants};
pub use simulator::{Observations, Path, ResidualSeq, SamplingMode, SimConfig};
pub use stable_noise::{StableSampler, StableSpec};

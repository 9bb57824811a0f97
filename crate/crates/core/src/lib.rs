//! Simulation and likelihood inference for ergodic SDEs driven by additive
//! fractional Brownian motion with Hurst exponent `H > 1/2`.

pub mod conv;
pub mod error;
pub mod fbm_core;
pub mod frac_calculus;
pub mod gamma_estimator;
pub mod grid;
pub mod io;
pub mod likelihood;
pub mod quad;
pub mod rng;
pub mod sde_engine;
pub mod stats;

pub use error::{Error, Result};
pub use fbm_core::{CirculantSampler, CoupledDriver, CouplingKernel, CouplingMode};
pub use frac_calculus::{AlphaOrder, MarchaudOperator, SampledFunction};
pub use gamma_estimator::{GammaEstimate, GammaMethod, McSettings};
pub use grid::{Hurst, Path, TimeGrid};
pub use likelihood::{GirsanovOperator, LanDecomposition};
pub use sde_engine::{Diffusion, DriftModel, Fou, SdeConfig, TanhDrift};
pub use stats::{KsResult, Summary};

//! Self-intersection local time of fractional Brownian motion: kernels,
//! limit constants, Monte Carlo estimators and verification experiments.

pub mod chaos;
pub mod constants;
pub mod cubature;
pub mod error;
pub mod fbm;
pub mod kernels;
pub mod silt;
pub mod stats;
pub mod verify;

pub use error::{Result, SiltError};
pub use fbm::{Backend, FbmGenerator, FbmPath, HurstConfig, Regime, TimeGrid};

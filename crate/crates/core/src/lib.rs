//! Bayesian multiple imputation for longitudinal outcomes under
//! multivariate normal, t, skew-normal and skew-t error laws.
//!
//! The sampler fits a sequential-regression (LDL) parameterization of a
//! mixed model for repeated measures by monotone data augmentation, then
//! imputes post-dropout values under MAR or a controlled strategy and pools
//! per-imputation analyses with Rubin's rules.

pub mod analysis;
pub mod conditional;
pub mod covariance;
pub mod data;
pub mod distributions;
pub mod error;
pub mod imputation;
pub mod model;
pub mod oracles;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};

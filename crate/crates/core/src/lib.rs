//! Wallace–Freeman minimum message length estimation as a penalised
//! M-estimator.
//!
//! The crate covers:
//!
//! - [`models`]: per-observation log-densities with derivatives to third
//!   order and Fisher information (Weibull, exponential);
//! - [`priors`]: prior densities and the penalty pen(θ) = −log π + ½log|I|;
//! - [`estimators`]: maximum likelihood and Wallace–Freeman fits by damped
//!   Newton, plus the predicted O(1/n) shift between them;
//! - [`bias`]: cumulants and the Cox–Snell first-order bias, with the
//!   penalty correction for the Wallace–Freeman estimator;
//! - [`codelength`]: the two-part message length and its BIC comparison;
//! - [`simulate`]: a deterministic parallel Monte Carlo harness;
//! - [`verify`]: the end-to-end acceptance checks run by `mml-estim verify`;
//! - [`cli`]: the `mml-estim` command-line front end.

pub mod bias;
pub mod cli;
pub mod codelength;
pub mod error;
pub mod estimators;
pub mod models;
pub mod numerics;
pub mod priors;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};

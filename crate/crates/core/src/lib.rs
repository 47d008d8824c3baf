//! Logistic regression with missing mixed-type covariates, fitted by
//! stochastic approximation EM.

pub mod baselines;
pub mod benchmark;
pub mod cli;
pub mod data;
pub mod distributions;
pub mod error;
pub mod logistic;
pub mod mh;
pub mod metrics;
pub mod missingness;
pub mod model;
pub mod prediction;
pub mod rng;
pub mod saem;
pub mod simulate;

pub use error::{Error, Result};

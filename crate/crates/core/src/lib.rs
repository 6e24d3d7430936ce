//! Nonparametric Thurstone models for rank-order data.

pub mod archive;
pub mod bart;
pub mod baselines;
pub mod chain;
pub mod cli;
pub mod config;
pub mod design;
pub mod dynamic;
pub mod error;
pub mod eval;
pub mod forecast;
pub mod latent;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod rankings;
pub mod regression;
pub mod rng;
pub mod simgen;
pub mod static_model;
pub mod stats;

pub use error::{Error, Result};

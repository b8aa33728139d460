//! Generalized (Gibbs) posteriors for average and conditional treatment effects
//! built from cross-fitted pseudo-outcome losses.

pub mod error;
pub mod numerics;
pub mod dataset;
pub mod dgp;
pub mod nuisance;
pub mod pseudo;
pub mod gibbs_ate;
pub mod gibbs_cate;
pub mod calibrate;
pub mod bench;
pub mod cli;

pub use error::{Error, Result};

//! Bayesian copula state space models for multivariate time series.
//!
//! Observations are driven by a single latent factor on the copula scale:
//! each margin is linked to the factor by a bivariate copula and the factor
//! follows a first-order Markov chain given by another bivariate copula.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod error;
pub mod gauss_oracle;
pub mod io;
pub mod margins;
pub mod model;
pub mod predict;
pub mod quadrature;
pub mod sampler;
pub mod score;
pub mod special;
pub mod stats;

pub use error::{Error, Result};

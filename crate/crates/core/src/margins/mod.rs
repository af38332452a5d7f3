//! Marginal models: Box-Cox transform, additive regression on covariates and
//! the probability integral transform to the copula scale.

mod basis;
mod boxcox;
mod fit;

pub use basis::{bspline_basis, Covariate, CovariateValues, Term, TermKind, DEFAULT_INTERIOR_KNOTS, SPLINE_DEGREE};
pub use boxcox::{boxcox, boxcox_inverse};
pub use fit::{fit_margin, lambda_grid, residuals_to_copula, MarginConfig, MarginalModel, RIDGE};

use super::basis::{Covariate, Term, TermKind};
use super::boxcox::{boxcox, boxcox_inverse};
use crate::copula::{U_MAX, U_MIN};
use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_quantile};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ridge added to the normal equations for conditioning only.
pub const RIDGE: f64 = 1e-6;

/// Settings for [`fit_margin`].
#[derive(Clone, Debug, PartialEq)]
pub struct MarginConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    /// Minimum number of observed values.
    pub min_observed: usize,
    pub interior_knots: usize,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            lambda_min: -2.0,
            lambda_max: 2.0,
            lambda_step: 0.05,
            min_observed: 50,
            interior_knots: super::DEFAULT_INTERIOR_KNOTS,
        }
    }
}

/// Grid `min, min + step, ..., max`, built from integer multiples of the step.
pub fn lambda_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(Error::Config(format!("invalid lambda grid [{min}, {max}] step {step}")));
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let l = min + k as f64 * step;
            // snap to the step lattice so that e.g. 0.5 is exact
            (l / step).round() * step
        })
        .collect())
}

/// A fitted marginal model for one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub lambda: f64,
    pub terms: Vec<Term>,
    /// Intercept first, then the term columns in order.
    pub coef: Vec<f64>,
    pub sigma: f64,
    /// Fitted values at the training rows (`NaN` where the response was
    /// missing).
    pub fitted: Vec<f64>,
}

impl MarginalModel {
    /// Design row at time `t`.
    pub fn design_row(&self, covariates: &[Covariate], t: usize) -> Result<Vec<f64>> {
        design_row(&self.terms, covariates, t)
    }

    /// Regression mean on the Box-Cox scale at time `t`.
    pub fn mean_at(&self, covariates: &[Covariate], t: usize) -> Result<f64> {
        let row = self.design_row(covariates, t)?;
        Ok(row.iter().zip(&self.coef).map(|(a, b)| a * b).sum())
    }

    /// Standardized residual of `y` at time `t`.
    pub fn standardize(&self, y: f64, covariates: &[Covariate], t: usize) -> Result<f64> {
        Ok((boxcox(y, self.lambda)? - self.mean_at(covariates, t)?) / self.sigma)
    }

    /// Maps a copula-scale value at time `t` back to the data scale:
    /// `y_bc = mean + sigma * Phi^-1(u)` followed by the inverse Box-Cox map.
    pub fn data_value(&self, u: f64, covariates: &[Covariate], t: usize) -> Result<f64> {
        let mean = self.mean_at(covariates, t)?;
        boxcox_inverse(mean + self.sigma * norm_quantile(u), self.lambda)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let m: MarginalModel = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if !(m.sigma > 0.0) {
            return Err(Error::Config(format!("marginal model has sigma {}", m.sigma)));
        }
        Ok(m)
    }
}

fn design_row(terms: &[Term], covariates: &[Covariate], t: usize) -> Result<Vec<f64>> {
    let mut row = vec![1.0];
    for term in terms {
        let cov = covariates
            .iter()
            .find(|c| c.name == term.name)
            .ok_or_else(|| Error::Config(format!("covariate `{}` not supplied", term.name)))?;
        if t >= cov.len() {
            return Err(Error::Range(format!("time {t} beyond covariate `{}` ({} rows)", cov.name, cov.len())));
        }
        term.push_columns(cov, t, &mut row)?;
    }
    Ok(row)
}

/// Fits a Box-Cox additive regression to `y`. Missing responses are dropped.
/// For each `lambda` in the grid the coefficients solve ridge-stabilized
/// least squares on the transformed response; the selected `lambda`
/// maximizes the Gaussian profile likelihood including the Box-Cox
/// Jacobian `(lambda - 1) sum ln y`.
pub fn fit_margin(
    y: &[Option<f64>],
    covariates: &[(Covariate, TermKind)],
    cfg: &MarginConfig,
) -> Result<MarginalModel> {
    let rows: Vec<usize> = (0..y.len()).filter(|&t| y[t].is_some()).collect();
    if rows.len() < cfg.min_observed {
        return Err(Error::Fit(format!(
            "{} observed values, at least {} required",
            rows.len(),
            cfg.min_observed
        )));
    }
    for (cov, _) in covariates {
        if cov.len() != y.len() {
            return Err(Error::Fit(format!(
                "covariate `{}` has {} rows for a series of length {}",
                cov.name,
                cov.len(),
                y.len()
            )));
        }
    }
    let ys: Vec<f64> = rows.iter().map(|&t| y[t].unwrap_or(f64::NAN)).collect();
    if let Some(bad) = ys.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!(
            "Box-Cox needs positive responses, row {} has {}",
            rows[bad], ys[bad]
        )));
    }
    let terms: Vec<Term> = covariates
        .iter()
        .map(|(c, k)| Term::build(c, *k, &rows, cfg.interior_knots))
        .collect::<Result<_>>()?;
    let covs: Vec<Covariate> = covariates.iter().map(|(c, _)| c.clone()).collect();

    let n = rows.len();
    let p = 1 + terms.iter().map(Term::width).sum::<usize>();
    let mut x = DMatrix::<f64>::zeros(n, p);
    for (i, &t) in rows.iter().enumerate() {
        let row = design_row(&terms, &covs, t)?;
        for (k, v) in row.into_iter().enumerate() {
            x[(i, k)] = v;
        }
    }
    let xt_x = x.transpose() * &x;
    let mut gram = xt_x.clone();
    for k in 1..p {
        gram[(k, k)] += RIDGE;
    }
    let chol = gram.cholesky().ok_or_else(|| Error::Fit("design matrix is not positive definite".into()))?;

    let sum_ln_y: f64 = ys.iter().map(|v| v.ln()).sum();
    let grid = lambda_grid(cfg.lambda_min, cfg.lambda_max, cfg.lambda_step)?;
    let mut best: Option<(f64, f64, DVector<f64>, f64)> = None;
    for &lambda in &grid {
        let z = DVector::from_iterator(n, ys.iter().map(|&v| boxcox(v, lambda).unwrap_or(f64::NAN)));
        let xtz = x.transpose() * &z;
        let mut beta = chol.solve(&xtz);
        // refinement toward the unpenalized normal equations removes the
        // ridge bias wherever the design is well conditioned
        for _ in 0..2 {
            let r = &xtz - &xt_x * &beta;
            beta += chol.solve(&r);
        }
        let resid = &z - &x * &beta;
        // an exact fit keeps a tiny positive scale
        let sigma2 = (resid.norm_squared() / n as f64).max(1e-300);
        let ll = -0.5 * n as f64 * ((2.0 * PI * sigma2).ln() + 1.0) + (lambda - 1.0) * sum_ln_y;
        if best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, lambda, beta, sigma2.sqrt()));
        }
    }
    let (_, lambda, beta, sigma) = best.ok_or_else(|| Error::Fit("empty lambda grid".into()))?;
    let fitted_rows = &x * &beta;
    let mut fitted = vec![f64::NAN; y.len()];
    for (i, &t) in rows.iter().enumerate() {
        fitted[t] = fitted_rows[i];
    }
    Ok(MarginalModel { lambda, terms, coef: beta.iter().copied().collect(), sigma, fitted })
}

/// Probability integral transform of the standardized residuals,
/// `u = Phi((BC(y) - mean) / sigma)`, clamped to the open-interval guard.
/// Missing values stay missing.
pub fn residuals_to_copula(
    model: &MarginalModel,
    y: &[Option<f64>],
    covariates: &[Covariate],
) -> Result<Vec<Option<f64>>> {
    y.iter()
        .enumerate()
        .map(|(t, v)| match v {
            None => Ok(None),
            Some(v) => {
                let z = model.standardize(*v, covariates, t)?;
                Ok(Some(norm_cdf(z).clamp(U_MIN, U_MAX)))
            }
        })
        .collect()
}

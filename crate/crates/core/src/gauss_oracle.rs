//! Linear Gaussian state space model with standardized variables:
//! `W_1 ~ N(0,1)`, `W_t | W_{t-1} ~ N(rho_lat W_{t-1}, 1 - rho_lat^2)`,
//! `Z_tj | W_t ~ N(rho_j W_t, 1 - rho_j^2)`.
//!
//! Supplies the analytic joint covariance and a Kalman-filter likelihood
//! used to check the copula model in the all-Gaussian case.

use crate::error::{domain, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussSsmParams {
    pub rho_obs: Vec<f64>,
    pub rho_lat: f64,
}

impl GaussSsmParams {
    pub fn new(rho_obs: Vec<f64>, rho_lat: f64) -> Result<Self> {
        if rho_obs.is_empty() {
            return Err(domain("need at least one observation correlation"));
        }
        for &r in rho_obs.iter().chain(std::iter::once(&rho_lat)) {
            if !(r.abs() < 1.0) {
                return Err(domain(format!("correlation {r} outside (-1, 1)")));
            }
        }
        Ok(GaussSsmParams { rho_obs, rho_lat })
    }

    pub fn n_margins(&self) -> usize {
        self.rho_obs.len()
    }
}

/// Covariance of `(Z_1, W_1, ..., Z_T, W_T)` with `Z_t = (Z_t1..Z_td)`.
#[derive(Debug, Clone)]
pub struct JointCovariance {
    pub sigma: DMatrix<f64>,
    pub n_time: usize,
    pub n_margins: usize,
}

impl JointCovariance {
    /// Index of `Z_tj` (0-based).
    pub fn z_index(&self, t: usize, j: usize) -> usize {
        t * (self.n_margins + 1) + j
    }

    /// Index of `W_t` (0-based).
    pub fn w_index(&self, t: usize) -> usize {
        t * (self.n_margins + 1) + self.n_margins
    }

    /// Positive semidefinite up to a Cholesky attempt with a tiny ridge.
    pub fn is_positive_semidefinite(&self) -> bool {
        let n = self.sigma.nrows();
        let ridged = &self.sigma + DMatrix::identity(n, n) * 1e-12;
        Cholesky::new(ridged).is_some()
    }
}

/// Joint covariance: diagonal blocks `A`, off-diagonal blocks
/// `rho_lat^|s-t| (A + B)` where `A` has unit diagonal, `rho_i rho_j` between
/// observations and `rho_j` between observation and state, and
/// `B = diag(rho_1^2 - 1, ..., rho_d^2 - 1, 0)`.
pub fn build_sigma(params: &GaussSsmParams, n_time: usize) -> JointCovariance {
    let d = params.n_margins();
    let k = d + 1;
    let rho = |i: usize| if i < d { params.rho_obs[i] } else { 1.0 };
    let a = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { rho(i) * rho(j) });
    let mut apb = a.clone();
    for i in 0..d {
        apb[(i, i)] += params.rho_obs[i] * params.rho_obs[i] - 1.0;
    }
    let n = k * n_time;
    let mut sigma = DMatrix::zeros(n, n);
    for s in 0..n_time {
        for t in 0..n_time {
            let block = if s == t {
                a.clone()
            } else {
                &apb * params.rho_lat.powi((s as i32 - t as i32).abs())
            };
            sigma.view_mut((s * k, t * k), (k, k)).copy_from(&block);
        }
    }
    JointCovariance { sigma, n_time, n_margins: d }
}

/// `log N(x; 0, cov)` via Cholesky.
pub fn mvn_logpdf(cov: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    let n = x.len();
    if n == 0 {
        return Ok(0.0);
    }
    let chol = Cholesky::new(cov.clone()).ok_or_else(|| domain("covariance is not positive definite"))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(x)
        .ok_or_else(|| domain("singular Cholesky factor"))?;
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(-0.5 * (n as f64 * (2.0 * PI).ln() + log_det + y.dot(&y)))
}

/// Dense log density of the observed `Z` entries with `W` integrated out.
pub fn dense_loglik(params: &GaussSsmParams, z: &[Vec<Option<f64>>]) -> Result<f64> {
    let jc = build_sigma(params, z.len());
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    for (t, row) in z.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(x) = cell {
                idx.push(jc.z_index(t, j));
                vals.push(*x);
            }
        }
    }
    let cov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| jc.sigma[(idx[a], idx[b])]);
    mvn_logpdf(&cov, &DVector::from_vec(vals))
}

/// Dense joint log density of fully observed `(Z, W)`.
pub fn dense_joint_logpdf(params: &GaussSsmParams, z: &[Vec<f64>], w: &[f64]) -> Result<f64> {
    let jc = build_sigma(params, w.len());
    let mut x = DVector::zeros(jc.sigma.nrows());
    for (t, row) in z.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[jc.z_index(t, j)] = v;
        }
        x[jc.w_index(t)] = w[t];
    }
    mvn_logpdf(&jc.sigma, &x)
}

/// Log marginal likelihood of `z` by the Kalman filter; missing cells are
/// skipped in the update step.
pub fn kalman_loglik(params: &GaussSsmParams, z: &[Vec<Option<f64>>]) -> Result<f64> {
    let d = params.n_margins();
    let (mut mean, mut var) = (0.0, 1.0);
    let mut ll = 0.0;
    for (t, row) in z.iter().enumerate() {
        if row.len() != d {
            return Err(domain(format!("row {t} has {} entries, expected {d}", row.len())));
        }
        if t > 0 {
            mean *= params.rho_lat;
            var = params.rho_lat * params.rho_lat * var + 1.0 - params.rho_lat * params.rho_lat;
        }
        for (j, cell) in row.iter().enumerate() {
            let Some(x) = *cell else { continue };
            if !x.is_finite() {
                return Err(domain(format!("non-finite observation at ({t}, {j})")));
            }
            let r = params.rho_obs[j];
            let innov = x - r * mean;
            let s = r * r * var + 1.0 - r * r;
            ll -= 0.5 * ((2.0 * PI * s).ln() + innov * innov / s);
            let gain = r * var / s;
            mean += gain * innov;
            var -= gain * r * var;
        }
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_examples() {
        let p = GaussSsmParams::new(vec![0.8], 0.5).unwrap();
        let jc = build_sigma(&p, 2);
        assert!((jc.sigma[(jc.z_index(0, 0), jc.z_index(1, 0))] - 0.32).abs() < 1e-15);
        assert!(jc.sigma.diagonal().iter().all(|&x| x == 1.0));
        assert!(jc.is_positive_semidefinite());
        let p2 = GaussSsmParams::new(vec![0.3, -0.6], 0.2).unwrap();
        let jc2 = build_sigma(&p2, 1);
        assert!((jc2.sigma[(0, 1)] + 0.18).abs() < 1e-15);
        assert_eq!(jc2.sigma, jc2.sigma.transpose());
    }

    #[test]
    fn single_observation_is_standard_normal() {
        let p = GaussSsmParams::new(vec![0.7], 0.4).unwrap();
        let z = 1.3;
        let ll = kalman_loglik(&p, &[vec![Some(z)]]).unwrap();
        assert!((ll - (-0.5 * z * z - 0.5 * (2.0 * PI).ln())).abs() < 1e-14);
        assert_eq!(kalman_loglik(&p, &[vec![None], vec![None]]).unwrap(), 0.0);
        assert!(kalman_loglik(&p, &[vec![Some(f64::NAN)]]).is_err());
    }
}

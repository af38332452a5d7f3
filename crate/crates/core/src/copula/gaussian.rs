use super::family::{CopulaFamily, LogDensityGrad};
use super::point::{UnitPoint, U_MAX, U_MIN};
use crate::error::Result;
use crate::special::{norm_cdf_pair, norm_quantile_pair};
use std::f64::consts::FRAC_PI_2;

/// Gaussian copula, `theta = rho = sin(pi tau / 2)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

impl CopulaFamily for Gaussian {
    fn name(&self) -> &'static str {
        "gaussian"
    }

    fn allows_negative_tau(&self) -> bool {
        true
    }

    fn tau_to_theta(&self, tau: f64) -> f64 {
        (FRAC_PI_2 * tau).sin()
    }

    fn theta_to_tau(&self, theta: f64) -> f64 {
        theta.asin() / FRAC_PI_2
    }

    fn dtheta_dtau(&self, tau: f64) -> f64 {
        FRAC_PI_2 * (FRAC_PI_2 * tau).cos()
    }

    fn log_density(&self, rho: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let (x, y) = (u.z, v.z);
        let d = 1.0 - rho * rho;
        -0.5 * d.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * d)
    }

    fn log_density_grad(&self, rho: f64, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad {
        let (x, y) = (u.z, v.z);
        let d = 1.0 - rho * rho;
        let s = x * x + y * y;
        let p = x * y;
        let value = -0.5 * d.ln() - (rho * rho * s - 2.0 * rho * p) / (2.0 * d);
        let d_param = rho / d - (rho * s - p * (1.0 + rho * rho)) / (d * d);
        let dx = rho * (y - rho * x) / d;
        let dy = rho * (x - rho * y) / d;
        LogDensityGrad {
            value,
            d_param,
            d_u: dx * u.dz_du,
            d_v: dy * v.dz_du,
        }
    }

    fn hfunc(&self, rho: f64, u: &UnitPoint, v: &UnitPoint) -> (f64, f64) {
        let arg = (u.z - rho * v.z) / (1.0 - rho * rho).sqrt();
        norm_cdf_pair(arg)
    }

    fn hinv(&self, rho: f64, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)> {
        let x = rho * v.z + (1.0 - rho * rho).sqrt() * norm_quantile_pair(p, q);
        let (a, b) = norm_cdf_pair(x);
        Ok(clamp_pair(a, b))
    }
}

/// Keeps an h-inverse result inside the open interval guard.
pub(crate) fn clamp_pair(u: f64, um: f64) -> (f64, f64) {
    if u < U_MIN {
        (U_MIN, 1.0 - U_MIN)
    } else if um < U_MIN {
        (U_MAX, U_MIN)
    } else {
        (u, um)
    }
}

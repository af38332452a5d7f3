use super::family::{CopulaFamily, LogDensityGrad};
use super::gaussian::clamp_pair;
use super::point::UnitPoint;
use crate::error::{domain, Result};
use crate::special::{student_t_cdf_pair, student_t_quantile_pair, t4_cdf_pair};
use std::f64::consts::FRAC_PI_2;

const NU: f64 = 4.0;
/// `ln Γ((ν+2)/2) + ln Γ(ν/2) - 2 ln Γ((ν+1)/2)` at ν = 4.
const LOG_NORM: f64 = 0.123_781_439_614_106_9;

/// Student t copula with four degrees of freedom, `theta = rho`.
///
/// The conditional distribution given one argument is a scaled t with
/// five degrees of freedom.
#[derive(Debug, Clone, Copy, Default)]
pub struct StudentT4;

impl StudentT4 {
    fn require_scores(u: &UnitPoint) -> Result<()> {
        if u.has_t4() {
            Ok(())
        } else {
            Err(domain("t4 copula evaluated on a point built without t scores"))
        }
    }
}

impl CopulaFamily for StudentT4 {
    fn name(&self) -> &'static str {
        "t4"
    }

    fn allows_negative_tau(&self) -> bool {
        true
    }

    fn needs_t4(&self) -> bool {
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
        let (x, y) = (u.t4, v.t4);
        let d = 1.0 - rho * rho;
        let q = x * x + y * y - 2.0 * rho * x * y;
        LOG_NORM - 0.5 * d.ln() - 0.5 * (NU + 2.0) * (q / (NU * d)).ln_1p()
            + 0.5 * (NU + 1.0) * ((x * x / NU).ln_1p() + (y * y / NU).ln_1p())
    }

    fn log_density_grad(&self, rho: f64, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad {
        let (x, y) = (u.t4, v.t4);
        let d = 1.0 - rho * rho;
        let q = x * x + y * y - 2.0 * rho * x * y;
        let g = 1.0 + q / (NU * d);
        let value = LOG_NORM - 0.5 * d.ln() - 0.5 * (NU + 2.0) * g.ln()
            + 0.5 * (NU + 1.0) * ((x * x / NU).ln_1p() + (y * y / NU).ln_1p());
        let half = 0.5 * (NU + 2.0);
        let dx = -half * (2.0 * x - 2.0 * rho * y) / (NU * d * g) + (NU + 1.0) * x / (NU + x * x);
        let dy = -half * (2.0 * y - 2.0 * rho * x) / (NU * d * g) + (NU + 1.0) * y / (NU + y * y);
        let dq_over_d = (-2.0 * x * y * d + 2.0 * rho * q) / (d * d);
        let d_param = rho / d - half * dq_over_d / (NU * g);
        LogDensityGrad {
            value,
            d_param,
            d_u: dx * u.dt4_du,
            d_v: dy * v.dt4_du,
        }
    }

    fn hfunc(&self, rho: f64, u: &UnitPoint, v: &UnitPoint) -> (f64, f64) {
        let (x, y) = (u.t4, v.t4);
        let scale = ((NU + y * y) * (1.0 - rho * rho) / (NU + 1.0)).sqrt();
        student_t_cdf_pair((x - rho * y) / scale, NU + 1.0)
    }

    fn hinv(&self, rho: f64, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)> {
        Self::require_scores(v)?;
        let y = v.t4;
        let scale = ((NU + y * y) * (1.0 - rho * rho) / (NU + 1.0)).sqrt();
        let x = student_t_quantile_pair(p, q, NU + 1.0) * scale + rho * y;
        let (a, b) = t4_cdf_pair(x);
        Ok(clamp_pair(a, b))
    }
}

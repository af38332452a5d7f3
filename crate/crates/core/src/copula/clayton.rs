use super::family::{CopulaFamily, LogDensityGrad};
use super::gaussian::clamp_pair;
use super::point::UnitPoint;
use crate::error::Result;

/// Below this parameter value the density is replaced by its first-order
/// expansion around independence.
const SMALL_THETA: f64 = 1e-7;

/// Clayton copula, `tau = theta / (theta + 2)`, `theta >= 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Clayton;

/// `ln(u^-theta + v^-theta - 1)` with `a = -ln u`, `b = -ln v`.
#[inline]
fn ln_s(theta: f64, a: f64, b: f64) -> f64 {
    let (ta, tb) = (theta * a, theta * b);
    let (hi, lo) = if ta > tb { (ta, tb) } else { (tb, ta) };
    if hi < 1.0 {
        (ta.exp_m1() + tb.exp_m1()).ln_1p()
    } else {
        hi + ((lo - hi).exp() - (-hi).exp()).ln_1p()
    }
}

impl CopulaFamily for Clayton {
    fn name(&self) -> &'static str {
        "clayton"
    }

    fn allows_negative_tau(&self) -> bool {
        false
    }

    fn tau_to_theta(&self, tau: f64) -> f64 {
        2.0 * tau / (1.0 - tau)
    }

    fn theta_to_tau(&self, theta: f64) -> f64 {
        theta / (theta + 2.0)
    }

    fn dtheta_dtau(&self, tau: f64) -> f64 {
        2.0 / ((1.0 - tau) * (1.0 - tau))
    }

    fn log_density(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let (a, b) = (-u.ln_u, -v.ln_u);
        if theta < SMALL_THETA {
            return theta * (1.0 - a) * (1.0 - b);
        }
        theta.ln_1p() + (1.0 + theta) * (a + b) - (2.0 + 1.0 / theta) * ln_s(theta, a, b)
    }

    fn log_density_grad(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad {
        let (a, b) = (-u.ln_u, -v.ln_u);
        if theta < SMALL_THETA {
            return LogDensityGrad {
                value: theta * (1.0 - a) * (1.0 - b),
                d_param: (1.0 - a) * (1.0 - b),
                d_u: theta * (1.0 - b) / u.u,
                d_v: theta * (1.0 - a) / v.u,
            };
        }
        let ls = ln_s(theta, a, b);
        let ea = (theta * a - ls).exp(); // u^-theta / S
        let eb = (theta * b - ls).exp();
        let value = theta.ln_1p() + (1.0 + theta) * (a + b) - (2.0 + 1.0 / theta) * ls;
        let da = (1.0 + theta) - (2.0 * theta + 1.0) * ea;
        let db = (1.0 + theta) - (2.0 * theta + 1.0) * eb;
        let d_param = 1.0 / (1.0 + theta) + (a + b) + ls / (theta * theta)
            - (2.0 + 1.0 / theta) * (a * ea + b * eb);
        LogDensityGrad {
            value,
            d_param,
            d_u: -da / u.u,
            d_v: -db / v.u,
        }
    }

    fn hfunc(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> (f64, f64) {
        if theta == 0.0 {
            return (u.u, u.um);
        }
        let (a, b) = (-u.ln_u, -v.ln_u);
        let ln_h = (theta + 1.0) * b - (1.0 + 1.0 / theta) * ln_s(theta, a, b);
        // rounding can push ln h just above 0 as u -> 1
        let ln_h = ln_h.min(0.0);
        (ln_h.exp(), -ln_h.exp_m1())
    }

    fn hinv(&self, theta: f64, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)> {
        if theta == 0.0 {
            return Ok(clamp_pair(p, q));
        }
        let b = -v.ln_u;
        let ln_p = if p < 0.5 { p.ln() } else { (-q).ln_1p() };
        let k = (-theta * ln_p / (1.0 + theta)).exp_m1();
        // ln(1 + v^-theta k)
        let w = theta * b + k.ln();
        let l = if w > 0.0 {
            w + (-w).exp().ln_1p()
        } else {
            w.exp().ln_1p()
        };
        let ln_u = -l / theta;
        Ok(clamp_pair(ln_u.exp(), -ln_u.exp_m1()))
    }

    fn cdf(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        if theta == 0.0 {
            return u.u * v.u;
        }
        (-ln_s(theta, -u.ln_u, -v.ln_u) / theta).exp()
    }
}

use super::family::{CopulaFamily, LogDensityGrad};
use super::gaussian::clamp_pair;
use super::point::{UnitPoint, U_MAX, U_MIN};
use crate::error::{Error, Result};
use crate::special::log_add_exp;

const MAX_ITER: usize = 200;

/// Gumbel copula, `tau = 1 - 1 / theta`, `theta >= 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gumbel;

/// Shared intermediate quantities; `x = -ln u`, `y = -ln v`,
/// `A = x^theta + y^theta`, `B = A^(1/theta)`.
struct Parts {
    x: f64,
    y: f64,
    lx: f64,
    ly: f64,
    ln_a: f64,
    b: f64,
}

impl Parts {
    #[inline]
    fn new(theta: f64, u: &UnitPoint, v: &UnitPoint) -> Self {
        let (lx, ly) = (u.lnln_u, v.lnln_u);
        let ln_a = log_add_exp(theta * lx, theta * ly);
        Parts {
            x: -u.ln_u,
            y: -v.ln_u,
            lx,
            ly,
            ln_a,
            b: (ln_a / theta).exp(),
        }
    }
}

impl CopulaFamily for Gumbel {
    fn name(&self) -> &'static str {
        "gumbel"
    }

    fn allows_negative_tau(&self) -> bool {
        false
    }

    fn tau_to_theta(&self, tau: f64) -> f64 {
        1.0 / (1.0 - tau)
    }

    fn theta_to_tau(&self, theta: f64) -> f64 {
        1.0 - 1.0 / theta
    }

    fn dtheta_dtau(&self, tau: f64) -> f64 {
        1.0 / ((1.0 - tau) * (1.0 - tau))
    }

    fn log_density(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let p = Parts::new(theta, u, v);
        -p.b + p.x + p.y + (theta - 1.0) * (p.lx + p.ly) + (1.0 / theta - 2.0) * p.ln_a
            + (p.b + theta - 1.0).ln()
    }

    fn log_density_grad(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad {
        let p = Parts::new(theta, u, v);
        let bt = p.b + theta - 1.0;
        let value = -p.b + p.x + p.y + (theta - 1.0) * (p.lx + p.ly) + (1.0 / theta - 2.0) * p.ln_a
            + bt.ln();
        let wx = (theta * p.lx - p.ln_a).exp();
        let wy = (theta * p.ly - p.ln_a).exp();
        let common = |w: f64| -p.b * w + (1.0 - 2.0 * theta) * w + p.b * w / bt;
        let dx = 1.0 + (common(wx) + theta - 1.0) / p.x;
        let dy = 1.0 + (common(wy) + theta - 1.0) / p.y;
        let dln_a = wx * p.lx + wy * p.ly;
        let db = p.b * (-p.ln_a / (theta * theta) + dln_a / theta);
        let d_param = -db + (p.lx + p.ly) - p.ln_a / (theta * theta)
            + (1.0 / theta - 2.0) * dln_a
            + (db + 1.0) / bt;
        LogDensityGrad {
            value,
            d_param,
            d_u: -dx / u.u,
            d_v: -dy / v.u,
        }
    }

    fn hfunc(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> (f64, f64) {
        let p = Parts::new(theta, u, v);
        let ln_h = -p.b + (1.0 / theta - 1.0) * p.ln_a + (theta - 1.0) * p.ly + p.y;
        let ln_h = ln_h.min(0.0);
        (ln_h.exp(), -ln_h.exp_m1())
    }

    fn hinv(&self, theta: f64, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)> {
        if theta == 1.0 {
            return Ok(clamp_pair(p, q));
        }
        // Safeguarded Newton on u; the derivative of h in u is the density.
        let upper = p >= 0.5;
        let residual = |pt: &UnitPoint| {
            let (h, hc) = self.hfunc(theta, pt, v);
            if upper {
                q - hc
            } else {
                h - p
            }
        };
        let scale = p.min(q).max(1e-300);
        let (mut lo, mut hi) = (U_MIN, U_MAX);
        let mut u = p.clamp(U_MIN, U_MAX);
        let mut r = f64::NAN;
        for _ in 0..MAX_ITER {
            let pt = UnitPoint::from_pair_lean(u, 1.0 - u, false);
            r = residual(&pt);
            if r.abs() <= 1e-14 * scale {
                return Ok(clamp_pair(u, 1.0 - u));
            }
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            if hi - lo <= 1e-15 * hi {
                return Ok(clamp_pair(u, 1.0 - u));
            }
            let dens = self.log_density(theta, &pt, v).exp();
            let mut next = u - r / dens;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            u = next;
        }
        if r.abs() <= 1e-9 {
            return Ok(clamp_pair(u, 1.0 - u));
        }
        Err(Error::Numeric {
            message: format!("gumbel h-inverse did not converge for p={p}, v={}", v.u),
            residual: r,
        })
    }

    fn cdf(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        (-Parts::new(theta, u, v).b).exp()
    }
}

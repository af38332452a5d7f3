use crate::copula::{CopulaSpec, Family, TAU_EPS};
use crate::error::{domain, Result};
use crate::special::logistic_pair;

/// Offset keeping latent values strictly inside (0, 1) after the
/// unconstrained map.
pub const V_EPS: f64 = 1e-10;
/// Shape parameters of the Beta prior on the first observation tau.
pub const PRIOR_A: f64 = 10.0;
pub const PRIOR_B: f64 = 1.5;

const TAU_SCALE: f64 = 1.0 - TAU_EPS;

/// Continuous model parameters: latent path and Kendall's taus.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousParams {
    pub v: Vec<f64>,
    pub tau_obs: Vec<f64>,
    pub tau_lat: f64,
}

impl ContinuousParams {
    pub fn validate(&self) -> Result<()> {
        for (t, &v) in self.v.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(domain(format!("latent value v[{t}] = {v} outside (0, 1)")));
            }
        }
        if self.tau_obs.is_empty() {
            return Err(domain("no observation taus"));
        }
        if !(self.tau_obs[0] > 0.0 && self.tau_obs[0] < 1.0) {
            return Err(domain(format!(
                "first observation tau must lie in (0, 1), got {}",
                self.tau_obs[0]
            )));
        }
        for (j, &tau) in self.tau_obs.iter().enumerate() {
            if !(tau.abs() < TAU_SCALE) {
                return Err(domain(format!("tau_obs[{j}] = {tau} outside (-{TAU_SCALE}, {TAU_SCALE})")));
            }
        }
        if !(self.tau_lat.abs() < TAU_SCALE) {
            return Err(domain(format!("tau_lat = {} outside (-{TAU_SCALE}, {TAU_SCALE})", self.tau_lat)));
        }
        Ok(())
    }
}

/// Full parameter set: continuous part plus family indicators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub v: Vec<f64>,
    pub tau_obs: Vec<f64>,
    pub tau_lat: f64,
    /// Family per margin; the rotation is picked from the sign of tau.
    pub m_obs: Vec<Family>,
    pub m_lat: Family,
}

impl ModelParams {
    pub fn new(cont: ContinuousParams, m_obs: Vec<Family>, m_lat: Family) -> Result<Self> {
        let p = ModelParams {
            v: cont.v,
            tau_obs: cont.tau_obs,
            tau_lat: cont.tau_lat,
            m_obs,
            m_lat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.continuous().validate()?;
        if self.m_obs.len() != self.tau_obs.len() {
            return Err(domain(format!(
                "{} observation families for {} margins",
                self.m_obs.len(),
                self.tau_obs.len()
            )));
        }
        for j in 0..self.m_obs.len() {
            self.obs_spec(j)?;
        }
        self.lat_spec()?;
        Ok(())
    }

    pub fn continuous(&self) -> ContinuousParams {
        ContinuousParams {
            v: self.v.clone(),
            tau_obs: self.tau_obs.clone(),
            tau_lat: self.tau_lat,
        }
    }

    pub fn n_time(&self) -> usize {
        self.v.len()
    }

    pub fn n_margins(&self) -> usize {
        self.tau_obs.len()
    }

    pub fn obs_spec(&self, j: usize) -> Result<CopulaSpec> {
        CopulaSpec::with_sign(self.m_obs[j], self.tau_obs[j])
    }

    pub fn lat_spec(&self) -> Result<CopulaSpec> {
        CopulaSpec::with_sign(self.m_lat, self.tau_lat)
    }
}

/// Bijection between [`ContinuousParams`] and an unconstrained vector laid
/// out as `[eta_1..eta_T, xi_obs_1..xi_obs_d, xi_lat]`.
///
/// * `v_t = e + (1 - 2e) logistic(eta_t)` with `e = V_EPS`
/// * `tau_obs_1 = s logistic(xi)` on (0, s)
/// * other taus `= s (2 logistic(xi) - 1)` on (-s, s)
///
/// with `s = 1 - TAU_EPS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reparam {
    pub n_time: usize,
    pub n_margins: usize,
}

/// A constrained value with its derivative and log-Jacobian terms.
#[derive(Debug, Clone, Copy)]
pub struct Mapped {
    pub value: f64,
    /// One minus the value for the unit-interval maps, computed without
    /// cancellation.
    pub complement: f64,
    pub deriv: f64,
    pub log_jac: f64,
    /// Derivative of `log_jac` in the unconstrained coordinate.
    pub dlog_jac: f64,
}

impl Reparam {
    pub fn new(n_time: usize, n_margins: usize) -> Self {
        Reparam { n_time, n_margins }
    }

    pub fn dim(&self) -> usize {
        self.n_time + self.n_margins + 1
    }

    pub fn tau_obs_index(&self, j: usize) -> usize {
        self.n_time + j
    }

    pub fn tau_lat_index(&self) -> usize {
        self.n_time + self.n_margins
    }

    #[inline]
    pub fn map_v(eta: f64) -> Mapped {
        let (s, sc) = logistic_pair(eta);
        let span = 1.0 - 2.0 * V_EPS;
        Mapped {
            value: V_EPS + span * s,
            complement: V_EPS + span * sc,
            deriv: span * s * sc,
            log_jac: span.ln() + ln_logistic(eta) + ln_logistic(-eta),
            dlog_jac: sc - s,
        }
    }

    #[inline]
    pub fn map_tau_positive(xi: f64) -> Mapped {
        let (s, sc) = logistic_pair(xi);
        Mapped {
            value: TAU_SCALE * s,
            complement: 1.0 - TAU_SCALE * s,
            deriv: TAU_SCALE * s * sc,
            log_jac: TAU_SCALE.ln() + ln_logistic(xi) + ln_logistic(-xi),
            dlog_jac: sc - s,
        }
    }

    #[inline]
    pub fn map_tau_signed(xi: f64) -> Mapped {
        let (s, sc) = logistic_pair(xi);
        let value = TAU_SCALE * (s - sc);
        Mapped {
            value,
            complement: 1.0 - value,
            deriv: 2.0 * TAU_SCALE * s * sc,
            log_jac: (2.0 * TAU_SCALE).ln() + ln_logistic(xi) + ln_logistic(-xi),
            dlog_jac: sc - s,
        }
    }

    pub fn constrain(&self, x: &[f64]) -> ContinuousParams {
        assert_eq!(x.len(), self.dim(), "unconstrained vector has wrong length");
        let v = x[..self.n_time].iter().map(|&e| Self::map_v(e).value).collect();
        let tau_obs = (0..self.n_margins)
            .map(|j| {
                let xi = x[self.tau_obs_index(j)];
                if j == 0 {
                    Self::map_tau_positive(xi).value
                } else {
                    Self::map_tau_signed(xi).value
                }
            })
            .collect();
        let tau_lat = Self::map_tau_signed(x[self.tau_lat_index()]).value;
        ContinuousParams { v, tau_obs, tau_lat }
    }

    pub fn unconstrain(&self, p: &ContinuousParams) -> Result<Vec<f64>> {
        p.validate()?;
        if p.v.len() != self.n_time || p.tau_obs.len() != self.n_margins {
            return Err(domain("parameter dimensions do not match the reparametrization"));
        }
        let mut x = Vec::with_capacity(self.dim());
        let span = 1.0 - 2.0 * V_EPS;
        for &v in &p.v {
            let s = (v - V_EPS) / span;
            let sc = (1.0 - v - V_EPS) / span;
            if !(s > 0.0 && sc > 0.0) {
                return Err(domain(format!("latent value {v} too close to the boundary")));
            }
            x.push(s.ln() - sc.ln());
        }
        for (j, &tau) in p.tau_obs.iter().enumerate() {
            x.push(if j == 0 {
                let s = tau / TAU_SCALE;
                s.ln() - (1.0 - s).ln()
            } else {
                signed_logit(tau)
            });
        }
        x.push(signed_logit(p.tau_lat));
        Ok(x)
    }

    /// Sum of the log-Jacobian terms of all coordinates.
    pub fn log_jacobian(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &e in &x[..self.n_time] {
            acc += Self::map_v(e).log_jac;
        }
        for j in 0..self.n_margins {
            let xi = x[self.tau_obs_index(j)];
            acc += if j == 0 {
                Self::map_tau_positive(xi).log_jac
            } else {
                Self::map_tau_signed(xi).log_jac
            };
        }
        acc + Self::map_tau_signed(x[self.tau_lat_index()]).log_jac
    }
}

/// `ln(logistic(x))` without overflow.
#[inline]
fn ln_logistic(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Inverse of `tau = s (2 logistic(xi) - 1)`.
fn signed_logit(tau: f64) -> f64 {
    let r = tau / TAU_SCALE;
    (1.0 + r).ln() - (1.0 - r).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rp = Reparam::new(3, 2);
        let p = ContinuousParams {
            v: vec![1e-6, 0.5, 0.999_999],
            tau_obs: vec![0.8, -0.3],
            tau_lat: 0.95,
        };
        let x = rp.unconstrain(&p).unwrap();
        let back = rp.constrain(&x);
        for (a, b) in back.v.iter().zip(&p.v) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.tau_obs.iter().zip(&p.tau_obs) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((back.tau_lat - p.tau_lat).abs() < 1e-12);
    }

    #[test]
    fn log_jacobian_matches_derivative() {
        for x in [-30.0, -3.0, -0.2, 0.0, 1.5, 25.0] {
            for map in [Reparam::map_v, Reparam::map_tau_positive, Reparam::map_tau_signed] {
                let m = map(x);
                let e = 1e-6;
                let fd = (map(x + e).value - map(x - e).value) / (2.0 * e);
                if m.deriv > 1e-8 {
                    assert!((m.log_jac - m.deriv.ln()).abs() < 1e-6, "x={x}");
                    assert!((fd / m.deriv - 1.0).abs() < 1e-6, "x={x}");
                }
                let dfd = (map(x + e).log_jac - map(x - e).log_jac) / (2.0 * e);
                assert!((dfd - m.dlog_jac).abs() < 1e-6, "x={x}");
            }
        }
    }

    #[test]
    fn first_tau_must_be_positive() {
        let p = ContinuousParams { v: vec![0.5], tau_obs: vec![-0.1], tau_lat: 0.0 };
        assert!(p.validate().is_err());
    }
}

use super::data::CopulaScaleData;
use super::params::ModelParams;
use crate::copula::{CopulaSpec, Family, ResolvedCopula, UnitPoint};
use crate::error::{domain, Result};
use rand::distr::Open01;
use rand::Rng;

/// Generating parameters of a simulated panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_time: usize,
    pub tau_obs: Vec<f64>,
    pub tau_lat: f64,
    pub m_obs: Vec<Family>,
    pub m_lat: Family,
}

/// Simulated panel with its latent path.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub data: CopulaScaleData,
    pub v: Vec<f64>,
}

impl Scenario {
    /// Six margins (gaussian, gaussian, clayton, clayton, gumbel, gumbel)
    /// with taus alternating 0.5 / 0.7, latent tau 0.7 and the given latent
    /// family, T = 1000.
    pub fn six_margin(m_lat: Family) -> Self {
        Scenario {
            n_time: 1000,
            tau_obs: vec![0.5, 0.7, 0.5, 0.7, 0.5, 0.7],
            tau_lat: 0.7,
            m_obs: vec![
                Family::gaussian(),
                Family::gaussian(),
                Family::clayton(),
                Family::clayton(),
                Family::gumbel(),
                Family::gumbel(),
            ],
            m_lat,
        }
    }

    /// Scenario 1: gaussian latent copula.
    pub fn scenario_1() -> Self {
        Self::six_margin(Family::gaussian())
    }

    /// Scenario 2: clayton latent copula.
    pub fn scenario_2() -> Self {
        Self::six_margin(Family::clayton())
    }

    /// Scenario 3: gumbel latent copula.
    pub fn scenario_3() -> Self {
        Self::six_margin(Family::gumbel())
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

    pub fn validate(&self) -> Result<()> {
        if self.n_time == 0 {
            return Err(domain("scenario needs at least one time point"));
        }
        if self.tau_obs.is_empty() || self.tau_obs.len() != self.m_obs.len() {
            return Err(domain("scenario needs one family and one tau per margin"));
        }
        for j in 0..self.n_margins() {
            self.obs_spec(j)?;
        }
        self.lat_spec()?;
        Ok(())
    }

    /// Model parameters with the given latent path.
    pub fn with_path(&self, v: Vec<f64>) -> Result<ModelParams> {
        let p = ModelParams {
            v,
            tau_obs: self.tau_obs.clone(),
            tau_lat: self.tau_lat,
            m_obs: self.m_obs.clone(),
            m_lat: self.m_lat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_params(p: &ModelParams) -> Self {
        Scenario {
            n_time: p.n_time(),
            tau_obs: p.tau_obs.clone(),
            tau_lat: p.tau_lat,
            m_obs: p.m_obs.clone(),
            m_lat: p.m_lat,
        }
    }
}

/// Draws a fully observed panel: `v_1 ~ U(0,1)`,
/// `v_t = h_lat^-1(w_t | v_{t-1})`, `u_tj = h_j^-1(e_tj | v_t)`.
pub fn simulate<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Simulated> {
    scenario.validate()?;
    let d = scenario.n_margins();
    let lat = scenario.lat_spec()?.resolve();
    let obs: Vec<ResolvedCopula> = (0..d)
        .map(|j| scenario.obs_spec(j).map(|s| s.resolve()))
        .collect::<Result<_>>()?;
    let mut v = Vec::with_capacity(scenario.n_time);
    let mut u = Vec::with_capacity(scenario.n_time * d);
    let mut prev: Option<UnitPoint> = None;
    for _ in 0..scenario.n_time {
        let vt = match prev {
            None => UnitPoint::new(rng.sample(Open01)),
            Some(p) => {
                let w: f64 = rng.sample(Open01);
                let (a, b) = lat.hinv(w, 1.0 - w, &p)?;
                UnitPoint::from_pair(a, b)
            }
        };
        for r in &obs {
            let e: f64 = rng.sample(Open01);
            u.push(r.hinv(e, 1.0 - e, &vt)?.0);
        }
        v.push(vt.u);
        prev = Some(vt);
    }
    Ok(Simulated {
        data: CopulaScaleData::from_complete(scenario.n_time, d, u)?,
        v,
    })
}

use super::data::CopulaScaleData;
use super::params::{ContinuousParams, ModelParams, PRIOR_A, PRIOR_B};
use crate::copula::{CopulaSpec, Family, ResolvedCopula, UnitPoint};
use crate::error::{domain, Result};
use crate::special::{ln_beta_fn, log_sum_exp};

fn check_dims(data: &CopulaScaleData, params: &ModelParams) -> Result<()> {
    if data.n_time() != params.n_time() || data.n_margins() != params.n_margins() {
        return Err(domain(format!(
            "data is {}x{} but parameters are {}x{}",
            data.n_time(),
            data.n_margins(),
            params.n_time(),
            params.n_margins()
        )));
    }
    Ok(())
}

/// Log-likelihood of the observed cells given the latent path:
/// `sum_j sum_{t observed} log c_j(u_tj, v_t)`. Missing cells contribute 0.
pub fn loglik_obs(data: &CopulaScaleData, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    check_dims(data, params)?;
    let mut acc = 0.0;
    for j in 0..data.n_margins() {
        acc += margin_loglik(data, j, &params.obs_spec(j)?, &params.v)?;
    }
    Ok(acc)
}

/// Contribution of margin `j` under `spec`.
pub fn margin_loglik(data: &CopulaScaleData, j: usize, spec: &CopulaSpec, v: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for t in data.observed_times(j) {
        acc += spec.log_density(data.get(t, j).unwrap_or(f64::NAN), v[t])?;
    }
    Ok(acc)
}

/// Log density of the latent path under the first-order Markov copula
/// prior, `sum_{t>=2} log c_lat(v_t, v_{t-1})`; `v_1` is uniform.
pub fn latent_prior_logdensity(v: &[f64], tau_lat: f64, m_lat: Family) -> Result<f64> {
    let spec = CopulaSpec::with_sign(m_lat, tau_lat)?;
    let mut acc = 0.0;
    for t in 1..v.len() {
        acc += spec.log_density(v[t], v[t - 1])?;
    }
    Ok(acc)
}

/// `ln B(PRIOR_A, PRIOR_B)`.
pub(crate) static PRIOR_LN_NORM: std::sync::LazyLock<f64> =
    std::sync::LazyLock::new(|| ln_beta_fn(PRIOR_A, PRIOR_B));

/// Log density of the Beta prior on the first observation tau.
pub fn log_prior_tau1(tau1: f64) -> Result<f64> {
    if !(tau1 > 0.0 && tau1 < 1.0) {
        return Err(domain(format!("first observation tau must lie in (0, 1), got {tau1}")));
    }
    Ok((PRIOR_A - 1.0) * tau1.ln() + (PRIOR_B - 1.0) * (-tau1).ln_1p() - *PRIOR_LN_NORM)
}

/// Log posterior up to the constants of the uniform priors.
pub fn log_posterior(data: &CopulaScaleData, params: &ModelParams) -> Result<f64> {
    let prior = log_prior_tau1(params.tau_obs[0])?;
    Ok(loglik_obs(data, params)? + latent_prior_logdensity(&params.v, params.tau_lat, params.m_lat)? + prior)
}

/// Conditional probabilities of each family in `families`, per margin and
/// for the latent copula.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyProbs {
    pub obs: Vec<Vec<f64>>,
    pub lat: Vec<f64>,
}

/// Per-family log-likelihood sums for each margin and for the latent chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyLogWeights {
    pub obs: Vec<Vec<f64>>,
    pub lat: Vec<f64>,
}

impl FamilyLogWeights {
    pub fn probs(&self) -> FamilyProbs {
        let norm = |w: &Vec<f64>| {
            let lse = log_sum_exp(w);
            w.iter().map(|&x| (x - lse).exp()).collect::<Vec<_>>()
        };
        FamilyProbs {
            obs: self.obs.iter().map(norm).collect(),
            lat: norm(&self.lat),
        }
    }
}

pub fn family_log_weights(
    data: &CopulaScaleData,
    cont: &ContinuousParams,
    families: &[Family],
) -> Result<FamilyLogWeights> {
    cont.validate()?;
    let vp: Vec<UnitPoint> = cont.v.iter().map(|&v| UnitPoint::new(v)).collect();
    let mut obs = Vec::with_capacity(data.n_margins());
    for j in 0..data.n_margins() {
        let tau = cont.tau_obs[j];
        let mut w = Vec::with_capacity(families.len());
        for &f in families {
            let r = ResolvedCopula::new(CopulaSpec::with_sign(f, tau)?.family(), tau);
            let mut acc = 0.0;
            for t in data.observed_times(j) {
                let up = UnitPoint::new(data.get(t, j).unwrap_or(f64::NAN));
                acc += r.log_density(&up, &vp[t]);
            }
            w.push(acc);
        }
        obs.push(w);
    }
    let mut lat = Vec::with_capacity(families.len());
    for &f in families {
        let r = ResolvedCopula::new(CopulaSpec::with_sign(f, cont.tau_lat)?.family(), cont.tau_lat);
        lat.push((1..vp.len()).map(|t| r.log_density(&vp[t], &vp[t - 1])).sum());
    }
    Ok(FamilyLogWeights { obs, lat })
}

/// Full conditionals of the family indicators given the continuous
/// parameters: `p_j(m) ∝ prod_{t observed} c_m(u_tj, v_t; tau_j)` and the
/// latent analogue over consecutive pairs.
pub fn gibbs_family_probs(
    data: &CopulaScaleData,
    cont: &ContinuousParams,
    families: &[Family],
) -> Result<FamilyProbs> {
    if families.is_empty() {
        return Err(domain("empty family set"));
    }
    Ok(family_log_weights(data, cont, families)?.probs())
}

//! The copula state space model: data, parameters, likelihood, priors,
//! the family-marginalized posterior and simulation.

mod bivariate;
mod data;
mod likelihood;
mod params;
mod simulate;
mod target;

pub use bivariate::{
    bivariate_margin_density_crosssection, bivariate_margin_density_temporal, TemporalDensity,
    DEFAULT_NODES_1D, DEFAULT_NODES_2D,
};
pub use data::CopulaScaleData;
pub use likelihood::{
    family_log_weights, gibbs_family_probs, latent_prior_logdensity, log_posterior, log_prior_tau1,
    loglik_obs, margin_loglik, FamilyLogWeights, FamilyProbs,
};
pub use params::{ContinuousParams, Mapped, ModelParams, Reparam, PRIOR_A, PRIOR_B, V_EPS};
pub use simulate::{simulate, Scenario, Simulated};
pub use target::MarginalizedPosterior;

/// Value and gradient of the family-marginalized log posterior at the
/// unconstrained point `x`.
pub fn log_posterior_marginalized(
    data: &CopulaScaleData,
    x: &[f64],
    families: &[crate::copula::Family],
) -> crate::error::Result<(f64, Vec<f64>)> {
    let mut target = MarginalizedPosterior::new(data, families)?;
    let mut grad = vec![0.0; x.len()];
    let value = target.log_density_grad(x, &mut grad);
    Ok((value, grad))
}

use super::data::CopulaScaleData;
use super::likelihood::{FamilyLogWeights, PRIOR_LN_NORM};
use super::params::{ContinuousParams, Reparam, PRIOR_A, PRIOR_B};
use crate::copula::{Family, ResolvedCopula, UnitPoint};
use crate::error::{domain, Result};
use crate::special::softmax_into;

/// Family-marginalized log posterior over the unconstrained parameters,
/// including the log-Jacobian of [`Reparam`], with its exact gradient.
///
/// Each margin contributes `log sum_m exp(sum_t log c_m(u_tj, v_t; tau_j))`
/// and the latent chain the analogous term over consecutive pairs.
#[derive(Clone)]
pub struct MarginalizedPosterior {
    reparam: Reparam,
    families: Vec<Family>,
    with_t4: bool,
    /// Observed cells per margin as `(t, point)`.
    obs: Vec<Vec<(usize, UnitPoint)>>,
    work: Workspace,
}

#[derive(Clone, Default)]
struct Workspace {
    vp: Vec<UnitPoint>,
    dv: Vec<f64>,
    grad_v: Vec<f64>,
    /// Per family: (sum, d/dtau), then the per-cell d/dv rows.
    sums: Vec<f64>,
    dtau: Vec<f64>,
    weights: Vec<f64>,
}

impl MarginalizedPosterior {
    pub fn new(data: &CopulaScaleData, families: &[Family]) -> Result<Self> {
        if families.is_empty() {
            return Err(domain("empty family set"));
        }
        data.require_observed_margins()?;
        let with_t4 = families.iter().any(|f| f.needs_t4());
        let obs = (0..data.n_margins())
            .map(|j| {
                data.observed_times(j)
                    .map(|t| {
                        let u = data.get(t, j).unwrap_or(f64::NAN);
                        (t, UnitPoint::from_pair_lean(u, 1.0 - u, with_t4))
                    })
                    .collect()
            })
            .collect();
        Ok(MarginalizedPosterior {
            reparam: Reparam::new(data.n_time(), data.n_margins()),
            families: families.to_vec(),
            with_t4,
            obs,
            work: Workspace::default(),
        })
    }

    pub fn reparam(&self) -> Reparam {
        self.reparam
    }

    pub fn dim(&self) -> usize {
        self.reparam.dim()
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    /// Value and gradient at `x`; `grad` is overwritten. Returns `-inf` if
    /// the value is not finite.
    pub fn log_density_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let rp = self.reparam;
        let (n_time, n_margins) = (rp.n_time, rp.n_margins);
        assert_eq!(x.len(), rp.dim());
        assert_eq!(grad.len(), rp.dim());
        let n_fam = self.families.len();
        let w = &mut self.work;
        grad.fill(0.0);

        let mut total = 0.0;
        w.vp.clear();
        w.grad_v.clear();
        w.grad_v.resize(n_time, 0.0);
        let mut v_deriv = Vec::with_capacity(n_time);
        for (t, &eta) in x[..n_time].iter().enumerate() {
            let m = Reparam::map_v(eta);
            w.vp.push(UnitPoint::from_pair_lean(m.value, m.complement, self.with_t4));
            v_deriv.push(m.deriv);
            total += m.log_jac;
            grad[t] = m.dlog_jac;
        }

        w.sums.resize(n_fam, 0.0);
        w.dtau.resize(n_fam, 0.0);
        w.weights.resize(n_fam, 0.0);

        for j in 0..n_margins {
            let k = rp.tau_obs_index(j);
            let m = if j == 0 {
                Reparam::map_tau_positive(x[k])
            } else {
                Reparam::map_tau_signed(x[k])
            };
            let tau = m.value;
            let cells = &self.obs[j];
            let n_cells = cells.len();
            w.dv.resize(n_fam * n_cells, 0.0);
            for (fi, fam) in self.families.iter().enumerate() {
                let r = ResolvedCopula::new(fam.for_tau(tau), tau);
                let row = &mut w.dv[fi * n_cells..(fi + 1) * n_cells];
                let (s, dt) = r.accumulate_cells(cells, &w.vp, row);
                w.sums[fi] = s;
                w.dtau[fi] = dt;
            }
            total += softmax_into(&w.sums, &mut w.weights);
            let mut dtau = 0.0;
            for fi in 0..n_fam {
                let wt = w.weights[fi];
                if wt == 0.0 {
                    continue;
                }
                dtau += wt * w.dtau[fi];
                let row = &w.dv[fi * n_cells..(fi + 1) * n_cells];
                for (&d, (t, _)) in row.iter().zip(cells) {
                    w.grad_v[*t] += wt * d;
                }
            }
            if j == 0 {
                // Beta prior on the first tau
                total += (PRIOR_A - 1.0) * tau.ln() + (PRIOR_B - 1.0) * m.complement.ln() - *PRIOR_LN_NORM;
                dtau += (PRIOR_A - 1.0) / tau - (PRIOR_B - 1.0) / m.complement;
            }
            total += m.log_jac;
            grad[k] = dtau * m.deriv + m.dlog_jac;
        }

        // latent chain
        let k = rp.tau_lat_index();
        let m = Reparam::map_tau_signed(x[k]);
        let tau = m.value;
        let n_pairs = n_time.saturating_sub(1);
        w.dv.resize(2 * n_fam * n_pairs, 0.0);
        for (fi, fam) in self.families.iter().enumerate() {
            let r = ResolvedCopula::new(fam.for_tau(tau), tau);
            let row = &mut w.dv[2 * fi * n_pairs..2 * (fi + 1) * n_pairs];
            let (s, dt) = r.accumulate_chain(&w.vp, row);
            w.sums[fi] = s;
            w.dtau[fi] = dt;
        }
        total += softmax_into(&w.sums, &mut w.weights);
        let mut dtau = 0.0;
        for fi in 0..n_fam {
            let wt = w.weights[fi];
            if wt == 0.0 {
                continue;
            }
            dtau += wt * w.dtau[fi];
            let row = &w.dv[2 * fi * n_pairs..2 * (fi + 1) * n_pairs];
            for t in 1..n_time {
                w.grad_v[t] += wt * row[2 * (t - 1)];
                w.grad_v[t - 1] += wt * row[2 * (t - 1) + 1];
            }
        }
        total += m.log_jac;
        grad[k] = dtau * m.deriv + m.dlog_jac;

        for t in 0..n_time {
            grad[t] += w.grad_v[t] * v_deriv[t];
        }
        if total.is_finite() && grad.iter().all(|g| g.is_finite()) {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Value only.
    pub fn log_density(&mut self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.log_density_grad(x, &mut g)
    }

    /// Per-family log-likelihood sums at the constrained image of `x`.
    pub fn family_log_weights(&self, x: &[f64]) -> FamilyLogWeights {
        let rp = self.reparam;
        let cont = rp.constrain(x);
        let vp: Vec<UnitPoint> = x[..rp.n_time]
            .iter()
            .map(|&eta| {
                let m = Reparam::map_v(eta);
                UnitPoint::from_pair_lean(m.value, m.complement, self.with_t4)
            })
            .collect();
        let obs = (0..rp.n_margins)
            .map(|j| {
                let tau = cont.tau_obs[j];
                self.families
                    .iter()
                    .map(|fam| {
                        let r = ResolvedCopula::new(fam.for_tau(tau), tau);
                        self.obs[j].iter().map(|(t, up)| r.log_density(up, &vp[*t])).sum()
                    })
                    .collect()
            })
            .collect();
        let lat = self
            .families
            .iter()
            .map(|fam| {
                let r = ResolvedCopula::new(fam.for_tau(cont.tau_lat), cont.tau_lat);
                (1..rp.n_time).map(|t| r.log_density(&vp[t], &vp[t - 1])).sum()
            })
            .collect();
        FamilyLogWeights { obs, lat }
    }

    pub fn constrain(&self, x: &[f64]) -> ContinuousParams {
        self.reparam.constrain(x)
    }
}

use super::simulate::Scenario;
use crate::copula::{ResolvedCopula, UnitPoint};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Default Gauss–Legendre node counts for the implied bivariate densities.
pub const DEFAULT_NODES_1D: usize = 64;
pub const DEFAULT_NODES_2D: usize = 64;

fn check_margin(s: &Scenario, j: usize) -> Result<()> {
    if j >= s.n_margins() {
        return Err(Error::Range(format!("margin {} outside 1..={}", j + 1, s.n_margins())));
    }
    Ok(())
}

/// Nodes on (0,1) as unit points with their weights.
fn unit_nodes(n: usize, with_t4: bool) -> Vec<(UnitPoint, f64)> {
    gauss_legendre(n)
        .on_interval(0.0, 1.0)
        .map(|(x, w)| (UnitPoint::from_pair_lean(x, 1.0 - x, with_t4), w))
        .collect()
}

/// Implied copula density of `(U_tj, U_tj')` at one time point:
/// `∫ c_j(u, v) c_j'(u', v) dv` by an `nodes`-point rule on (0, 1).
pub fn bivariate_margin_density_crosssection(
    scenario: &Scenario,
    j: usize,
    jp: usize,
    u: f64,
    up: f64,
    nodes: usize,
) -> Result<f64> {
    check_margin(scenario, j)?;
    check_margin(scenario, jp)?;
    let a = scenario.obs_spec(j)?;
    let b = scenario.obs_spec(jp)?;
    let t4 = a.family().needs_t4() || b.family().needs_t4();
    let (ra, rb) = (a.resolve(), b.resolve());
    let (pu, pup) = (
        UnitPoint::from_pair_lean(u, 1.0 - u, t4),
        UnitPoint::from_pair_lean(up, 1.0 - up, t4),
    );
    let mut acc = 0.0;
    for (v, w) in unit_nodes(nodes, t4) {
        acc += w * (ra.log_density(&pu, &v) + rb.log_density(&pup, &v)).exp();
    }
    Ok(acc)
}

/// Implied copula density of `(U_tj, U_{t-1,j})`:
/// `∬ c_j(u, v_t) c_j(u_prev, v_{t-1}) c_lat(v_t, v_{t-1}) dv_t dv_{t-1}`
/// on an `nodes x nodes` tensor rule.
pub fn bivariate_margin_density_temporal(
    scenario: &Scenario,
    j: usize,
    u: f64,
    u_prev: f64,
    nodes: usize,
) -> Result<f64> {
    TemporalDensity::new(scenario, j, nodes)?.eval(u, u_prev)
}

/// Reusable evaluator for grids of temporal densities.
pub struct TemporalDensity {
    obs: ResolvedCopula,
    nodes: Vec<(UnitPoint, f64)>,
    /// `c_lat(v_a, v_b)` times both weights, row-major over node pairs.
    lat: Vec<f64>,
    t4: bool,
}

impl TemporalDensity {
    pub fn new(scenario: &Scenario, j: usize, nodes: usize) -> Result<Self> {
        check_margin(scenario, j)?;
        let obs = scenario.obs_spec(j)?;
        let lat = scenario.lat_spec()?;
        let t4 = obs.family().needs_t4() || lat.family().needs_t4();
        let pts = unit_nodes(nodes, t4);
        let rl = lat.resolve();
        let mut table = Vec::with_capacity(nodes * nodes);
        for (va, wa) in &pts {
            for (vb, wb) in &pts {
                table.push(wa * wb * rl.log_density(va, vb).exp());
            }
        }
        Ok(TemporalDensity { obs: obs.resolve(), nodes: pts, lat: table, t4 })
    }

    pub fn eval(&self, u: f64, u_prev: f64) -> Result<f64> {
        if !u.is_finite() || !u_prev.is_finite() {
            return Err(crate::error::domain("non-finite density argument"));
        }
        let pu = UnitPoint::from_pair_lean(u, 1.0 - u, self.t4);
        let pp = UnitPoint::from_pair_lean(u_prev, 1.0 - u_prev, self.t4);
        let a: Vec<f64> = self.nodes.iter().map(|(v, _)| self.obs.log_density(&pu, v).exp()).collect();
        let b: Vec<f64> = self.nodes.iter().map(|(v, _)| self.obs.log_density(&pp, v).exp()).collect();
        let n = self.nodes.len();
        let mut acc = 0.0;
        for (ia, &fa) in a.iter().enumerate() {
            let row = &self.lat[ia * n..(ia + 1) * n];
            let inner: f64 = row.iter().zip(&b).map(|(l, fb)| l * fb).sum();
            acc += fa * inner;
        }
        Ok(acc)
    }
}

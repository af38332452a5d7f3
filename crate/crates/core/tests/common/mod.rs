//! Independent numerical oracles shared by the integration and acceptance
//! suites. Everything here works through the public API only.
#![allow(dead_code)]

use copula_ssm::copula::{Clayton, CopulaSpec, Family, Gumbel, Rotation};
use rand::Rng;

/// Every family variant the model can use, including survival versions.
pub fn family_variants() -> Vec<Family> {
    vec![
        Family::gaussian(),
        Family::t4(),
        Family::clayton(),
        Family::gumbel(),
        Family::new(&Clayton, Rotation::R180).unwrap(),
        Family::new(&Gumbel, Rotation::R180).unwrap(),
    ]
}

/// Specs for every family variant at each `tau`.
pub fn spec_grid(taus: &[f64]) -> Vec<CopulaSpec> {
    let mut out = Vec::new();
    for f in family_variants() {
        for &tau in taus {
            out.push(CopulaSpec::with_sign(f, tau).unwrap());
        }
    }
    out
}

pub fn random_spec<R: Rng>(rng: &mut R, max_abs_tau: f64) -> CopulaSpec {
    let fams = family_variants();
    let f = fams[rng.random_range(0..fams.len())];
    let tau = rng.random_range(-max_abs_tau..max_abs_tau);
    CopulaSpec::with_sign(f, tau).unwrap()
}

/// Midpoint-rule mass of the density over the unit square on an n x n grid.
pub fn density_mass(spec: &CopulaSpec, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * h;
        for j in 0..n {
            let v = (j as f64 + 0.5) * h;
            acc += spec.density(u, v).unwrap();
        }
    }
    acc * h * h
}

/// Strong dependence of both signs.
pub const STRONG_TAUS: [f64; 9] = [-0.9, -0.7, -0.5, -0.2, 0.0, 0.3, 0.6, 0.8, 0.9];
/// Up to |tau| = 0.7, where the corner singularity of Clayton densities is
/// still resolved by a 400 x 400 unit-square grid.
pub const MODERATE_TAUS: [f64; 7] = [-0.7, -0.5, -0.2, 0.0, 0.3, 0.5, 0.7];

/// Mass of the density on the normal-score scale,
/// `∬ c(Phi(x), Phi(y)) phi(x) phi(y) dx dy`, midpoint rule on an n x n grid
/// over `[-8, 8]^2`.
pub fn density_mass_normal_scores(spec: &CopulaSpec, n: usize) -> f64 {
    let (a, b) = (-8.0, 8.0);
    let h = (b - a) / n as f64;
    let nodes: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = a + (i as f64 + 0.5) * h;
            (copula_ssm::special::norm_cdf(x), std_normal_pdf(x))
        })
        .collect();
    let mut acc = 0.0;
    for &(u, pu) in &nodes {
        for &(v, pv) in &nodes {
            acc += spec.density(u, v).unwrap() * pu * pv;
        }
    }
    acc * h * h
}

/// The same copula with its arguments exchanged: for exchangeable base
/// families only 90 and 270 degree rotations change.
pub fn transposed(spec: &CopulaSpec) -> CopulaSpec {
    let f = spec.family();
    let rot = match f.rotation() {
        Rotation::R90 => Rotation::R270,
        Rotation::R270 => Rotation::R90,
        r => r,
    };
    CopulaSpec::new(Family::new(f.base(), rot).unwrap(), spec.tau()).unwrap()
}

/// Kendall's tau as `4 E[C(U,V)] - 1`, integrated by parts into
/// `1 - 4 ∬ dC/du dC/dv du dv` so the integrand stays bounded.
pub fn kendall_integral(spec: &CopulaSpec, n: usize) -> f64 {
    let tr = transposed(spec);
    let h = 1.0 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let u = (i as f64 + 0.5) * h;
        for j in 0..n {
            let v = (j as f64 + 0.5) * h;
            let dc_dv = spec.hfunc(u, v).unwrap();
            let dc_du = tr.hfunc(v, u).unwrap();
            acc += dc_du * dc_dv;
        }
    }
    1.0 - 4.0 * acc * h * h
}

/// Central difference of `f` at `x` with step `e`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, e: f64) -> f64 {
    (f(x + e) - f(x - e)) / (2.0 * e)
}

/// Bivariate standard normal density with correlation `rho`.
pub fn bvn_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let d = 1.0 - rho * rho;
    (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * d)).exp()
        / (2.0 * std::f64::consts::PI * d.sqrt())
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Result line in the acceptance and study outputs.
pub fn report(name: &str, ok: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

use copula_ssm::model::{CopulaScaleData, Scenario};

/// Copula-scale log-likelihood with the latent path integrated out, by a
/// forward recursion on a trapezoid grid in `w = Phi^-1(v)` (step 0.05 on
/// [-10, 10]).
pub fn quadrature_loglik(scenario: &Scenario, data: &CopulaScaleData) -> f64 {
    use copula_ssm::special::norm_cdf;
    let h = 0.05;
    let grid: Vec<f64> = (0..=400).map(|i| -10.0 + i as f64 * h).collect();
    let vs: Vec<f64> = grid.iter().map(|&w| norm_cdf(w)).collect();
    let phis: Vec<f64> = grid.iter().map(|&w| std_normal_pdf(w)).collect();
    let lat = scenario.lat_spec().unwrap();
    let obs: Vec<CopulaSpec> = (0..scenario.n_margins()).map(|j| scenario.obs_spec(j).unwrap()).collect();
    let emission = |t: usize, k: usize| -> f64 {
        let mut acc = 0.0;
        for (j, spec) in obs.iter().enumerate() {
            if let Some(u) = data.get(t, j) {
                acc += spec.log_density(u, vs[k]).unwrap();
            }
        }
        acc.exp()
    };
    let n = grid.len();
    let mut alpha: Vec<f64> = (0..n).map(|k| phis[k] * emission(0, k)).collect();
    let mut log_scale = 0.0;
    for t in 1..data.n_time() {
        let mut next = vec![0.0; n];
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                if alpha[i] != 0.0 {
                    s += alpha[i] * h * lat.density(vs[k], vs[i]).unwrap();
                }
            }
            next[k] = s * phis[k] * emission(t, k);
        }
        let norm: f64 = next.iter().sum();
        log_scale += norm.ln();
        alpha = next.iter().map(|a| a / norm).collect();
    }
    log_scale + (alpha.iter().sum::<f64>() * h).ln()
}

/// All-Gaussian scenario with the given correlations.
pub fn gaussian_scenario(n_time: usize, rho_obs: &[f64], rho_lat: f64) -> Scenario {
    let tau = |r: f64| r.asin() / std::f64::consts::FRAC_PI_2;
    Scenario {
        n_time,
        tau_obs: rho_obs.iter().map(|&r| tau(r)).collect(),
        tau_lat: tau(rho_lat),
        m_obs: vec![Family::gaussian(); rho_obs.len()],
        m_lat: Family::gaussian(),
    }
}

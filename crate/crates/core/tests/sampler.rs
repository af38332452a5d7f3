mod common;

use copula_ssm::copula::Family;
use copula_ssm::model::{gibbs_family_probs, CopulaScaleData, MarginalizedPosterior, Reparam, Scenario};
use copula_ssm::quadrature::gauss_legendre;
use copula_ssm::sampler::{
    chain_rng, fit, nuts_sample, run_chain, sample_families, LogDensity, SamplerConfig,
};
use copula_ssm::special::logistic_pair;
use copula_ssm::copula::{CopulaSpec, ResolvedCopula, UnitPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone)]
struct StdNormal(usize);

impl LogDensity for StdNormal {
    fn dim(&self) -> usize {
        self.0
    }
    fn log_density_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = -xi;
        }
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Beta(a, b) pushed to the real line through the logistic map, Jacobian
/// included.
#[derive(Clone)]
struct LogitBeta {
    a: f64,
    b: f64,
}

impl LogDensity for LogitBeta {
    fn dim(&self) -> usize {
        1
    }
    fn log_density_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (s, c) = logistic_pair(x[0]);
        grad[0] = self.a * c - self.b * s;
        self.a * s.ln() + self.b * c.ln()
    }
}

/// Correlated 2-D Gaussian with correlation 0.9.
#[derive(Clone)]
struct Corr2;

impl Corr2 {
    const RHO: f64 = 0.9;
}

impl LogDensity for Corr2 {
    fn dim(&self) -> usize {
        2
    }
    fn log_density_grad(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k = 1.0 / (1.0 - Self::RHO * Self::RHO);
        grad[0] = -k * (x[0] - Self::RHO * x[1]);
        grad[1] = -k * (x[1] - Self::RHO * x[0]);
        -0.5 * k * (x[0] * x[0] - 2.0 * Self::RHO * x[0] * x[1] + x[1] * x[1])
    }
}

fn cfg(iterations: usize, warmup: usize, chains: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { iterations, warmup, chains, seed, ..SamplerConfig::default() }
}

fn lag1(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / var
}

#[test]
fn standard_normal_moments() {
    let out = nuts_sample(&StdNormal(10), &[0.0; 10], &cfg(1500, 500, 4, 11)).unwrap();
    let n: usize = out.iter().map(|c| c.positions.len()).sum();
    assert_eq!(n, 4000);
    for i in 0..10 {
        let xs: Vec<f64> = out.iter().flat_map(|c| c.positions.iter().map(move |p| p[i])).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() < 0.1, "coordinate {i}: mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "coordinate {i}: variance {var}");
    }
    let accept: f64 = out.iter().flat_map(|c| c.stats.iter().map(|s| s.accept_stat)).sum::<f64>() / n as f64;
    assert!((accept - 0.8).abs() < 0.1, "mean acceptance {accept}");
}

#[test]
fn beta_prior_through_logit() {
    let target = LogitBeta { a: 10.0, b: 1.5 };
    let out = nuts_sample(&target, &[0.0], &cfg(3000, 1000, 4, 5)).unwrap();
    let xs: Vec<f64> = out
        .iter()
        .flat_map(|c| c.positions.iter().map(|p| logistic_pair(p[0]).0))
        .collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 10.0 / 11.5).abs() < 0.02, "{mean}");
}

#[test]
fn zero_tree_depth_takes_single_leapfrog() {
    let c = SamplerConfig { max_tree_depth: 0, ..cfg(200, 100, 1, 3) };
    let out = nuts_sample(&StdNormal(3), &[0.0; 3], &c).unwrap();
    assert_eq!(out[0].positions.len(), 100);
    assert!(out[0].stats.iter().all(|s| s.n_leapfrog == 1));
    assert!(out[0].stats.iter().all(|s| (0.0..=1.0).contains(&s.accept_stat)));
}

#[test]
fn chains_are_deterministic_across_thread_counts() {
    let c = cfg(300, 100, 3, 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| nuts_sample(&StdNormal(4), &[0.0; 4], &c).unwrap())
    };
    let a = run(1);
    let b = run(3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.positions, y.positions);
        assert_eq!(x.stats, y.stats);
    }
    assert_ne!(a[0].positions, a[1].positions);
}

#[test]
fn nuts_beats_random_walk_at_lag_one() {
    let out = nuts_sample(&Corr2, &[0.0; 2], &cfg(2000, 500, 1, 17)).unwrap();
    let xs: Vec<f64> = out[0].positions.iter().map(|p| p[0]).collect();
    let nuts_ac = lag1(&xs);

    // random walk Metropolis tuned to the optimal 2-D scale for this target
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut target = Corr2;
    let mut g = [0.0; 2];
    let mut x = [0.0, 0.0];
    let mut lp = target.log_density_grad(&x, &mut g);
    let scale = 2.38 / 2f64.sqrt();
    let (l11, l21, l22) = (1.0, Corr2::RHO, (1.0 - Corr2::RHO * Corr2::RHO).sqrt());
    let mut rw = Vec::with_capacity(10_000);
    for _ in 0..10_000 {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let prop = [x[0] + scale * l11 * e1, x[1] + scale * (l21 * e1 + l22 * e2)];
        let lp_prop = target.log_density_grad(&prop, &mut g);
        if rng.random::<f64>().ln() < lp_prop - lp {
            x = prop;
            lp = lp_prop;
        }
        rw.push(x[0]);
    }
    let rw_ac = lag1(&rw);
    assert!(nuts_ac < rw_ac, "nuts {nuts_ac} vs random walk {rw_ac}");
}

fn small_data(seed: u64, n_time: usize, m_obs: Vec<Family>, tau_obs: Vec<f64>) -> CopulaScaleData {
    let scen = Scenario { n_time, tau_obs, tau_lat: 0.6, m_obs, m_lat: Family::gaussian() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    copula_ssm::model::simulate(&scen, &mut rng).unwrap().data
}

#[test]
fn gibbs_frequencies_match_full_conditionals() {
    let data = small_data(4, 30, vec![Family::clayton(), Family::gumbel()], vec![0.6, -0.4]);
    let fams = vec![Family::gaussian(), Family::t4(), Family::clayton(), Family::gumbel()];
    let target = MarginalizedPosterior::new(&data, &fams).unwrap();
    let rp: Reparam = target.reparam();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<f64> = (0..rp.dim()).map(|_| rng.random_range(-0.7..0.7)).collect();
    let cont = rp.constrain(&x);
    let probs = gibbs_family_probs(&data, &cont, &fams).unwrap();

    let n = 100_000;
    let mut counts = vec![vec![0usize; fams.len()]; data.n_margins() + 1];
    let mut grng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..n {
        let (m_obs, m_lat) = sample_families(&target, &x, &mut grng);
        for (j, f) in m_obs.iter().enumerate() {
            counts[j][fams.iter().position(|g| g == f).unwrap()] += 1;
        }
        counts[data.n_margins()][fams.iter().position(|g| *g == m_lat).unwrap()] += 1;
    }
    let expected: Vec<&Vec<f64>> = probs.obs.iter().chain(std::iter::once(&probs.lat)).collect();
    for (row, p) in counts.iter().zip(expected) {
        for (c, q) in row.iter().zip(p) {
            let freq = *c as f64 / n as f64;
            assert!((freq - q).abs() < 0.01, "{freq} vs {q}");
        }
    }
}

/// Posterior probabilities of the four (m_obs, m_lat) combinations for one
/// margin and T = 3, by tensor Gauss-Legendre quadrature over
/// (tau_obs, tau_lat, v_1, v_2, v_3). Each `v_t` is integrated through the
/// conditional quantile of `v` given `u_t` under the observation copula, so
/// the observation density is absorbed exactly and only the latent densities
/// remain in the integrand.
fn brute_force_family_posterior(u: &[f64; 3], fams: &[Family; 2], n_tau: usize, n_v: usize) -> [[f64; 2]; 2] {
    let gl_tau = gauss_legendre(n_tau);
    let gl_v = gauss_legendre(n_v);
    let taus1: Vec<(f64, f64)> = gl_tau.on_interval(0.0, 1.0).collect();
    let taus_lat: Vec<(f64, f64)> = gl_tau.on_interval(-1.0, 1.0).collect();
    let ws: Vec<(f64, f64)> = gl_v.on_interval(0.0, 1.0).collect();
    let ln_beta = statrs::function::beta::ln_beta(10.0, 1.5);
    let mut mass = [[0.0; 2]; 2];
    for (a, fa) in fams.iter().enumerate() {
        for &(t1, w1) in &taus1 {
            let prior = ((9.0 * t1.ln() + 0.5 * (1.0 - t1).ln()) - ln_beta).exp();
            // exchangeable for positive tau, so the conditional of v given u
            // is the h-function with the arguments swapped
            let obs_spec = CopulaSpec::with_sign(*fa, t1).unwrap();
            let v: Vec<Vec<UnitPoint>> = u
                .iter()
                .map(|&ut| ws.iter().map(|&(w, _)| UnitPoint::new(obs_spec.hinv(w, ut).unwrap())).collect())
                .collect();
            for (b, fb) in fams.iter().enumerate() {
                for &(tl, wl) in &taus_lat {
                    let lat = ResolvedCopula::new(fb.for_tau(tl), tl);
                    let mut s = 0.0;
                    for (j, &(_, wj)) in ws.iter().enumerate() {
                        let v2 = &v[1][j];
                        let back: f64 = ws
                            .iter()
                            .zip(&v[0])
                            .map(|(&(_, wi), v1)| wi * lat.log_density(v2, v1).exp())
                            .sum();
                        let fwd: f64 = ws
                            .iter()
                            .zip(&v[2])
                            .map(|(&(_, wk), v3)| wk * lat.log_density(v3, v2).exp())
                            .sum();
                        s += wj * back * fwd;
                    }
                    // uniform prior on tau_lat has density 1/2
                    mass[a][b] += w1 * wl * 0.5 * prior * s;
                }
            }
        }
    }
    let total: f64 = mass.iter().flatten().sum();
    mass.map(|r| r.map(|m| m / total))
}

#[test]
fn marginalize_then_gibbs_matches_enumeration() {
    let u = [0.15, 0.35, 0.95];
    let fams = [Family::gaussian(), Family::clayton()];
    let exact = brute_force_family_posterior(&u, &fams, 30, 60);
    let coarse = brute_force_family_posterior(&u, &fams, 20, 40);
    for a in 0..2 {
        for b in 0..2 {
            assert!((exact[a][b] - coarse[a][b]).abs() < 1e-3, "quadrature not converged: {exact:?} {coarse:?}");
        }
    }

    let rows: Vec<Vec<Option<f64>>> = u.iter().map(|&x| vec![Some(x)]).collect();
    let data = CopulaScaleData::from_rows(&rows).unwrap();
    let draws = fit(&data, &fams, &cfg(6000, 1000, 4, 2024)).unwrap();
    let mut freq = [[0.0; 2]; 2];
    for d in &draws.draws {
        let a = fams.iter().position(|f| *f == d.params.m_obs[0]).unwrap();
        let b = fams.iter().position(|f| *f == d.params.m_lat).unwrap();
        freq[a][b] += 1.0 / draws.len() as f64;
    }
    for a in 0..2 {
        for b in 0..2 {
            assert!(
                (freq[a][b] - exact[a][b]).abs() < 0.03,
                "({a},{b}): sampled {} vs enumerated {}",
                freq[a][b],
                exact[a][b]
            );
        }
    }
}

#[test]
fn fit_is_bit_identical_for_same_seed() {
    let data = small_data(6, 40, vec![Family::gaussian(), Family::clayton()], vec![0.5, 0.4]);
    let fams = vec![Family::gaussian(), Family::clayton()];
    let c = cfg(200, 100, 2, 7);
    let a = fit(&data, &fams, &c).unwrap();
    let b = fit(&data, &fams, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 200);
    let mut bytes_a = Vec::new();
    let mut bytes_b = Vec::new();
    a.write_csv(&mut bytes_a).unwrap();
    b.write_csv(&mut bytes_b).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn draws_csv_round_trip() {
    let data = small_data(9, 20, vec![Family::gaussian(), Family::gumbel()], vec![0.5, -0.3]);
    let fams = vec![Family::gaussian(), Family::gumbel()];
    let draws = fit(&data, &fams, &cfg(120, 60, 2, 1)).unwrap();
    let mut main = Vec::new();
    let mut latent = Vec::new();
    draws.write_csv(&mut main).unwrap();
    draws.write_latent_csv(&mut latent).unwrap();
    let back = copula_ssm::sampler::PosteriorDraws::read_csv(&main[..], &latent[..], &fams).unwrap();
    assert_eq!(back.len(), draws.len());
    for (x, y) in back.draws.iter().zip(&draws.draws) {
        assert_eq!(x.params, y.params);
        assert_eq!(x.log_post.to_bits(), y.log_post.to_bits());
        assert_eq!((x.chain, x.iter), (y.chain, y.iter));
    }
}

#[test]
fn small_gaussian_fit_recovers_dependence() {
    let data = small_data(12, 150, vec![Family::gaussian(), Family::gaussian()], vec![0.6, 0.4]);
    let draws = fit(&data, &[Family::gaussian()], &cfg(800, 400, 2, 3)).unwrap();
    let m0 = draws.tau_obs(0).iter().sum::<f64>() / draws.len() as f64;
    let m1 = draws.tau_obs(1).iter().sum::<f64>() / draws.len() as f64;
    let ml = draws.tau_lat().iter().sum::<f64>() / draws.len() as f64;
    assert!((m0 - 0.6).abs() < 0.15 && (m1 - 0.4).abs() < 0.15, "{m0} {m1}");
    assert!((ml - 0.6).abs() < 0.2, "{ml}");
    assert!(draws.diagnostics.rhat("tau_obs_1").unwrap() < 1.1);
    assert!(draws.diagnostics.ess("tau_lat").unwrap() > 50.0);
}

#[test]
fn warmup_must_be_shorter_than_run() {
    assert!(SamplerConfig { warmup: 3000, ..SamplerConfig::default() }.validate().is_err());
    let mut t = StdNormal(2);
    let mut rng = chain_rng(1, 0);
    assert!(run_chain(&mut t, &[0.0; 3], &cfg(10, 5, 1, 1), &mut rng).is_err());
}


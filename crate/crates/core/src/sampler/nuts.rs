//! Multinomial No-U-Turn sampler with a diagonal metric.

use super::LogDensity;
use crate::special::log_add_exp;
use rand::Rng;
use rand_distr::StandardNormal;

/// Energy error above which a trajectory is flagged divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

/// A point in phase space with the cached target value and gradient.
#[derive(Clone, Debug)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    pub fn new<T: LogDensity + ?Sized>(target: &mut T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let logp = target.log_density_grad(&q, &mut grad);
        let p = vec![0.0; q.len()];
        PhasePoint { q, p, logp, grad }
    }

    fn kinetic(&self, inv_metric: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
    }

    /// Hamiltonian; NaN is mapped to +inf.
    pub fn hamiltonian(&self, inv_metric: &[f64]) -> f64 {
        let h = -self.logp + self.kinetic(inv_metric);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn p_sharp(&self, inv_metric: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
    }
}

/// Statistics of one transition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TransitionStats {
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

/// Sampler state that persists across transitions.
pub struct Nuts<'a, T: LogDensity + ?Sized> {
    pub target: &'a mut T,
    pub inv_metric: Vec<f64>,
    pub step_size: f64,
    pub max_depth: usize,
}

/// Per-transition bookkeeping shared by the recursive tree builder.
struct TreeCtx<'r, R: Rng> {
    rng: &'r mut R,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn add_into(acc: &mut [f64], b: &[f64]) {
    for (x, y) in acc.iter_mut().zip(b) {
        *x += y;
    }
}

impl<'a, T: LogDensity + ?Sized> Nuts<'a, T> {
    pub fn new(target: &'a mut T, inv_metric: Vec<f64>, step_size: f64, max_depth: usize) -> Self {
        Nuts { target, inv_metric, step_size, max_depth }
    }

    pub fn sample_momentum<R: Rng>(&self, z: &mut PhasePoint, rng: &mut R) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    /// One leapfrog step of size `eps`.
    pub fn leapfrog(&mut self, z: &mut PhasePoint, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        z.logp = self.target.log_density_grad(&z.q, &mut z.grad);
        if !z.logp.is_finite() {
            z.logp = f64::NEG_INFINITY;
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }

    /// One NUTS transition from `z` (momentum is resampled).
    pub fn transition<R: Rng>(&mut self, z: &mut PhasePoint, rng: &mut R) -> TransitionStats {
        self.sample_momentum(z, rng);
        let m = self.inv_metric.clone();
        let mut z_fwd = z.clone();
        let mut z_bck = z.clone();
        let mut z_sample = z.clone();
        let mut z_propose = z.clone();

        let p_sharp = z.p_sharp(&m);
        let (mut p_fwd_fwd, mut p_sharp_fwd_fwd) = (z.p.clone(), p_sharp.clone());
        let (mut p_fwd_bck, mut p_sharp_fwd_bck) = (z.p.clone(), p_sharp.clone());
        let (mut p_bck_fwd, mut p_sharp_bck_fwd) = (z.p.clone(), p_sharp.clone());
        let (mut p_bck_bck, mut p_sharp_bck_bck) = (z.p.clone(), p_sharp);
        let mut rho = z.p.clone();
        let mut log_sum_weight = 0.0;

        let h0 = z.hamiltonian(&m);
        let mut ctx = TreeCtx { rng, h0, n_leapfrog: 0, sum_metro_prob: 0.0, divergent: false };
        let mut depth = 0;
        // a zero depth limit still takes a single leapfrog step
        let max_depth = self.max_depth.max(1);
        let dim = z.q.len();

        while depth < max_depth {
            let mut rho_fwd = vec![0.0; dim];
            let mut rho_bck = vec![0.0; dim];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid = if ctx.rng.random::<f64>() > 0.5 {
                let mut cur = z_fwd.clone();
                rho_bck.copy_from_slice(&rho);
                p_bck_fwd.copy_from_slice(&p_fwd_bck);
                p_sharp_bck_fwd.copy_from_slice(&p_sharp_fwd_bck);
                let ok = self.build_tree(
                    depth,
                    &mut cur,
                    &mut z_propose,
                    &mut p_sharp_fwd_bck,
                    &mut p_sharp_fwd_fwd,
                    &mut rho_fwd,
                    &mut p_fwd_bck,
                    &mut p_fwd_fwd,
                    1.0,
                    &mut lsw_subtree,
                    &mut ctx,
                );
                z_fwd = cur;
                ok
            } else {
                let mut cur = z_bck.clone();
                rho_fwd.copy_from_slice(&rho);
                p_fwd_bck.copy_from_slice(&p_bck_fwd);
                p_sharp_fwd_bck.copy_from_slice(&p_sharp_bck_fwd);
                let ok = self.build_tree(
                    depth,
                    &mut cur,
                    &mut z_propose,
                    &mut p_sharp_bck_fwd,
                    &mut p_sharp_bck_bck,
                    &mut rho_bck,
                    &mut p_bck_fwd,
                    &mut p_bck_bck,
                    -1.0,
                    &mut lsw_subtree,
                    &mut ctx,
                );
                z_bck = cur;
                ok
            };
            if !valid {
                break;
            }
            depth += 1;

            if lsw_subtree > log_sum_weight {
                z_sample = z_propose.clone();
            } else {
                let accept = (lsw_subtree - log_sum_weight).exp();
                if ctx.rng.random::<f64>() < accept {
                    z_sample = z_propose.clone();
                }
            }
            log_sum_weight = log_add_exp(log_sum_weight, lsw_subtree);

            rho = add(&rho_bck, &rho_fwd);
            let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let rho_ext = add(&rho_bck, &p_fwd_bck);
            persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &rho_ext);
            let rho_ext = add(&rho_fwd, &p_bck_fwd);
            persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &rho_ext);
            if !persist {
                break;
            }
        }

        let accept_stat = if ctx.n_leapfrog > 0 {
            ctx.sum_metro_prob / ctx.n_leapfrog as f64
        } else {
            0.0
        };
        let stats = TransitionStats {
            accept_stat,
            tree_depth: depth,
            n_leapfrog: ctx.n_leapfrog,
            divergent: ctx.divergent,
            energy: z_sample.hamiltonian(&m),
        };
        *z = z_sample;
        stats
    }

    #[allow(clippy::too_many_arguments)]
    fn build_tree<R: Rng>(
        &mut self,
        depth: usize,
        z: &mut PhasePoint,
        z_propose: &mut PhasePoint,
        p_sharp_beg: &mut Vec<f64>,
        p_sharp_end: &mut Vec<f64>,
        rho: &mut [f64],
        p_beg: &mut Vec<f64>,
        p_end: &mut Vec<f64>,
        sign: f64,
        log_sum_weight: &mut f64,
        ctx: &mut TreeCtx<'_, R>,
    ) -> bool {
        if depth == 0 {
            self.leapfrog(z, sign * self.step_size);
            ctx.n_leapfrog += 1;
            let h = z.hamiltonian(&self.inv_metric);
            if h - ctx.h0 > MAX_DELTA_H {
                ctx.divergent = true;
            }
            *log_sum_weight = log_add_exp(*log_sum_weight, ctx.h0 - h);
            ctx.sum_metro_prob += if ctx.h0 - h > 0.0 { 1.0 } else { (ctx.h0 - h).exp() };
            *z_propose = z.clone();
            *p_sharp_beg = z.p_sharp(&self.inv_metric);
            p_sharp_end.clone_from(p_sharp_beg);
            add_into(rho, &z.p);
            p_beg.clone_from(&z.p);
            p_end.clone_from(&z.p);
            return !ctx.divergent;
        }
        let dim = z.q.len();

        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; dim];
        let mut p_sharp_init_end = vec![0.0; dim];
        let mut rho_init = vec![0.0; dim];
        let valid_init = self.build_tree(
            depth - 1,
            z,
            z_propose,
            p_sharp_beg,
            &mut p_sharp_init_end,
            &mut rho_init,
            p_beg,
            &mut p_init_end,
            sign,
            &mut lsw_init,
            ctx,
        );
        if !valid_init {
            return false;
        }

        let mut z_propose_final = z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; dim];
        let mut p_sharp_final_beg = vec![0.0; dim];
        let mut rho_final = vec![0.0; dim];
        let valid_final = self.build_tree(
            depth - 1,
            z,
            &mut z_propose_final,
            &mut p_sharp_final_beg,
            p_sharp_end,
            &mut rho_final,
            &mut p_final_beg,
            p_end,
            sign,
            &mut lsw_final,
            ctx,
        );
        if !valid_final {
            return false;
        }

        let lsw_subtree = log_add_exp(lsw_init, lsw_final);
        *log_sum_weight = log_add_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = (lsw_final - lsw_subtree).exp();
            if ctx.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }

        let rho_subtree = add(&rho_init, &rho_final);
        add_into(rho, &rho_subtree);
        let mut persist = criterion(p_sharp_beg, p_sharp_end, &rho_subtree);
        let rho_ext = add(&rho_init, &p_final_beg);
        persist &= criterion(p_sharp_beg, &p_sharp_final_beg, &rho_ext);
        let rho_ext = add(&rho_final, &p_init_end);
        persist &= criterion(&p_sharp_init_end, p_sharp_end, &rho_ext);
        persist
    }

    /// Heuristic step size search: doubles or halves until the acceptance
    /// of a single leapfrog step crosses 0.8.
    pub fn init_step_size<R: Rng>(&mut self, z: &PhasePoint, rng: &mut R) {
        if !(self.step_size > 0.0 && self.step_size < 1e7) {
            return;
        }
        let threshold = 0.8f64.ln();
        let trial = |this: &mut Self, rng: &mut R| {
            let mut w = z.clone();
            this.sample_momentum(&mut w, rng);
            let h0 = w.hamiltonian(&this.inv_metric);
            let eps = this.step_size;
            this.leapfrog(&mut w, eps);
            h0 - w.hamiltonian(&this.inv_metric)
        };
        let dh = trial(self, rng);
        let direction = if dh > threshold { 1 } else { -1 };
        loop {
            let dh = trial(self, rng);
            if direction == 1 && !(dh > threshold) {
                break;
            }
            if direction == -1 && !(dh < threshold) {
                break;
            }
            self.step_size = if direction == 1 { 2.0 * self.step_size } else { 0.5 * self.step_size };
            if self.step_size > 1e7 || self.step_size < 1e-300 {
                break;
            }
        }
    }
}

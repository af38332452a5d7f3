use super::point::UnitPoint;
use crate::error::Result;
use crate::special::{norm_cdf_pair, norm_pdf};

/// Log density of a bivariate copula with its partial derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LogDensityGrad {
    pub value: f64,
    /// Derivative with respect to the natural parameter (or Kendall's tau once
    /// converted by [`super::ResolvedCopula`]).
    pub d_param: f64,
    pub d_u: f64,
    pub d_v: f64,
}

/// A single-parameter bivariate copula family in its unrotated form.
///
/// Implementations work on the natural parameter `theta`; everything that is
/// parametrized by Kendall's tau goes through [`CopulaFamily::tau_to_theta`].
/// The h-function conditions on the *second* argument:
/// `h(u | v) = P(U <= u | V = v) = dC(u, v) / dv`.
pub trait CopulaFamily: Send + Sync {
    /// Lowercase name used in configs and output tables.
    fn name(&self) -> &'static str;

    /// Whether the unrotated family covers negative Kendall's tau.
    fn allows_negative_tau(&self) -> bool;

    /// Whether `t4` scores must be present on the points passed in.
    fn needs_t4(&self) -> bool {
        false
    }

    fn tau_to_theta(&self, tau: f64) -> f64;
    fn theta_to_tau(&self, theta: f64) -> f64;
    fn dtheta_dtau(&self, tau: f64) -> f64;

    fn log_density(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64;

    /// Log density with derivatives in `theta`, `u` and `v`.
    fn log_density_grad(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad;

    /// `(h(u | v), 1 - h(u | v))`.
    fn hfunc(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> (f64, f64);

    /// Solves `h(u | v) = p` for `u`; returns `(u, 1 - u)`. `q` is `1 - p`.
    fn hinv(&self, theta: f64, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)>;

    /// Sums `log c(u_k, v_{t_k})` and its `theta` derivative over `cells`,
    /// writing each cell's derivative in `v` to `d_v`. `flip_u`/`flip_v`
    /// evaluate at the reflected arguments (rotations); the returned
    /// derivatives are with respect to the unreflected ones.
    ///
    /// Provided methods are instantiated per family, so the loop body is
    /// statically dispatched.
    fn accumulate_cells(
        &self,
        theta: f64,
        flip_u: bool,
        flip_v: bool,
        cells: &[(usize, UnitPoint)],
        vp: &[UnitPoint],
        d_v: &mut [f64],
    ) -> (f64, f64) {
        let (mut s, mut dt) = (0.0, 0.0);
        let sign_v = if flip_v { -1.0 } else { 1.0 };
        for ((t, up), out) in cells.iter().zip(d_v.iter_mut()) {
            let a = if flip_u { up.reflect() } else { *up };
            let b = if flip_v { vp[*t].reflect() } else { vp[*t] };
            let g = self.log_density_grad(theta, &a, &b);
            s += g.value;
            dt += g.d_param;
            *out = sign_v * g.d_v;
        }
        (s, dt)
    }

    /// Sums `log c(v_t, v_{t-1})` over consecutive pairs, writing
    /// `(d/dv_t, d/dv_{t-1})` for pair `t` to `d[2(t-1)..2t]`.
    fn accumulate_chain(&self, theta: f64, flip_u: bool, flip_v: bool, vp: &[UnitPoint], d: &mut [f64]) -> (f64, f64) {
        let (mut s, mut dt) = (0.0, 0.0);
        let sign_u = if flip_u { -1.0 } else { 1.0 };
        let sign_v = if flip_v { -1.0 } else { 1.0 };
        for (t, out) in (1..vp.len()).zip(d.chunks_exact_mut(2)) {
            let a = if flip_u { vp[t].reflect() } else { vp[t] };
            let b = if flip_v { vp[t - 1].reflect() } else { vp[t - 1] };
            let g = self.log_density_grad(theta, &a, &b);
            s += g.value;
            dt += g.d_param;
            out[0] = sign_u * g.d_u;
            out[1] = sign_v * g.d_v;
        }
        (s, dt)
    }

    /// Copula distribution function. The default integrates the h-function
    /// over the conditioning argument on the normal-score scale, where the
    /// integrand `h(u | Phi(t)) phi(t)` is smooth, with composite
    /// Gauss–Legendre panels of width 0.5 on `[-10, Phi^-1(v)]`.
    fn cdf(&self, theta: f64, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let rule = crate::quadrature::gauss_legendre(16);
        let top = v.z;
        let bottom = (top - 0.5).min(-10.0);
        let panels = ((top - bottom) / 0.5).ceil().max(1.0) as usize;
        let width = (top - bottom) / panels as f64;
        let mut acc = 0.0;
        for k in 0..panels {
            let a = bottom + k as f64 * width;
            for (t, w) in rule.on_interval(a, a + width) {
                let (p, q) = norm_cdf_pair(t);
                let s = UnitPoint::from_pair_lean(p, q, self.needs_t4());
                acc += w * self.hfunc(theta, u, &s).0 * norm_pdf(t);
            }
        }
        acc
    }
}

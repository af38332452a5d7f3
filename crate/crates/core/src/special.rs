//! Scalar special functions used throughout the crate: normal and Student t
//! distribution functions, logistic maps and log-sum-exp.
//!
//! Functions returning a `(p, q)` pair give both the lower and the upper tail
//! probability so that callers never have to form `1 - p` near one.

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal log density.
#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    norm_ln_pdf(x).exp()
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Lower and upper tail of the standard normal at `x`.
#[inline]
pub fn norm_cdf_pair(x: f64) -> (f64, f64) {
    (norm_cdf(x), norm_cdf(-x))
}

/// Standard normal quantile. Accurate in both tails when `q = 1 - p` is
/// supplied exactly.
#[inline]
pub fn norm_quantile_pair(p: f64, q: f64) -> f64 {
    if p <= q {
        -upper_quantile(p)
    } else {
        upper_quantile(q)
    }
}

/// `x >= 0` with `1 - Phi(x) = q`, `q <= 0.5`; one Halley step polishes the
/// inverse-erfc starting value to full precision.
fn upper_quantile(q: f64) -> f64 {
    let x = SQRT_2 * erfc_inv(2.0 * q);
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let tail = 0.5 * erfc(x / SQRT_2);
    // the upper tail decreases in x, so the Newton step on it is (tail - q)/phi
    let r = (tail - q) / norm_pdf(x);
    x + r / (1.0 - 0.5 * x * r)
}

#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    norm_quantile_pair(p, 1.0 - p)
}

/// Student t(4) CDF in closed form, returned as `(F(x), 1 - F(x))`.
///
/// With `s = x / sqrt(4 + x^2)` the CDF is `(1 + s)^2 (2 - s) / 4`.
pub fn t4_cdf_pair(x: f64) -> (f64, f64) {
    let lower_neg = |x: f64| {
        // x <= 0: 1 + s computed without cancellation
        let r = (4.0 + x * x).sqrt();
        let one_plus_s = 4.0 / ((r - x) * r);
        let s = x / r;
        one_plus_s * one_plus_s * (2.0 - s) / 4.0
    };
    if x <= 0.0 {
        let p = lower_neg(x);
        (p, 1.0 - p)
    } else {
        let q = lower_neg(-x);
        (1.0 - q, q)
    }
}

/// Student t(4) density.
#[inline]
pub fn t4_pdf(x: f64) -> f64 {
    0.375 * (1.0 + 0.25 * x * x).powf(-2.5)
}

/// Student t(4) quantile in closed form from `(p, 1 - p)`.
pub fn t4_quantile_pair(p: f64, q: f64) -> f64 {
    let c = p - q; // 2p - 1
    if c.abs() < 0.5 {
        // 2F - 1 = sin(3a) with s = 2 sin a
        let a = c.asin() / 3.0;
        let s = 2.0 * a.sin();
        2.0 * s / (1.0 - s * s).sqrt()
    } else {
        let alpha = 4.0 * p * q;
        let sa = alpha.sqrt();
        let r = (sa.acos() / 3.0).cos() / sa;
        let t = 2.0 * (r - 1.0).sqrt();
        if c < 0.0 {
            -t
        } else {
            t
        }
    }
}

/// Student t CDF for general degrees of freedom via the regularized incomplete
/// beta function, returned as `(F(x), 1 - F(x))`.
pub fn student_t_cdf_pair(x: f64, nu: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.5, 0.5);
    }
    let y = nu / (nu + x * x);
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, y);
    if x < 0.0 {
        (tail, 1.0 - tail)
    } else {
        (1.0 - tail, tail)
    }
}

pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    student_t_cdf_pair(x, nu).0
}

pub fn student_t_ln_pdf(x: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Student t quantile from `(p, 1 - p)`; safeguarded Newton iteration on the
/// log of the lower tail probability.
pub fn student_t_quantile_pair(p: f64, q: f64, nu: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    if p > q {
        return -student_t_quantile_pair(q, p, nu);
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    // Solve F(x) = p for x < 0, where F(x) is the lower tail.
    let ln_p = p.ln();
    let lower_tail = |x: f64| 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
    let mut hi = 0.0_f64;
    let mut lo = -1.0_f64;
    while lower_tail(lo) > p {
        hi = lo;
        lo *= 2.0;
        if lo < -1e300 {
            return lo;
        }
    }
    let mut x = norm_quantile_pair(p, q).clamp(lo, hi);
    if x <= lo || x >= hi {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = lower_tail(x);
        let g = f.ln() - ln_p;
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if g.abs() < 1e-15 || (hi - lo) <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
        let dens = student_t_ln_pdf(x, nu).exp();
        let mut next = x - g * f / dens;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
    }
    x
}

pub fn student_t_quantile(p: f64, nu: f64) -> f64 {
    student_t_quantile_pair(p, 1.0 - p, nu)
}

/// `1 / (1 + exp(-x))` together with `1 / (1 + exp(x))`.
#[inline]
pub fn logistic_pair(x: f64) -> (f64, f64) {
    if x >= 0.0 {
        let e = (-x).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = x.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Max-shifted `ln(sum(exp(x)))`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax of `xs` written into `out`; returns the log normalizer.
pub fn softmax_into(xs: &[f64], out: &mut [f64]) -> f64 {
    let lse = log_sum_exp(xs);
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = (x - lse).exp();
    }
    lse
}

pub fn ln_beta_fn(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}

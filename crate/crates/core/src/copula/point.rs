use crate::special::{norm_ln_pdf, norm_quantile_pair, t4_pdf, t4_quantile_pair};

/// Lower clamp applied to every copula argument.
pub const U_MIN: f64 = 1e-10;
/// Upper clamp applied to every copula argument.
pub const U_MAX: f64 = 1.0 - 1e-10;

/// A value in (0,1) together with the transforms the copula families need.
///
/// Both `u` and `1 - u` are carried explicitly so reflections (rotated
/// copulas) and upper-tail evaluations keep full relative precision.
#[derive(Clone, Copy, Debug)]
pub struct UnitPoint {
    pub u: f64,
    pub um: f64,
    pub ln_u: f64,
    pub ln_um: f64,
    /// `ln(-ln u)`
    pub lnln_u: f64,
    /// `ln(-ln(1 - u))`
    pub lnln_um: f64,
    /// Standard normal score and its derivative with respect to `u`.
    pub z: f64,
    pub dz_du: f64,
    /// Student t(4) score and its derivative with respect to `u`; NaN when
    /// the point was built without t scores.
    pub t4: f64,
    pub dt4_du: f64,
}

impl UnitPoint {
    pub fn new(u: f64) -> Self {
        Self::from_pair(u, 1.0 - u)
    }

    /// Builds a point from `u` and `1 - u`, clamping into `[U_MIN, U_MAX]`.
    pub fn from_pair(u: f64, um: f64) -> Self {
        Self::build(u, um, true)
    }

    /// As [`UnitPoint::from_pair`] but skips the t(4) score when the caller
    /// knows no t copula will be evaluated.
    pub fn from_pair_lean(u: f64, um: f64, with_t4: bool) -> Self {
        Self::build(u, um, with_t4)
    }

    fn build(u: f64, um: f64, with_t4: bool) -> Self {
        let (u, um) = if u < U_MIN {
            (U_MIN, 1.0 - U_MIN)
        } else if um < U_MIN {
            (U_MAX, U_MIN)
        } else {
            (u, um)
        };
        let (ln_u, ln_um) = if u < 0.5 {
            (u.ln(), (-u).ln_1p())
        } else {
            ((-um).ln_1p(), um.ln())
        };
        let z = norm_quantile_pair(u, um);
        let dz_du = (-norm_ln_pdf(z)).exp();
        let (t4, dt4_du) = if with_t4 {
            let t = t4_quantile_pair(u, um);
            (t, 1.0 / t4_pdf(t))
        } else {
            (f64::NAN, f64::NAN)
        };
        UnitPoint {
            u,
            um,
            ln_u,
            ln_um,
            lnln_u: (-ln_u).ln(),
            lnln_um: (-ln_um).ln(),
            z,
            dz_du,
            t4,
            dt4_du,
        }
    }

    /// The point `1 - u`.
    #[inline]
    pub fn reflect(&self) -> Self {
        UnitPoint {
            u: self.um,
            um: self.u,
            ln_u: self.ln_um,
            ln_um: self.ln_u,
            lnln_u: self.lnln_um,
            lnln_um: self.lnln_u,
            z: -self.z,
            dz_du: self.dz_du,
            t4: -self.t4,
            dt4_du: self.dt4_du,
        }
    }

    pub fn has_t4(&self) -> bool {
        !self.t4.is_nan()
    }
}

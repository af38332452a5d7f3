//! Bivariate one-parameter copula families parametrized by Kendall's tau.
//!
//! Each family implements [`CopulaFamily`] in its unrotated form and is
//! registered by name in a [`FamilyRegistry`]. A [`Family`] pairs a registered
//! implementation with a [`Rotation`]; a [`CopulaSpec`] adds the Kendall's tau
//! value and is the unit every other module works with.

mod clayton;
mod family;
mod gaussian;
mod gumbel;
mod point;
mod registry;
mod student;

pub use clayton::Clayton;
pub use family::{CopulaFamily, LogDensityGrad};
pub use gaussian::Gaussian;
pub use gumbel::Gumbel;
pub use point::{UnitPoint, U_MAX, U_MIN};
pub use registry::FamilyRegistry;
pub use student::StudentT4;

use crate::error::{domain, Error, Result};
use rand::distr::Open01;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Guard on |tau|: admissible values satisfy `|tau| < 1 - TAU_EPS`.
pub const TAU_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Rotation {
    #[default]
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    pub fn from_degrees(deg: u32) -> Option<Self> {
        match deg {
            0 => Some(Rotation::R0),
            90 => Some(Rotation::R90),
            180 => Some(Rotation::R180),
            270 => Some(Rotation::R270),
            _ => None,
        }
    }

    /// 90 and 270 degree rotations turn positive into negative dependence.
    pub fn negates_tau(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }

    fn flips_u(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R180)
    }

    fn flips_v(self) -> bool {
        matches!(self, Rotation::R180 | Rotation::R270)
    }
}

/// A registered copula family with a rotation.
#[derive(Clone, Copy)]
pub struct Family {
    base: &'static dyn CopulaFamily,
    rotation: Rotation,
}

impl Family {
    /// Pairs a family with a rotation. Families that natively cover negative
    /// dependence only accept the unrotated form.
    pub fn new(base: &'static dyn CopulaFamily, rotation: Rotation) -> Result<Self> {
        if base.allows_negative_tau() && rotation != Rotation::R0 {
            return Err(domain(format!(
                "{} carries no rotation (got {} degrees)",
                base.name(),
                rotation.degrees()
            )));
        }
        Ok(Family { base, rotation })
    }

    /// Looks up a builtin family by name, unrotated.
    pub fn named(name: &str) -> Result<Self> {
        FamilyRegistry::builtin().family(name)
    }

    pub fn gaussian() -> Self {
        Family { base: &Gaussian, rotation: Rotation::R0 }
    }

    pub fn t4() -> Self {
        Family { base: &StudentT4, rotation: Rotation::R0 }
    }

    pub fn clayton() -> Self {
        Family { base: &Clayton, rotation: Rotation::R0 }
    }

    pub fn gumbel() -> Self {
        Family { base: &Gumbel, rotation: Rotation::R0 }
    }

    pub fn base(&self) -> &'static dyn CopulaFamily {
        self.base
    }

    pub fn name(&self) -> &'static str {
        self.base.name()
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn needs_t4(&self) -> bool {
        self.base.needs_t4()
    }

    /// The rotation variant matching the sign of `tau`: one-directional
    /// families get an extra 90 degrees for negative tau.
    pub fn for_tau(self, tau: f64) -> Self {
        if self.base.allows_negative_tau() {
            return self;
        }
        let rotation = match (self.rotation, tau < 0.0) {
            (Rotation::R0 | Rotation::R90, false) => Rotation::R0,
            (Rotation::R180 | Rotation::R270, false) => Rotation::R180,
            (Rotation::R0 | Rotation::R90, true) => Rotation::R90,
            (Rotation::R180 | Rotation::R270, true) => Rotation::R270,
        };
        Family { rotation, ..self }
    }

    /// Validates `tau` against this family and rotation.
    pub fn check_tau(&self, tau: f64) -> Result<()> {
        if !tau.is_finite() {
            return Err(domain(format!("{self}: non-finite Kendall's tau")));
        }
        let bound = 1.0 - TAU_EPS;
        if tau.abs() >= bound {
            return Err(domain(format!(
                "{self}: Kendall's tau {tau} outside (-{bound}, {bound})"
            )));
        }
        if !self.base.allows_negative_tau() {
            let negative = self.rotation.negates_tau();
            if negative && tau > 0.0 {
                return Err(domain(format!("{self}: requires tau <= 0, got {tau}")));
            }
            if !negative && tau < 0.0 {
                return Err(domain(format!("{self}: requires tau >= 0, got {tau}")));
            }
        }
        Ok(())
    }

    /// Orients the arguments so the unrotated family can be evaluated.
    #[inline]
    fn orient(&self, u: &UnitPoint, v: &UnitPoint) -> (UnitPoint, UnitPoint) {
        let a = if self.rotation.flips_u() { u.reflect() } else { *u };
        let b = if self.rotation.flips_v() { v.reflect() } else { *v };
        (a, b)
    }
}

impl PartialEq for Family {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name() && self.rotation == other.rotation
    }
}

impl Eq for Family {}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rotation {
            Rotation::R0 => write!(f, "{}", self.name()),
            r => write!(f, "{}@{}", self.name(), r.degrees()),
        }
    }
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Family({self})")
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyRegistry::builtin().parse(s)
    }
}

/// A family together with its Kendall's tau.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CopulaSpec {
    family: Family,
    tau: f64,
}

impl CopulaSpec {
    pub fn new(family: Family, tau: f64) -> Result<Self> {
        family.check_tau(tau)?;
        Ok(CopulaSpec { family, tau })
    }

    /// Picks the rotation of `family` from the sign of `tau`.
    pub fn with_sign(family: Family, tau: f64) -> Result<Self> {
        Self::new(family.for_tau(tau), tau)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Natural parameter of the unrotated family.
    pub fn theta(&self) -> f64 {
        self.resolve().theta
    }

    pub fn resolve(&self) -> ResolvedCopula {
        ResolvedCopula::new(self.family, self.tau)
    }

    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.log_density(u, v)?.exp())
    }

    pub fn log_density(&self, u: f64, v: f64) -> Result<f64> {
        let (a, b) = self.points(u, v)?;
        Ok(self.resolve().log_density(&a, &b))
    }

    /// `(d/dtau, d/du, d/dv)` of the log density, plus its value.
    pub fn log_density_grad(&self, u: f64, v: f64) -> Result<LogDensityGrad> {
        let (a, b) = self.points(u, v)?;
        Ok(self.resolve().log_density_grad(&a, &b))
    }

    /// `P(U <= u | V = v)`.
    pub fn hfunc(&self, u: f64, v: f64) -> Result<f64> {
        let (a, b) = self.points(u, v)?;
        Ok(self.resolve().hfunc(&a, &b).0)
    }

    /// Inverse of the h-function in its first argument.
    pub fn hinv(&self, p: f64, v: f64) -> Result<f64> {
        if !p.is_finite() || !v.is_finite() {
            return Err(domain("h-inverse: non-finite input"));
        }
        let p = p.clamp(U_MIN, U_MAX);
        let vp = UnitPoint::new(v);
        Ok(self.resolve().hinv(p, 1.0 - p, &vp)?.0)
    }

    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        let (a, b) = self.points(u, v)?;
        Ok(self.resolve().cdf(&a, &b))
    }

    /// Draws `(u, v)`: `v` uniform, then `u` from the conditional given `v`.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let v: f64 = rng.sample(Open01);
        let w: f64 = rng.sample(Open01);
        let vp = UnitPoint::new(v);
        let (u, _) = self.resolve().hinv(w, 1.0 - w, &vp)?;
        Ok((u, vp.u))
    }

    fn points(&self, u: f64, v: f64) -> Result<(UnitPoint, UnitPoint)> {
        if !u.is_finite() || !v.is_finite() {
            return Err(domain(format!("{}: non-finite copula argument", self.family)));
        }
        Ok((UnitPoint::new(u), UnitPoint::new(v)))
    }
}

/// A spec with its natural parameter precomputed, for hot loops.
#[derive(Clone, Copy, Debug)]
pub struct ResolvedCopula {
    pub family: Family,
    pub tau: f64,
    pub theta: f64,
    pub dtheta_dtau: f64,
}

impl ResolvedCopula {
    /// Resolves without validation; callers guarantee `tau` is admissible.
    pub fn new(family: Family, tau: f64) -> Self {
        let base = family.base;
        let (theta, dtheta_dtau) = if family.rotation.negates_tau() {
            (base.tau_to_theta(-tau), -base.dtheta_dtau(-tau))
        } else {
            (base.tau_to_theta(tau), base.dtheta_dtau(tau))
        };
        ResolvedCopula { family, tau, theta, dtheta_dtau }
    }

    #[inline]
    pub fn log_density(&self, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let (a, b) = self.family.orient(u, v);
        self.family.base.log_density(self.theta, &a, &b)
    }

    /// Gradient with `d_param` expressed per unit of Kendall's tau.
    #[inline]
    pub fn log_density_grad(&self, u: &UnitPoint, v: &UnitPoint) -> LogDensityGrad {
        let rot = self.family.rotation;
        let (a, b) = self.family.orient(u, v);
        let g = self.family.base.log_density_grad(self.theta, &a, &b);
        LogDensityGrad {
            value: g.value,
            d_param: g.d_param * self.dtheta_dtau,
            d_u: if rot.flips_u() { -g.d_u } else { g.d_u },
            d_v: if rot.flips_v() { -g.d_v } else { g.d_v },
        }
    }

    /// Batched [`ResolvedCopula::log_density_grad`] over observation cells
    /// `(t, u)` paired with `vp[t]`; returns `(sum, d sum / d tau)` and writes
    /// per-cell derivatives in `v` to `d_v`.
    pub fn accumulate_cells(&self, cells: &[(usize, UnitPoint)], vp: &[UnitPoint], d_v: &mut [f64]) -> (f64, f64) {
        let rot = self.family.rotation;
        let (s, dt) = self
            .family
            .base
            .accumulate_cells(self.theta, rot.flips_u(), rot.flips_v(), cells, vp, d_v);
        (s, dt * self.dtheta_dtau)
    }

    /// Batched log density over consecutive pairs `(vp[t], vp[t-1])`.
    pub fn accumulate_chain(&self, vp: &[UnitPoint], d: &mut [f64]) -> (f64, f64) {
        let rot = self.family.rotation;
        let (s, dt) = self
            .family
            .base
            .accumulate_chain(self.theta, rot.flips_u(), rot.flips_v(), vp, d);
        (s, dt * self.dtheta_dtau)
    }

    /// `(h, 1 - h)`.
    pub fn hfunc(&self, u: &UnitPoint, v: &UnitPoint) -> (f64, f64) {
        let (a, b) = self.family.orient(u, v);
        let (h, hc) = self.family.base.hfunc(self.theta, &a, &b);
        if self.family.rotation.flips_u() {
            (hc, h)
        } else {
            (h, hc)
        }
    }

    /// `(u, 1 - u)` solving `h(u | v) = p`.
    pub fn hinv(&self, p: f64, q: f64, v: &UnitPoint) -> Result<(f64, f64)> {
        let rot = self.family.rotation;
        let b = if rot.flips_v() { v.reflect() } else { *v };
        if rot.flips_u() {
            let (u, um) = self.family.base.hinv(self.theta, q, p, &b)?;
            Ok((um, u))
        } else {
            self.family.base.hinv(self.theta, p, q, &b)
        }
    }

    pub fn cdf(&self, u: &UnitPoint, v: &UnitPoint) -> f64 {
        let base = self.family.base;
        match self.family.rotation {
            Rotation::R0 => base.cdf(self.theta, u, v),
            Rotation::R90 => v.u - base.cdf(self.theta, &u.reflect(), v),
            Rotation::R180 => u.u + v.u - 1.0 + base.cdf(self.theta, &u.reflect(), &v.reflect()),
            Rotation::R270 => u.u - base.cdf(self.theta, u, &v.reflect()),
        }
    }
}

/// Maps Kendall's tau to the natural parameter of `spec`'s family.
pub fn tau_to_theta(spec: &CopulaSpec) -> f64 {
    spec.theta()
}

/// Inverse of [`tau_to_theta`] for a family/rotation pair.
pub fn theta_to_tau(family: Family, theta: f64) -> f64 {
    let tau = family.base.theta_to_tau(theta);
    if family.rotation.negates_tau() {
        -tau
    } else {
        tau
    }
}

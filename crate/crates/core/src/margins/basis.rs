//! Covariate design: cubic B-splines for continuous covariates, linear terms
//! and one-hot coding for categorical ones.

use crate::error::{Error, Result};
use crate::stats::quantile;
use serde::{Deserialize, Serialize};

pub const SPLINE_DEGREE: usize = 3;
pub const DEFAULT_INTERIOR_KNOTS: usize = 10;

/// One covariate column, aligned with the time index.
#[derive(Clone, Debug, PartialEq)]
pub enum CovariateValues {
    Continuous(Vec<f64>),
    Categorical(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Covariate {
    pub name: String,
    pub values: CovariateValues,
}

impl Covariate {
    pub fn continuous(name: impl Into<String>, values: Vec<f64>) -> Self {
        Covariate { name: name.into(), values: CovariateValues::Continuous(values) }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<i64>) -> Self {
        Covariate { name: name.into(), values: CovariateValues::Categorical(values) }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            CovariateValues::Continuous(v) => v.len(),
            CovariateValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How a covariate enters the regression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    /// Cubic B-spline with interior knots at empirical quantiles.
    Spline,
    /// The raw value as a single column.
    Linear,
    /// Indicator columns for every level but the first.
    OneHot,
}

/// A fitted term: the covariate name and what is needed to rebuild its
/// columns at new covariate values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub kind: TermKind,
    /// Full clamped knot vector for splines.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub knots: Vec<f64>,
    /// Levels for one-hot terms; the first is the reference.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<i64>,
}

impl Term {
    /// Number of design columns contributed.
    pub fn width(&self) -> usize {
        match self.kind {
            // the basis sums to one, so one function is absorbed by the intercept
            TermKind::Spline => self.knots.len() - SPLINE_DEGREE - 2,
            TermKind::Linear => 1,
            TermKind::OneHot => self.levels.len() - 1,
        }
    }

    /// Builds the term from training values at the rows in `rows`.
    pub fn build(cov: &Covariate, kind: TermKind, rows: &[usize], n_interior: usize) -> Result<Self> {
        let rank_error = |why: &str| Error::Fit(format!("covariate `{}` {why}", cov.name));
        match (&cov.values, kind) {
            (CovariateValues::Continuous(x), TermKind::Spline | TermKind::Linear) => {
                let xs: Vec<f64> = rows.iter().map(|&t| x[t]).collect();
                if xs.iter().any(|v| !v.is_finite()) {
                    return Err(rank_error("has non-finite values"));
                }
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if !(hi > lo) {
                    return Err(rank_error("is constant, the design is rank deficient"));
                }
                if kind == TermKind::Linear {
                    return Ok(Term { name: cov.name.clone(), kind, knots: Vec::new(), levels: Vec::new() });
                }
                let mut interior: Vec<f64> = (1..=n_interior)
                    .map(|k| quantile(&xs, k as f64 / (n_interior + 1) as f64))
                    .filter(|&q| q > lo && q < hi)
                    .collect();
                interior.dedup();
                let mut knots = vec![lo; SPLINE_DEGREE + 1];
                knots.extend(interior);
                knots.extend(std::iter::repeat_n(hi, SPLINE_DEGREE + 1));
                Ok(Term { name: cov.name.clone(), kind, knots, levels: Vec::new() })
            }
            (CovariateValues::Categorical(x), TermKind::OneHot) => {
                let mut levels: Vec<i64> = rows.iter().map(|&t| x[t]).collect();
                levels.sort_unstable();
                levels.dedup();
                if levels.len() < 2 {
                    return Err(rank_error("has a single level, the design is rank deficient"));
                }
                Ok(Term { name: cov.name.clone(), kind, knots: Vec::new(), levels })
            }
            _ => Err(Error::Config(format!(
                "covariate `{}` cannot enter as a {kind:?} term",
                cov.name
            ))),
        }
    }

    /// Appends this term's columns at covariate row `t` to `row`.
    pub fn push_columns(&self, cov: &Covariate, t: usize, row: &mut Vec<f64>) -> Result<()> {
        match (&cov.values, self.kind) {
            (CovariateValues::Continuous(x), TermKind::Linear) => row.push(x[t]),
            (CovariateValues::Continuous(x), TermKind::Spline) => {
                let basis = bspline_basis(&self.knots, x[t]);
                row.extend_from_slice(&basis[1..]);
            }
            (CovariateValues::Categorical(x), TermKind::OneHot) => {
                // unseen levels fall on the reference level
                row.extend(self.levels[1..].iter().map(|&l| if l == x[t] { 1.0 } else { 0.0 }));
            }
            _ => {
                return Err(Error::Config(format!(
                    "covariate `{}` does not match its {:?} term",
                    cov.name, self.kind
                )))
            }
        }
        Ok(())
    }
}

/// Cubic B-spline basis at `x` for a clamped knot vector. Values outside the
/// boundary knots are clamped to them.
pub fn bspline_basis(knots: &[f64], x: f64) -> Vec<f64> {
    let p = SPLINE_DEGREE;
    let n_basis = knots.len() - p - 1;
    let lo = knots[p];
    let hi = knots[n_basis];
    let x = x.clamp(lo, hi);
    // span index with knots[span] <= x < knots[span + 1]; the right end
    // belongs to the last non-empty span
    let mut span = p;
    while span + 1 < n_basis && knots[span + 1] <= x {
        span += 1;
    }
    let mut left = [0.0; SPLINE_DEGREE + 1];
    let mut right = [0.0; SPLINE_DEGREE + 1];
    let mut n = [0.0; SPLINE_DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    let mut out = vec![0.0; n_basis];
    for (k, v) in n.iter().enumerate() {
        out[span - p + k] = *v;
    }
    out
}

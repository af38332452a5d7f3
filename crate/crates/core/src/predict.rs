//! Predictive simulation on the copula scale: in-sample draws (imputation of
//! missing cells) and recursive out-of-sample forecasts, plus the lift to the
//! data scale through a marginal model.

use crate::copula::CopulaSpec;
use crate::error::{Error, Result};
use crate::margins::{Covariate, MarginalModel};
use crate::model::CopulaScaleData;
use crate::sampler::PosteriorDraws;
use crate::stats::quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use rayon::prelude::*;
use std::io::Write;

/// Lower and upper quantile of the default credible band.
pub const BAND: (f64, f64) = (0.05, 0.95);

/// One predictive sample per posterior draw for margin `margin` at time `t`
/// (both 0-based).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSamples {
    pub margin: usize,
    pub t: usize,
    pub u: Vec<f64>,
    /// Data-scale values once a marginal model has been applied.
    pub y: Option<Vec<f64>>,
}

impl PredictiveSamples {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Empirical band of the copula-scale samples.
    pub fn band(&self, lower: f64, upper: f64) -> (f64, f64) {
        (quantile(&self.u, lower), quantile(&self.u, upper))
    }

    /// The 5%/95% band on the copula scale.
    pub fn credible_band(&self) -> (f64, f64) {
        self.band(BAND.0, BAND.1)
    }
}

fn cell_rng(seed: u64, j: usize, t: usize, forecast: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((forecast as u64) << 62) | ((j as u64) << 40) | t as u64);
    rng
}

fn check_margin(draws: &PosteriorDraws, j: usize) -> Result<()> {
    if draws.is_empty() {
        return Err(Error::Range("no posterior draws".into()));
    }
    if j >= draws.n_margins() {
        return Err(Error::Range(format!("margin {j} outside 0..{}", draws.n_margins())));
    }
    Ok(())
}

/// Draws `u_tj` given each posterior draw's latent value `v_t`:
/// `u = h^-1(w | v_t)` under that draw's observation copula, `w ~ U(0,1)`.
/// For unobserved cells this is the imputation distribution.
pub fn predict_insample(draws: &PosteriorDraws, j: usize, t: usize, seed: u64) -> Result<PredictiveSamples> {
    check_margin(draws, j)?;
    if t >= draws.n_time() {
        return Err(Error::Range(format!("time {t} outside the fitted range 0..{}", draws.n_time())));
    }
    let mut rng = cell_rng(seed, j, t, false);
    let u = draws
        .draws
        .iter()
        .map(|d| {
            let p = &d.params;
            let spec = CopulaSpec::with_sign(p.m_obs[j], p.tau_obs[j])?;
            let w: f64 = rng.sample(Open01);
            spec.hinv(w, p.v[t])
        })
        .collect::<Result<_>>()?;
    Ok(PredictiveSamples { margin: j, t, u, y: None })
}

/// Forecast `horizon >= 1` steps past the last fitted time. Each draw
/// propagates its own latent path `v_{s} = h^-1(w_s | v_{s-1})` under its
/// latent copula, then samples `u` as in [`predict_insample`].
pub fn predict_oos(draws: &PosteriorDraws, j: usize, horizon: usize, seed: u64) -> Result<PredictiveSamples> {
    check_margin(draws, j)?;
    if horizon == 0 {
        return Err(Error::Range("forecast horizon must be at least 1".into()));
    }
    let last = draws.n_time() - 1;
    let t = last + horizon;
    let mut rng = cell_rng(seed, j, t, true);
    let u = draws
        .draws
        .iter()
        .map(|d| {
            let p = &d.params;
            let lat = CopulaSpec::with_sign(p.m_lat, p.tau_lat)?;
            let mut v = p.v[last];
            for _ in 0..horizon {
                let w: f64 = rng.sample(Open01);
                v = lat.hinv(w, v)?;
            }
            let obs = CopulaSpec::with_sign(p.m_obs[j], p.tau_obs[j])?;
            let w: f64 = rng.sample(Open01);
            obs.hinv(w, v)
        })
        .collect::<Result<_>>()?;
    Ok(PredictiveSamples { margin: j, t, u, y: None })
}

/// In-sample predictions for every unobserved cell of `data`, in
/// margin-major then time order.
pub fn impute_missing(draws: &PosteriorDraws, data: &CopulaScaleData, seed: u64) -> Result<Vec<PredictiveSamples>> {
    let cells: Vec<(usize, usize)> = (0..data.n_margins())
        .flat_map(|j| (0..data.n_time()).filter(move |&t| !data.is_observed(t, j)).map(move |t| (j, t)))
        .collect();
    predict_cells(draws, &cells, seed)
}

/// In-sample predictions at the given `(margin, t)` cells.
pub fn predict_cells(draws: &PosteriorDraws, cells: &[(usize, usize)], seed: u64) -> Result<Vec<PredictiveSamples>> {
    cells
        .par_iter()
        .map(|&(j, t)| predict_insample(draws, j, t, seed))
        .collect()
}

/// Lifts copula-scale samples to the data scale:
/// `y = BC^-1(mean(x_t) + sigma * Phi^-1(u))`.
pub fn to_data_scale(
    samples: &PredictiveSamples,
    model: &MarginalModel,
    covariates: &[Covariate],
) -> Result<PredictiveSamples> {
    let y = samples
        .u
        .iter()
        .enumerate()
        .map(|(r, &u)| {
            model.data_value(u, covariates, samples.t).map_err(|e| match e {
                Error::Numeric { message, residual } => Error::Numeric {
                    message: format!("sample {r} (margin {}, t {}): {message}", samples.margin, samples.t),
                    residual,
                },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PredictiveSamples { y: Some(y), ..samples.clone() })
}

/// Long CSV with columns `margin, t, draw, u, y`; `margin`, `t` and `draw`
/// are 1-based and `y` is empty when no marginal model was applied.
pub fn write_predictions_csv<W: Write>(samples: &[PredictiveSamples], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["margin", "t", "draw", "u", "y"])?;
    for s in samples {
        for (r, u) in s.u.iter().enumerate() {
            let y = s.y.as_ref().map(|y| y[r].to_string()).unwrap_or_default();
            w.write_record([
                (s.margin + 1).to_string(),
                (s.t + 1).to_string(),
                (r + 1).to_string(),
                u.to_string(),
                y,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_predictions_csv`].
pub fn read_predictions_csv<R: std::io::Read>(input: R) -> Result<Vec<PredictiveSamples>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out: Vec<PredictiveSamples> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let field = |c: usize, name: &str| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Parse { row, column: name.into(), message: "missing field".into() })
        };
        let int = |c: usize, name: &str| -> Result<usize> {
            let s = field(c, name)?;
            match s.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse { row, column: name.into(), message: format!("`{s}` is not a positive integer") }),
            }
        };
        let num = |c: usize, name: &str| -> Result<f64> {
            let s = field(c, name)?;
            s.trim()
                .parse()
                .map_err(|_| Error::Parse { row, column: name.into(), message: format!("`{s}` is not a number") })
        };
        let (j, t) = (int(0, "margin")?, int(1, "t")?);
        let u = num(3, "u")?;
        let y = if field(4, "y")?.trim().is_empty() { None } else { Some(num(4, "y")?) };
        match out.last_mut() {
            Some(last) if last.margin == j && last.t == t => {
                last.u.push(u);
                if let (Some(ys), Some(y)) = (last.y.as_mut(), y) {
                    ys.push(y);
                }
            }
            _ => out.push(PredictiveSamples { margin: j, t, u: vec![u], y: y.map(|y| vec![y]) }),
        }
    }
    Ok(out)
}

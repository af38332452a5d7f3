//! Continuous ranked probability score from predictive samples and
//! cumulative comparisons across models.

use crate::error::{domain, Error, Result};
use crate::predict::PredictiveSamples;
use crate::special::norm_quantile;
use std::collections::BTreeMap;
use std::io::Write;

/// CRPS of the empirical distribution of `samples` at `y`:
/// `mean|x - y| - (1 / 2R^2) sum_{r,s} |x_r - x_s|`, with the double sum
/// evaluated from the order statistics in `O(R log R)`.
pub fn crps_from_samples(samples: &[f64], y: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(domain("CRPS needs at least one sample"));
    }
    if !y.is_finite() || samples.iter().any(|x| !x.is_finite()) {
        return Err(domain("CRPS needs finite samples and observation"));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let r = xs.len() as f64;
    let abs_dev = xs.iter().map(|x| (x - y).abs()).sum::<f64>() / r;
    // sum_{r,s} |x_r - x_s| = 2 sum_i (2i - R - 1) x_(i) for 1-based i
    let spread = xs
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * (i as f64 + 1.0) - r - 1.0) * x)
        .sum::<f64>()
        / (r * r);
    Ok((abs_dev - spread).max(0.0))
}

/// Scale on which predictions and truth are compared.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreScale {
    /// Copula scale `u`.
    Copula,
    /// Normal scores `Phi^-1(u)`.
    NormalScore,
    /// Data scale `y`; requires data-scale predictions.
    Data,
}

impl std::str::FromStr for ScoreScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "copula" | "u" => Ok(ScoreScale::Copula),
            "normal" | "normal_score" | "z" => Ok(ScoreScale::NormalScore),
            "data" | "y" => Ok(ScoreScale::Data),
            other => Err(Error::Config(format!("unknown score scale `{other}`"))),
        }
    }
}

/// A held-out truth value. `value` is on the copula scale for
/// [`ScoreScale::Copula`] and [`ScoreScale::NormalScore`] and on the data
/// scale for [`ScoreScale::Data`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthCell {
    pub margin: usize,
    pub t: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellScore {
    pub margin: usize,
    pub t: usize,
    pub crps: f64,
}

/// Per-cell CRPS of one model over the evaluation cells.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub label: String,
    pub cells: Vec<CellScore>,
}

impl ScoreReport {
    /// Sum of the per-cell CRPS for each margin present, keyed by margin.
    pub fn cumulative(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for c in &self.cells {
            *out.entry(c.margin).or_insert(0.0) += c.crps;
        }
        out
    }
}

/// Scores `predictions` against every cell of `truth`. Every truth cell needs
/// a prediction; missing ones are reported together.
pub fn cumulative_crps(
    label: &str,
    predictions: &[PredictiveSamples],
    truth: &[TruthCell],
    scale: ScoreScale,
) -> Result<ScoreReport> {
    if truth.is_empty() {
        return Err(Error::EmptyReport("no evaluation cells".into()));
    }
    let index: BTreeMap<(usize, usize), &PredictiveSamples> =
        predictions.iter().map(|p| ((p.margin, p.t), p)).collect();
    let missing: Vec<String> = truth
        .iter()
        .filter(|c| !index.contains_key(&(c.margin, c.t)))
        .map(|c| format!("(margin {}, t {})", c.margin + 1, c.t + 1))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Completeness(format!("no predictions for cells {}", missing.join(", "))));
    }
    let cells = truth
        .iter()
        .map(|c| {
            let p = index[&(c.margin, c.t)];
            let crps = match scale {
                ScoreScale::Copula => crps_from_samples(&p.u, c.value)?,
                ScoreScale::NormalScore => {
                    let z: Vec<f64> = p.u.iter().map(|&u| norm_quantile(u)).collect();
                    crps_from_samples(&z, norm_quantile(c.value))?
                }
                ScoreScale::Data => {
                    let y = p.y.as_ref().ok_or_else(|| {
                        Error::Completeness(format!(
                            "cell (margin {}, t {}) has no data-scale predictions",
                            c.margin + 1,
                            c.t + 1
                        ))
                    })?;
                    crps_from_samples(y, c.value)?
                }
            };
            Ok(CellScore { margin: c.margin, t: c.t, crps })
        })
        .collect::<Result<_>>()?;
    Ok(ScoreReport { label: label.to_string(), cells })
}

/// Cumulative CRPS of several models, one row per model and one column per
/// margin, with the lowest entry per margin flagged.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub margins: Vec<usize>,
    /// `totals[model][k]` for margin `margins[k]`.
    pub totals: Vec<Vec<f64>>,
    /// Index of the best model per margin.
    pub best: Vec<usize>,
}

impl Comparison {
    pub fn new(reports: &[ScoreReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptyReport("no models to compare".into()));
        }
        let sums: Vec<BTreeMap<usize, f64>> = reports.iter().map(ScoreReport::cumulative).collect();
        let margins: Vec<usize> = sums[0].keys().copied().collect();
        for (r, s) in reports.iter().zip(&sums) {
            if s.keys().copied().collect::<Vec<_>>() != margins {
                return Err(Error::Completeness(format!(
                    "model `{}` was scored on different margins",
                    r.label
                )));
            }
        }
        let totals: Vec<Vec<f64>> = sums.iter().map(|s| margins.iter().map(|m| s[m]).collect()).collect();
        let best = (0..margins.len())
            .map(|k| {
                (0..totals.len())
                    .min_by(|&a, &b| totals[a][k].total_cmp(&totals[b][k]))
                    .unwrap_or(0)
            })
            .collect();
        Ok(Comparison { labels: reports.iter().map(|r| r.label.clone()).collect(), margins, totals, best })
    }

    /// CSV with columns `model, margin_<j>..., best_<j>...`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string()];
        header.extend(self.margins.iter().map(|m| format!("margin_{}", m + 1)));
        header.extend(self.margins.iter().map(|m| format!("best_{}", m + 1)));
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.totals[i].iter().map(|v| v.to_string()));
            row.extend(self.best.iter().map(|&b| (b == i).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

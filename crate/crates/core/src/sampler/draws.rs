//! Stored posterior draws, their summaries and CSV serialization.

use super::diagnostics::{effective_sample_size, split_rhat};
use super::nuts::TransitionStats;
use crate::copula::{Family, FamilyRegistry};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::stats::quantile;
use std::io::{Read, Write};

/// One retained draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub chain: usize,
    /// 1-based index among the retained draws of its chain.
    pub iter: usize,
    pub params: ModelParams,
    /// Family-marginalized log posterior on the unconstrained scale, the
    /// quantity the sampler targets.
    pub log_post: f64,
    pub stats: TransitionStats,
}

/// Tuning and health of one chain after warmup.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSummary {
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub divergences: usize,
    pub mean_accept: f64,
}

/// Per-parameter effective sample size and split-R̂ over the constrained
/// parameters (`tau_lat`, `tau_obs_j`, `v_t`) and `log_post`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
}

impl Diagnostics {
    pub fn compute(draws: &[Draw], n_chains: usize) -> Self {
        let mut diag = Diagnostics::default();
        if draws.is_empty() || n_chains == 0 {
            return diag;
        }
        let per = draws.len() / n_chains;
        let n_margins = draws[0].params.tau_obs.len();
        let n_time = draws[0].params.v.len();
        let mut push = |name: String, get: &dyn Fn(&Draw) -> f64| {
            let series: Vec<Vec<f64>> = (0..n_chains)
                .map(|c| draws[c * per..(c + 1) * per].iter().map(get).collect())
                .collect();
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            diag.ess.push(effective_sample_size(&refs));
            diag.rhat.push(split_rhat(&refs));
            diag.names.push(name);
        };
        push("tau_lat".into(), &|d| d.params.tau_lat);
        for j in 0..n_margins {
            push(format!("tau_obs_{}", j + 1), &|d| d.params.tau_obs[j]);
        }
        push("log_post".into(), &|d| d.log_post);
        for t in 0..n_time {
            push(format!("v_{}", t + 1), &|d| d.params.v[t]);
        }
        diag
    }

    pub fn ess(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.ess[i])
    }

    pub fn rhat(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.rhat[i])
    }

    /// Largest split-R̂ over all parameters, ignoring NaN.
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().filter(|r| !r.is_nan()).fold(f64::NAN, f64::max)
    }
}

/// Posterior draws of the full parameter set, chain-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    /// The candidate family set the indicators refer to.
    pub families: Vec<Family>,
    pub draws: Vec<Draw>,
    pub chains: Vec<ChainSummary>,
    pub diagnostics: Diagnostics,
}

/// Posterior mean and equal-tailed interval of a scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_time(&self) -> usize {
        self.draws.first().map_or(0, |d| d.params.v.len())
    }

    pub fn n_margins(&self) -> usize {
        self.draws.first().map_or(0, |d| d.params.tau_obs.len())
    }

    pub fn divergences(&self) -> usize {
        self.draws.iter().filter(|d| d.stats.divergent).count()
    }

    pub fn divergence_rate(&self) -> f64 {
        if self.draws.is_empty() {
            0.0
        } else {
            self.divergences() as f64 / self.draws.len() as f64
        }
    }

    pub fn tau_obs(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.params.tau_obs[j]).collect()
    }

    pub fn tau_lat(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.params.tau_lat).collect()
    }

    /// Mean and `level` equal-tailed interval of the values.
    pub fn summarize(values: &[f64], level: f64) -> Summary {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let a = 0.5 * (1.0 - level);
        Summary { mean, lower: quantile(values, a), upper: quantile(values, 1.0 - a) }
    }

    fn frequencies(&self, pick: impl Fn(&Draw) -> Family) -> Vec<f64> {
        let mut counts = vec![0usize; self.families.len()];
        for d in &self.draws {
            let f = pick(d);
            if let Some(i) = self.families.iter().position(|g| *g == f) {
                counts[i] += 1;
            }
        }
        let n = self.draws.len().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }

    /// Posterior frequency of each candidate family for margin `j`.
    pub fn family_frequencies_obs(&self, j: usize) -> Vec<f64> {
        self.frequencies(|d| d.params.m_obs[j])
    }

    pub fn family_frequencies_lat(&self) -> Vec<f64> {
        self.frequencies(|d| d.params.m_lat)
    }

    fn mode(&self, freq: &[f64]) -> Family {
        let mut best = 0;
        for (i, &f) in freq.iter().enumerate() {
            if f > freq[best] {
                best = i;
            }
        }
        self.families[best]
    }

    /// Most frequent family for margin `j`; ties go to the earlier candidate.
    pub fn family_mode_obs(&self, j: usize) -> Family {
        self.mode(&self.family_frequencies_obs(j))
    }

    pub fn family_mode_lat(&self) -> Family {
        self.mode(&self.family_frequencies_lat())
    }

    /// Columnar CSV: `chain, iter, tau_lat, tau_obs_1..d, m_lat, m_obs_1..d, log_post`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.n_margins();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "iter".into(), "tau_lat".into()];
        header.extend((1..=d).map(|j| format!("tau_obs_{j}")));
        header.push("m_lat".into());
        header.extend((1..=d).map(|j| format!("m_obs_{j}")));
        header.push("log_post".into());
        w.write_record(&header)?;
        for dr in &self.draws {
            let p = &dr.params;
            let mut row = vec![dr.chain.to_string(), dr.iter.to_string(), p.tau_lat.to_string()];
            row.extend(p.tau_obs.iter().map(|x| x.to_string()));
            row.push(p.m_lat.to_string());
            row.extend(p.m_obs.iter().map(|f| f.to_string()));
            row.push(dr.log_post.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Wide CSV of the latent path: `chain, iter, v_1..v_T`.
    pub fn write_latent_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["chain".to_string(), "iter".into()];
        header.extend((1..=self.n_time()).map(|t| format!("v_{t}")));
        w.write_record(&header)?;
        for dr in &self.draws {
            let mut row = vec![dr.chain.to_string(), dr.iter.to_string()];
            row.extend(dr.params.v.iter().map(|x| x.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads draws written by [`write_csv`](Self::write_csv) and
    /// [`write_latent_csv`](Self::write_latent_csv). Rows of the two files
    /// must be aligned. Transition statistics are not serialized and come
    /// back as defaults; diagnostics are recomputed.
    pub fn read_csv<R1: Read, R2: Read>(draws: R1, latent: R2, families: &[Family]) -> Result<Self> {
        let registry = FamilyRegistry::builtin();
        let mut dr = csv::Reader::from_reader(draws);
        let header: Vec<String> = dr.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| {
            header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
                row: 1,
                column: name.to_string(),
                message: "missing column".into(),
            })
        };
        let n_margins = header.iter().filter(|h| h.starts_with("tau_obs_")).count();
        let (c_chain, c_iter, c_lat, c_mlat, c_lp) =
            (col("chain")?, col("iter")?, col("tau_lat")?, col("m_lat")?, col("log_post")?);
        let c_tau: Vec<usize> = (1..=n_margins).map(|j| col(&format!("tau_obs_{j}"))).collect::<Result<_>>()?;
        let c_m: Vec<usize> = (1..=n_margins).map(|j| col(&format!("m_obs_{j}"))).collect::<Result<_>>()?;

        let mut lr = csv::Reader::from_reader(latent);
        let lheader: Vec<String> = lr.headers()?.iter().map(str::to_string).collect();
        let n_time = lheader.iter().filter(|h| h.starts_with("v_")).count();
        let mut latent_rows = lr.records();

        let mut out = Vec::new();
        for (i, rec) in dr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let num = |c: usize| -> Result<f64> {
                let s = rec.get(c).unwrap_or("");
                s.trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("`{s}` is not a number"),
                })
            };
            let fam = |c: usize| -> Result<Family> {
                let s = rec.get(c).unwrap_or("");
                let f = registry.parse(s).map_err(|e| Error::Parse {
                    row,
                    column: header[c].clone(),
                    message: e.to_string(),
                })?;
                if !families.contains(&f) {
                    return Err(Error::Parse {
                        row,
                        column: header[c].clone(),
                        message: format!("family `{f}` is not in the candidate set"),
                    });
                }
                Ok(f)
            };
            let lrec = latent_rows.next().ok_or_else(|| Error::Parse {
                row,
                column: "v_1".into(),
                message: "latent file has fewer rows than the draws file".into(),
            })??;
            let v = (0..n_time)
                .map(|t| {
                    let s = lrec.get(t + 2).unwrap_or("");
                    s.trim().parse::<f64>().map_err(|_| Error::Parse {
                        row,
                        column: format!("v_{}", t + 1),
                        message: format!("`{s}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let params = ModelParams {
                v,
                tau_obs: c_tau.iter().map(|&c| num(c)).collect::<Result<_>>()?,
                tau_lat: num(c_lat)?,
                m_obs: c_m.iter().map(|&c| fam(c)).collect::<Result<_>>()?,
                m_lat: fam(c_mlat)?,
            };
            params.validate().map_err(|e| Error::Parse {
                row,
                column: "tau_lat".into(),
                message: e.to_string(),
            })?;
            out.push(Draw {
                chain: num(c_chain)? as usize,
                iter: num(c_iter)? as usize,
                params,
                log_post: num(c_lp)?,
                stats: TransitionStats::default(),
            });
        }
        let n_chains = out.iter().map(|d| d.chain + 1).max().unwrap_or(0);
        let chains = (0..n_chains)
            .map(|_| ChainSummary { step_size: f64::NAN, inv_metric: Vec::new(), divergences: 0, mean_accept: f64::NAN })
            .collect();
        let diagnostics = Diagnostics::compute(&out, n_chains);
        Ok(PosteriorDraws { families: families.to_vec(), draws: out, chains, diagnostics })
    }
}

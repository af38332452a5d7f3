use crate::config::{ContourKind, CovariateSpec, RunConfig, Scale};
use anyhow::{bail, Context, Result};
use copula_ssm::copula::{Family, FamilyRegistry};
use copula_ssm::io::{read_panel, write_panel, Panel};
use copula_ssm::margins::{fit_margin, residuals_to_copula, Covariate, MarginalModel, TermKind};
use copula_ssm::model::{
    bivariate_margin_density_crosssection, simulate, CopulaScaleData, Scenario, TemporalDensity,
};
use copula_ssm::predict::{
    impute_missing, predict_oos, read_predictions_csv, to_data_scale, write_predictions_csv, PredictiveSamples,
};
use copula_ssm::sampler::{fit, PosteriorDraws};
use copula_ssm::score::{cumulative_crps, Comparison, ScoreScale, TruthCell};
use copula_ssm::special::{norm_cdf, norm_ln_pdf};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

const MASK_STREAM: u64 = 1;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_panel_file(path: &Path) -> Result<Panel> {
    read_panel(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn margin_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("u_{j}")).collect()
}

/// Cells `(t, j)` removed by the mask settings, 0-based.
pub fn mask_cells(cfg: &RunConfig, n_time: usize, d: usize) -> Result<Vec<(usize, usize)>> {
    let mut cells = std::collections::BTreeSet::new();
    let total = n_time * d;
    let k = (cfg.mask.rate * total as f64).round() as usize;
    if k > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(MASK_STREAM);
        for i in rand::seq::index::sample(&mut rng, total, k) {
            cells.insert((i / d, i % d));
        }
    }
    for b in &cfg.mask.blocks {
        if b.margin > d || b.start - 1 + b.length > n_time {
            bail!(
                "mask block (margin {}, rows {}..{}) exceeds the {n_time} x {d} panel",
                b.margin,
                b.start,
                b.start + b.length - 1
            );
        }
        cells.extend((b.start - 1..b.start - 1 + b.length).map(|t| (t, b.margin - 1)));
    }
    Ok(cells.into_iter().collect())
}

fn data_panel(data: &CopulaScaleData) -> Panel {
    Panel { names: margin_names(data.n_margins()), rows: data.rows() }
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<()> {
    let scenario = cfg.scenario()?;
    let sim = simulate(&scenario, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    let mask = mask_cells(cfg, scenario.n_time, scenario.n_margins())?;
    let masked = sim.data.with_masked(&mask)?;

    write_panel(&data_panel(&masked), create(&cfg.out, "data.csv")?)?;
    write_panel(&data_panel(&sim.data), create(&cfg.out, "truth.csv")?)?;
    let latent = Panel {
        names: vec!["v".into()],
        rows: sim.v.iter().map(|&v| vec![Some(v)]).collect(),
    };
    write_panel(&latent, create(&cfg.out, "latent.csv")?)?;

    let mut w = csv::Writer::from_writer(create(&cfg.out, "params.csv")?);
    w.write_record(["parameter", "family", "tau"])?;
    for j in 0..scenario.n_margins() {
        w.write_record([format!("obs_{}", j + 1), scenario.m_obs[j].to_string(), scenario.tau_obs[j].to_string()])?;
    }
    w.write_record(["lat".to_string(), scenario.m_lat.to_string(), scenario.tau_lat.to_string()])?;
    w.flush()?;
    info!("simulated {} x {} panel with {} masked cells", scenario.n_time, scenario.n_margins(), mask.len());
    Ok(())
}

/// What `fit` leaves behind for the later stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitManifest {
    pub families: Vec<String>,
    pub seed: u64,
    pub data: crate::config::DataConfig,
    /// Response columns in margin order.
    pub columns: Vec<String>,
}

impl FitManifest {
    pub fn families(&self) -> Result<Vec<Family>> {
        Ok(FamilyRegistry::builtin().parse_set(&self.families.join(","))?)
    }

    fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("fit.toml");
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(toml::from_str(&text)?)
    }
}

/// Response columns and covariates of the input panel.
struct Input {
    panel: Panel,
    columns: Vec<String>,
    responses: Vec<Vec<Option<f64>>>,
    covariates: Vec<(Covariate, TermKind)>,
}

fn load_input(data: &crate::config::DataConfig) -> Result<Input> {
    let path = data.input.as_ref().context("[data] input is required")?;
    let panel = read_panel_file(path)?;
    let cov_cols: Vec<&str> = data.covariates.iter().map(|c| c.column.as_str()).collect();
    let columns: Vec<String> = if data.columns.is_empty() {
        panel.names.iter().filter(|n| !cov_cols.contains(&n.as_str())).cloned().collect()
    } else {
        data.columns.clone()
    };
    if columns.is_empty() {
        bail!("no response columns in {}", path.display());
    }
    let mut responses = Vec::new();
    for name in &columns {
        let col = panel.column(panel.column_index(name)?);
        if col.iter().all(Option::is_none) {
            return Err(copula_ssm::Error::Config(format!("margin `{name}` has no observed values")).into());
        }
        responses.push(col);
    }
    let covariates = data.covariates.iter().map(|c| build_covariate(&panel, c)).collect::<Result<_>>()?;
    Ok(Input { panel, columns, responses, covariates })
}

fn build_covariate(panel: &Panel, spec: &CovariateSpec) -> Result<(Covariate, TermKind)> {
    let col = panel.column(panel.column_index(&spec.column)?);
    let missing = col.iter().position(Option::is_none);
    if let Some(t) = missing {
        bail!("covariate `{}` is missing at row {}", spec.column, t + 1);
    }
    let vals: Vec<f64> = col.into_iter().flatten().collect();
    let cov = match spec.kind {
        TermKind::OneHot => {
            if vals.iter().any(|v| v.fract() != 0.0) {
                bail!("one-hot covariate `{}` must hold integer codes", spec.column);
            }
            Covariate::categorical(spec.column.clone(), vals.iter().map(|&v| v as i64).collect())
        }
        _ => Covariate::continuous(spec.column.clone(), vals),
    };
    Ok((cov, spec.kind))
}

fn margin_file(j: usize) -> String {
    format!("margin_{}.toml", j + 1)
}

pub fn fit_cmd(cfg: &RunConfig) -> Result<()> {
    let families = cfg.family_set()?;
    let input = load_input(&cfg.data)?;
    let d = input.columns.len();
    let n = input.panel.n_rows();

    let copula_cols: Vec<Vec<Option<f64>>> = match cfg.data.scale {
        Scale::Copula => input.responses.clone(),
        Scale::Data => {
            let mcfg = cfg.margins.to_core();
            let covs: Vec<Covariate> = input.covariates.iter().map(|(c, _)| c.clone()).collect();
            let mut cols = Vec::with_capacity(d);
            for (j, y) in input.responses.iter().enumerate() {
                let model = fit_margin(y, &input.covariates, &mcfg)
                    .with_context(|| format!("marginal model for `{}`", input.columns[j]))?;
                info!("margin `{}`: lambda {} sigma {:.4}", input.columns[j], model.lambda, model.sigma);
                std::io::Write::write_all(&mut create(&cfg.out, &margin_file(j))?, model.to_toml()?.as_bytes())?;
                cols.push(residuals_to_copula(&model, y, &covs)?);
            }
            cols
        }
    };
    let rows: Vec<Vec<Option<f64>>> = (0..n).map(|t| copula_cols.iter().map(|c| c[t]).collect()).collect();
    let data = CopulaScaleData::from_rows(&rows)?;
    write_panel(&data_panel(&data), create(&cfg.out, "copula_data.csv")?)?;

    let draws = fit(&data, &families, &cfg.sampler_config())?;
    draws.write_csv(create(&cfg.out, "draws.csv")?)?;
    draws.write_latent_csv(create(&cfg.out, "latent_draws.csv")?)?;
    write_summary(&draws, create(&cfg.out, "summary.csv")?)?;

    let manifest = FitManifest {
        families: families.iter().map(Family::to_string).collect(),
        seed: cfg.seed,
        data: crate::config::DataConfig { columns: input.columns.clone(), ..cfg.data.clone() },
        columns: input.columns,
    };
    std::io::Write::write_all(&mut create(&cfg.out, "fit.toml")?, toml::to_string(&manifest)?.as_bytes())?;
    info!(
        "fit {} draws, {} divergences, max rhat {:.3}",
        draws.len(),
        draws.divergences(),
        draws.diagnostics.max_rhat()
    );
    Ok(())
}

/// Posterior means, 95% intervals, family modes with their posterior
/// frequency, and convergence diagnostics.
pub fn write_summary<W: std::io::Write>(draws: &PosteriorDraws, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "mean", "lower", "upper", "family_mode", "mode_prob", "ess", "rhat"])?;
    let mut row = |name: String, vals: Vec<f64>, mode: Family, freqs: Vec<f64>| -> Result<()> {
        let s = PosteriorDraws::summarize(&vals, 0.95);
        let k = draws.families.iter().position(|f| *f == mode).unwrap_or(0);
        let ess = draws.diagnostics.ess(&name).unwrap_or(f64::NAN);
        let rhat = draws.diagnostics.rhat(&name).unwrap_or(f64::NAN);
        w.write_record([
            name,
            s.mean.to_string(),
            s.lower.to_string(),
            s.upper.to_string(),
            mode.to_string(),
            freqs.get(k).copied().unwrap_or(f64::NAN).to_string(),
            ess.to_string(),
            rhat.to_string(),
        ])?;
        Ok(())
    };
    for j in 0..draws.n_margins() {
        row(format!("tau_obs_{}", j + 1), draws.tau_obs(j), draws.family_mode_obs(j), draws.family_frequencies_obs(j))?;
    }
    row("tau_lat".into(), draws.tau_lat(), draws.family_mode_lat(), draws.family_frequencies_lat())?;
    w.flush()?;
    Ok(())
}

fn load_draws(dir: &Path, families: &[Family]) -> Result<PosteriorDraws> {
    PosteriorDraws::read_csv(open(&dir.join("draws.csv"))?, open(&dir.join("latent_draws.csv"))?, families)
        .with_context(|| format!("reading draws from {}", dir.display()))
}

pub fn predict_cmd(cfg: &RunConfig) -> Result<()> {
    let dir = cfg.fit_dir();
    let manifest = FitManifest::load(&dir)?;
    let draws = load_draws(&dir, &manifest.families()?)?;
    let data = CopulaScaleData::from_rows(&read_panel_file(&dir.join("copula_data.csv"))?.rows)?;

    let mut preds = impute_missing(&draws, &data, cfg.seed)?;
    for h in 1..=cfg.predict.horizon {
        for j in 0..data.n_margins() {
            preds.push(predict_oos(&draws, j, h, cfg.seed)?);
        }
    }
    if manifest.data.scale == Scale::Data {
        let input = load_input(&manifest.data)?;
        let covs: Vec<Covariate> = input.covariates.into_iter().map(|(c, _)| c).collect();
        let models: Vec<MarginalModel> = (0..data.n_margins())
            .map(|j| {
                let path = dir.join(margin_file(j));
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                Ok(MarginalModel::from_toml(&text)?)
            })
            .collect::<Result<_>>()?;
        preds = preds
            .iter()
            .map(|p| to_data_scale(p, &models[p.margin], &covs).map_err(anyhow::Error::from))
            .collect::<Result<_>>()?;
    }
    write_predictions_csv(&preds, create(&cfg.out, "predictions.csv")?)?;
    info!("wrote predictions for {} cells", preds.len());
    Ok(())
}

pub fn score_cmd(cfg: &RunConfig) -> Result<()> {
    let scale: ScoreScale = cfg.score.scale.parse()?;
    let truth_path = cfg.score.truth.as_ref().context("[score] truth is required")?;
    let masked_path = cfg.score.masked.as_ref().context("[score] masked is required")?;
    let truth = read_panel_file(truth_path)?;
    let masked = read_panel_file(masked_path)?;
    if truth.names != masked.names || truth.n_rows() != masked.n_rows() {
        return Err(copula_ssm::Error::Completeness(format!(
            "{} and {} do not have the same columns and rows",
            truth_path.display(),
            masked_path.display()
        ))
        .into());
    }
    let mut cells = Vec::new();
    for (j, _) in truth.names.iter().enumerate() {
        for t in 0..truth.n_rows() {
            if masked.rows[t][j].is_none() {
                let value = truth.rows[t][j].ok_or_else(|| {
                    copula_ssm::Error::Completeness(format!("no truth for masked cell (margin {}, t {})", j + 1, t + 1))
                })?;
                cells.push(TruthCell { margin: j, t, value });
            }
        }
    }

    let models: Vec<(String, PathBuf)> = if cfg.score.models.is_empty() {
        vec![("model".into(), cfg.out.join("predictions.csv"))]
    } else {
        cfg.score.models.iter().map(|m| (m.label.clone(), m.predictions.clone())).collect()
    };
    let mut reports = Vec::new();
    for (label, path) in &models {
        let preds: Vec<PredictiveSamples> = read_predictions_csv(open(path)?)?;
        reports.push(cumulative_crps(label, &preds, &cells, scale)?);
    }

    let mut w = csv::Writer::from_writer(create(&cfg.out, "scores.csv")?);
    w.write_record(["model", "margin", "t", "crps"])?;
    for r in &reports {
        for c in &r.cells {
            w.write_record([r.label.clone(), (c.margin + 1).to_string(), (c.t + 1).to_string(), c.crps.to_string()])?;
        }
    }
    w.flush()?;
    Comparison::new(&reports)?.write_csv(create(&cfg.out, "comparison.csv")?)?;
    info!("scored {} models on {} cells", reports.len(), cells.len());
    Ok(())
}

/// Plug-in scenario from a fit: posterior means of the taus and posterior
/// modes of the families.
fn plugin_scenario(dir: &Path) -> Result<Scenario> {
    let manifest = FitManifest::load(dir)?;
    let draws = load_draws(dir, &manifest.families()?)?;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Scenario {
        n_time: draws.n_time(),
        tau_obs: (0..draws.n_margins()).map(|j| mean(draws.tau_obs(j))).collect(),
        tau_lat: mean(draws.tau_lat()),
        m_obs: (0..draws.n_margins()).map(|j| draws.family_mode_obs(j)).collect(),
        m_lat: draws.family_mode_lat(),
    })
}

/// Densities of `(z, z')` with standard normal margins on a regular grid:
/// `c(Phi(z), Phi(z')) phi(z) phi(z')`.
pub fn contour_grid(cfg: &RunConfig, scenario: &Scenario) -> Result<Vec<(f64, f64, f64)>> {
    let c = &cfg.contours;
    let d = scenario.n_margins();
    if c.margins.iter().any(|&m| m > d) {
        bail!("contour margins {:?} outside 1..={d}", c.margins);
    }
    let step = (c.z_max - c.z_min) / (c.points - 1) as f64;
    let zs: Vec<f64> = (0..c.points).map(|i| c.z_min + i as f64 * step).collect();
    let j = c.margins[0] - 1;
    let temporal = match c.kind {
        ContourKind::Temporal => Some(TemporalDensity::new(scenario, j, c.nodes)?),
        ContourKind::Crosssection => None,
    };
    let jp = match c.kind {
        ContourKind::Crosssection => {
            *c.margins.get(1).context("cross-sectional contours need two margins")? - 1
        }
        ContourKind::Temporal => j,
    };
    let mut out = Vec::with_capacity(zs.len() * zs.len());
    for &z1 in &zs {
        for &z2 in &zs {
            let (u1, u2) = (norm_cdf(z1), norm_cdf(z2));
            let dens = match &temporal {
                Some(td) => td.eval(u1, u2)?,
                None => bivariate_margin_density_crosssection(scenario, j, jp, u1, u2, c.nodes)?,
            };
            out.push((z1, z2, dens * (norm_ln_pdf(z1) + norm_ln_pdf(z2)).exp()));
        }
    }
    Ok(out)
}

pub fn contours_cmd(cfg: &RunConfig) -> Result<()> {
    let scenario = match &cfg.contours.fit_dir {
        Some(dir) => plugin_scenario(dir)?,
        None => cfg.scenario()?,
    };
    let grid = contour_grid(cfg, &scenario)?;
    let mut w = csv::Writer::from_writer(create(&cfg.out, "contours.csv")?);
    w.write_record(["z1", "z2", "density"])?;
    for (a, b, dens) in grid {
        w.write_record([a.to_string(), b.to_string(), dens.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

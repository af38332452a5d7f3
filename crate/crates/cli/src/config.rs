use anyhow::{bail, Context, Result};
use copula_ssm::copula::{Family, FamilyRegistry};
use copula_ssm::margins::{MarginConfig, TermKind};
use copula_ssm::model::Scenario;
use copula_ssm::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_FAMILIES: &str = "gaussian,t4,clayton,gumbel";

/// Whole run configuration. Every section is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Candidate families, e.g. `["gaussian", "clayton@180"]`.
    pub families: Vec<String>,
    pub scenario: ScenarioConfig,
    pub mask: MaskConfig,
    pub data: DataConfig,
    pub margins: MarginsConfig,
    pub sampler: SamplerSection,
    pub predict: PredictConfig,
    pub score: ScoreConfig,
    pub contours: ContourConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("out"),
            families: DEFAULT_FAMILIES.split(',').map(String::from).collect(),
            scenario: Default::default(),
            mask: Default::default(),
            data: Default::default(),
            margins: Default::default(),
            sampler: Default::default(),
            predict: Default::default(),
            score: Default::default(),
            contours: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// `scenario_1`, `scenario_2` or `scenario_3`; explicit keys override it.
    pub preset: Option<String>,
    pub n_time: Option<usize>,
    pub tau_obs: Option<Vec<f64>>,
    pub families: Option<Vec<String>>,
    pub tau_lat: Option<f64>,
    pub latent_family: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    /// Fraction of all cells set missing at random.
    pub rate: f64,
    pub blocks: Vec<BlockMask>,
}

/// `length` consecutive rows of one margin starting at `start` (both 1-based).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockMask {
    pub margin: usize,
    pub start: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Values already lie in (0, 1).
    #[default]
    Copula,
    /// Positive raw values; marginal models are fitted first.
    Data,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub input: Option<PathBuf>,
    pub scale: Scale,
    /// Response columns; all non-covariate columns when empty.
    pub columns: Vec<String>,
    pub covariates: Vec<CovariateSpec>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub column: String,
    pub kind: TermKind,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarginsConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub min_observed: usize,
    pub interior_knots: usize,
}

impl Default for MarginsConfig {
    fn default() -> Self {
        let m = MarginConfig::default();
        MarginsConfig {
            lambda_min: m.lambda_min,
            lambda_max: m.lambda_max,
            lambda_step: m.lambda_step,
            min_observed: m.min_observed,
            interior_knots: m.interior_knots,
        }
    }
}

impl MarginsConfig {
    pub fn to_core(&self) -> MarginConfig {
        MarginConfig {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            lambda_step: self.lambda_step,
            min_observed: self.min_observed,
            interior_knots: self.interior_knots,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub iterations: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub chains: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        SamplerSection {
            iterations: s.iterations,
            warmup: s.warmup,
            target_accept: s.target_accept,
            max_tree_depth: s.max_tree_depth,
            chains: s.chains,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    /// Directory holding a previous fit; defaults to `out`.
    pub fit_dir: Option<PathBuf>,
    /// Forecast steps past the last row; 0 imputes missing cells only.
    pub horizon: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreConfig {
    /// Fully observed panel.
    pub truth: Option<PathBuf>,
    /// The panel that was fitted; its missing cells are the evaluation cells.
    pub masked: Option<PathBuf>,
    /// `copula`, `normal` or `data`.
    pub scale: String,
    pub models: Vec<ScoredModel>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig { truth: None, masked: None, scale: "normal".into(), models: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredModel {
    pub label: String,
    pub predictions: PathBuf,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourKind {
    #[default]
    Crosssection,
    Temporal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContourConfig {
    pub kind: ContourKind,
    /// 1-based margins; the second is ignored for temporal grids.
    pub margins: Vec<usize>,
    pub z_min: f64,
    pub z_max: f64,
    pub points: usize,
    pub nodes: usize,
    /// Plug-in parameters from a fit (posterior means and family modes)
    /// instead of `[scenario]`.
    pub fit_dir: Option<PathBuf>,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            kind: ContourKind::Crosssection,
            margins: vec![1, 2],
            z_min: -3.0,
            z_max: 3.0,
            points: 61,
            nodes: copula_ssm::model::DEFAULT_NODES_2D,
            fit_dir: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub families: Option<String>,
    pub chains: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("invalid config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(o) = &overrides.out {
            cfg.out = o.clone();
        }
        if let Some(f) = &overrides.families {
            cfg.families = f.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(c) = overrides.chains {
            cfg.sampler.chains = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Checks everything that does not need input files.
    pub fn validate(&self) -> Result<()> {
        self.family_set()?;
        self.sampler_config().validate()?;
        if !(0.0..1.0).contains(&self.mask.rate) {
            bail!("mask rate must lie in [0, 1), got {}", self.mask.rate);
        }
        for b in &self.mask.blocks {
            if b.margin == 0 || b.start == 0 {
                bail!("mask blocks use 1-based margins and rows");
            }
        }
        let m = self.margins.to_core();
        copula_ssm::margins::lambda_grid(m.lambda_min, m.lambda_max, m.lambda_step)?;
        self.score.scale.parse::<copula_ssm::score::ScoreScale>()?;
        let c = &self.contours;
        if c.points < 2 || c.z_max <= c.z_min || c.z_max.is_nan() || c.z_min.is_nan() || c.nodes == 0 {
            bail!("contour grid needs points >= 2, z_max > z_min and nodes >= 1");
        }
        if c.margins.is_empty() || c.margins.contains(&0) {
            bail!("contour margins are 1-based and at least one is required");
        }
        Ok(())
    }

    pub fn family_set(&self) -> Result<Vec<Family>> {
        Ok(FamilyRegistry::builtin().parse_set(&self.families.join(","))?)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.sampler.iterations,
            warmup: self.sampler.warmup,
            target_accept: self.sampler.target_accept,
            max_tree_depth: self.sampler.max_tree_depth,
            seed: self.seed,
            chains: self.sampler.chains,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let reg = FamilyRegistry::builtin();
        let s = &self.scenario;
        let mut sc = match s.preset.as_deref() {
            Some("scenario_1") => Scenario::scenario_1(),
            Some("scenario_2") => Scenario::scenario_2(),
            Some("scenario_3") => Scenario::scenario_3(),
            Some(other) => bail!("unknown scenario preset `{other}`"),
            None => {
                if s.tau_obs.is_none() || s.families.is_none() || s.tau_lat.is_none() || s.latent_family.is_none() {
                    bail!("[scenario] needs a preset or all of tau_obs, families, tau_lat, latent_family");
                }
                Scenario {
                    n_time: 1000,
                    tau_obs: vec![],
                    tau_lat: 0.0,
                    m_obs: vec![],
                    m_lat: Family::gaussian(),
                }
            }
        };
        if let Some(n) = s.n_time {
            sc.n_time = n;
        }
        if let Some(t) = &s.tau_obs {
            sc.tau_obs = t.clone();
        }
        if let Some(f) = &s.families {
            sc.m_obs = f.iter().map(|n| reg.parse(n)).collect::<Result<_, _>>()?;
        }
        if let Some(t) = s.tau_lat {
            sc.tau_lat = t;
        }
        if let Some(f) = &s.latent_family {
            sc.m_lat = reg.parse(f)?;
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn fit_dir(&self) -> PathBuf {
        self.predict.fit_dir.clone().unwrap_or_else(|| self.out.clone())
    }
}

//! Experiment configuration. Every section rejects unknown keys.

use std::path::{Path, PathBuf};

use diversity_core::model::DriftSpec;
use diversity_core::simulate::{MarketConfig, Scheme, SimParams};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub sim: SimSection,
    /// `None` when the file has no `[outputs]` table.
    pub outputs: Option<OutputsSection>,
    pub verify: Option<VerifySection>,
    pub feller: Option<FellerSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    PowerLaw,
    PatchedPowerLaw,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n: usize,
    pub delta: f64,
    pub family: FamilyName,
    pub p: f64,
    pub q: f64,
    pub c: Option<f64>,
    pub x_switch: Option<f64>,
    pub initial_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub record_stride: Option<usize>,
    pub scheme: Option<Scheme>,
    pub continue_after_hit: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(CliError::Config(format!(
                "unknown format {other:?} (expected csv, json or svg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Paths whose trajectories go to the CSV and the plot.
    #[serde(default = "default_recorded")]
    pub recorded_paths: usize,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
            recorded_paths: default_recorded(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json]
}

fn default_recorded() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Defaults to `power_law` for two stocks and `patched_power_law` otherwise.
    pub family: Option<FamilyName>,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_x_switch")]
    pub x_switch: f64,
    #[serde(default)]
    pub ito_check: bool,
    #[serde(default = "default_ito_horizon")]
    pub ito_horizon: f64,
    #[serde(default = "default_ito_paths")]
    pub ito_paths: usize,
}

fn default_c() -> f64 {
    0.5
}

fn default_x_switch() -> f64 {
    0.1
}

fn default_ito_horizon() -> f64 {
    1.0
}

fn default_ito_paths() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionChoice {
    /// First weight of the two-stock market built from `[model]`.
    WeightN2,
    /// `drift` and `diffusion_sq` given as sums of `coef * x^power`.
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FellerSection {
    pub diffusion: DiffusionChoice,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub x0: Option<f64>,
    /// `[[coef, power], ...]`.
    #[serde(default)]
    pub drift: Vec<[f64; 2]>,
    #[serde(default)]
    pub diffusion_sq: Vec<[f64; 2]>,
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = Some(seed);
        }
        if o.out.is_none() && o.formats.is_none() {
            return;
        }
        let out = self.outputs.get_or_insert_with(OutputsSection::default);
        if let Some(dir) = &o.out {
            out.directory = dir.clone();
        }
        if let Some(f) = &o.formats {
            out.formats = f.clone();
        }
    }

    /// Checks every section present, whichever subcommand will use it.
    pub fn validate(&self) -> Result<(), CliError> {
        self.sim_params()?;
        if let Some(m) = &self.model {
            m.market()?;
        }
        if let Some(o) = &self.outputs {
            if o.recorded_paths == 0 && o.formats.iter().any(|f| *f != Format::Json) {
                return Err(CliError::Config(
                    "recorded_paths must be at least 1 for csv or svg output".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSection, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [model] section".into()))
    }

    pub fn sim_params(&self) -> Result<SimParams, CliError> {
        let d = SimParams::default();
        let s = &self.sim;
        let params = SimParams {
            dt: s.dt.unwrap_or(d.dt),
            horizon: s.horizon.unwrap_or(d.horizon),
            n_paths: s.n_paths.unwrap_or(d.n_paths),
            seed: s.seed.unwrap_or(d.seed),
            record_stride: s.record_stride.unwrap_or(d.record_stride),
            scheme: s.scheme.unwrap_or(d.scheme),
            continue_after_hit: s.continue_after_hit.unwrap_or(d.continue_after_hit),
        };
        params.validate().map_err(CliError::from_core)?;
        Ok(params)
    }

    /// Output settings, defaulted when neither the file nor the flags gave any.
    pub fn outputs(&self) -> OutputsSection {
        self.outputs.clone().unwrap_or_default()
    }

    /// Whether an output location was asked for explicitly.
    pub fn outputs_given(&self) -> bool {
        self.outputs.is_some()
    }
}

impl ModelSection {
    pub fn spec(&self) -> Result<DriftSpec, CliError> {
        build_spec(
            self.family,
            self.delta,
            self.p,
            self.q,
            self.c,
            self.x_switch,
        )
    }

    pub fn market(&self) -> Result<MarketConfig, CliError> {
        MarketConfig::new(self.n, self.spec()?, self.initial_weights.clone())
            .map_err(CliError::from_core)
    }
}

pub fn build_spec(
    family: FamilyName,
    delta: f64,
    p: f64,
    q: f64,
    c: Option<f64>,
    x_switch: Option<f64>,
) -> Result<DriftSpec, CliError> {
    let spec = match family {
        FamilyName::PowerLaw => {
            if c.is_some() || x_switch.is_some() {
                return Err(CliError::Config(
                    "c and x_switch only apply to family = \"patched_power_law\"".into(),
                ));
            }
            DriftSpec::power_law(delta, p, q)
        }
        FamilyName::PatchedPowerLaw => {
            let (Some(c), Some(xs)) = (c, x_switch) else {
                return Err(CliError::Config(
                    "patched_power_law needs c and x_switch".into(),
                ));
            };
            DriftSpec::patched_power_law(delta, p, q, c, xs)
        }
    };
    spec.map_err(CliError::from_core)
}

/// `sum coef * x^power`.
pub fn power_sum(terms: &[[f64; 2]], x: f64) -> f64 {
    terms.iter().map(|[c, k]| c * x.powf(*k)).sum()
}

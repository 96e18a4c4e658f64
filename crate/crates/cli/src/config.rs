//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bayeskern::kalman::{FilterInit, StateSpaceAR1};
use bayeskern::smoothers::Smoother;
use bayeskern::{KernelSpec, SamplingScheme};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rvm,
    Qgp,
    Gp,
    Smoother,
    Kalman,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rvm => "rvm",
            ModelKind::Qgp => "qgp",
            ModelKind::Gp => "gp",
            ModelKind::Smoother => "smoother",
            ModelKind::Kalman => "kalman",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Relative paths resolve against the config file's directory.
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub noise_var: f64,
    #[serde(default)]
    pub seed: u64,
    /// Added to the noise variance on the training diagonal.
    #[serde(default)]
    pub jitter: f64,
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub prior: PriorConfig,
    pub smoother: Option<SmootherConfig>,
    pub kalman: Option<KalmanConfig>,
    #[serde(default)]
    pub points: PointsConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub learn: LearnConfig,
    #[serde(default)]
    pub relevance: RelevanceConfig,
    pub compare: Option<CompareConfig>,
}

/// `family` plus that family's numeric parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct KernelConfig {
    pub family: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

impl KernelConfig {
    pub fn spec(&self) -> Result<KernelSpec> {
        Ok(KernelSpec::from_params(&self.family, &self.params)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKind {
    #[default]
    Isotropic,
    Diagonal,
    InverseDesign,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub kind: PriorKind,
    #[serde(default = "one")]
    pub var: f64,
    #[serde(default)]
    pub vars: Vec<f64>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            kind: PriorKind::Isotropic,
            var: 1.0,
            vars: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmootherConfig {
    pub method: String,
    pub k: Option<usize>,
    pub p: Option<f64>,
    pub kernel: Option<KernelConfig>,
}

impl SmootherConfig {
    pub fn build(&self) -> Result<Smoother> {
        let s = match self.method.as_str() {
            "nadaraya-watson" => Smoother::NadarayaWatson {
                kernel: self
                    .kernel
                    .as_ref()
                    .ok_or_else(|| CliError::Config("nadaraya-watson needs [smoother.kernel]".into()))?
                    .spec()?,
            },
            "knn" => Smoother::Knn {
                k: self.k.ok_or_else(|| CliError::Config("knn needs smoother.k".into()))?,
            },
            "idw" => Smoother::InverseDistance { p: self.p.unwrap_or(2.0) },
            "lagrange" => Smoother::Lagrange,
            "sinc" => Smoother::Sinc,
            other => return Err(CliError::Config(format!("unknown smoother method {other:?}"))),
        };
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanConfig {
    pub gamma: f64,
    pub process_var: f64,
    /// Defaults to the top-level `noise_var`.
    pub obs_var: Option<f64>,
    pub init_mean: Option<f64>,
    pub init_var: Option<f64>,
}

impl KalmanConfig {
    pub fn model(&self, noise_var: f64) -> Result<StateSpaceAR1> {
        Ok(StateSpaceAR1::new(self.gamma, self.process_var, self.obs_var.unwrap_or(noise_var))?)
    }

    pub fn init(&self) -> Result<FilterInit> {
        match (self.init_mean, self.init_var) {
            (None, None) => Ok(FilterInit::Stationary),
            (Some(m), Some(v)) => Ok(FilterInit::Known(m, v)),
            _ => Err(CliError::Config("kalman.init_mean and kalman.init_var go together".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PointList {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

/// Query points; the training inputs when neither field is set.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsConfig {
    pub values: Option<PointList>,
    pub grid: Option<Grid>,
}

impl PointsConfig {
    pub fn resolve(&self, training: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match (&self.values, &self.grid) {
            (Some(_), Some(_)) => Err(CliError::Config("points.values and points.grid are exclusive".into())),
            (Some(PointList::Scalar(v)), None) => Ok(v.iter().map(|&x| vec![x]).collect()),
            (Some(PointList::Vector(v)), None) => Ok(v.clone()),
            (None, Some(g)) => {
                if g.count == 0 {
                    return Err(CliError::Config("points.grid.count must be >= 1".into()));
                }
                let step = if g.count > 1 { (g.to - g.from) / (g.count - 1) as f64 } else { 0.0 };
                Ok((0..g.count).map(|i| vec![g.from + step * i as f64]).collect())
            }
            (None, None) => Ok(training.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleTarget {
    #[default]
    Posterior,
    Prior,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "five")]
    pub count: usize,
    #[serde(default)]
    pub target: SampleTarget,
    #[serde(default)]
    pub scheme: SchemeName,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            count: 5,
            target: SampleTarget::Posterior,
            scheme: SchemeName::WeightSpace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    WeightSpace,
    FunctionSpace,
}

impl From<SchemeName> for SamplingScheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::WeightSpace => SamplingScheme::WeightSpace,
            SchemeName::FunctionSpace => SamplingScheme::FunctionSpace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnMethod {
    #[default]
    Type2,
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    #[serde(default)]
    pub method: LearnMethod,
    /// Free hyperparameters and their box constraints.
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default = "two_hundred")]
    pub max_iter: usize,
    /// Starting value of the weight-prior variance for the RVM family.
    #[serde(default = "one")]
    pub prior_var: f64,
    pub chain_len: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub proposal_scale: Option<f64>,
    pub tune: Option<bool>,
    /// Log-sd of the log-normal hyperprior centred at the starting point.
    pub log_sd: Option<f64>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            method: LearnMethod::Type2,
            bounds: BTreeMap::new(),
            max_iter: 200,
            prior_var: 1.0,
            chain_len: None,
            burn_in: None,
            thin: None,
            proposal_scale: None,
            tune: None,
            log_sd: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceConfig {
    #[serde(default = "two_hundred")]
    pub max_iter: usize,
    #[serde(default = "prune")]
    pub prune_threshold: f64,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            prune_threshold: bayeskern::rvm::DEFAULT_PRUNE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    #[default]
    Predict,
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub left: ModelKind,
    pub right: ModelKind,
    #[serde(default)]
    pub quantity: Quantity,
}

fn one() -> f64 {
    1.0
}

fn five() -> usize {
    5
}

fn two_hundred() -> usize {
    200
}

fn prune() -> f64 {
    bayeskern::rvm::DEFAULT_PRUNE_THRESHOLD
}

/// Parsed config plus the raw bytes its digest is taken over.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub raw: Vec<u8>,
    pub dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_bytes(raw, dir)
    }

    pub fn from_bytes(raw: Vec<u8>, dir: PathBuf) -> Result<Self> {
        let text = std::str::from_utf8(&raw).map_err(|e| CliError::Config(format!("not UTF-8: {e}")))?;
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        Ok(Self { config, raw, dir })
    }

    /// Hex SHA-256 of the config bytes.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(&self.raw))
    }

    pub fn data_path(&self) -> Option<PathBuf> {
        self.config.data.as_ref().map(|p| if p.is_absolute() { p.clone() } else { self.dir.join(p) })
    }
}

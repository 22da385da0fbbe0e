//! Evaluation configuration.
//!
//! A run is described by one TOML document:
//!
//! ```toml
//! output_dir = "out"                 # relative to the config file
//! ratios = [2, 3, 4, 5]
//! rules = ["floor", "ceil", "round"]
//! tie_epsilon = 0.0
//! projection_populations = [800, 8000, 80000, 800000]
//! proportion = 0.5
//! z = 1.96
//! jobs = 4
//! fit = "crop"                       # or "strict"
//!
//! [[images]]
//! id = "camera"
//! path = "images/camera.pgm"
//! crop = { left = 1, top = 1, width = 512, height = 512 }   # optional
//!
//! [[metrics]]
//! name = "MSE"
//!
//! [[metrics]]
//! name = "NIQE"
//! command = ["python3", "niqe.py"]
//! timeout_secs = 60
//! ```
//!
//! Only `images` is required. Metrics default to MSE and SSIM.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nnround_core::evalstat::{DEFAULT_PROPORTION, Z_95};
use nnround_core::metrics::Polarity;
use nnround_core::{CropRect, ExternalScorer, MetricId, RoundingRule, DEFAULT_RULES};
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_RATIOS: [u32; 4] = [2, 3, 4, 5];
pub const DEFAULT_POPULATIONS: [u64; 4] = [800, 8_000, 80_000, 800_000];
const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// How to handle a reference whose size is not divisible by a ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitPolicy {
    /// Shrink to the largest divisible size, anchored at the top-left corner.
    #[default]
    Crop,
    /// Refuse and report a suggested crop.
    Strict,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    images: Vec<RawImage>,
    ratios: Option<Vec<u32>>,
    metrics: Option<Vec<RawMetric>>,
    rules: Option<Vec<String>>,
    tie_epsilon: Option<f64>,
    projection_populations: Option<Vec<u64>>,
    proportion: Option<f64>,
    z: Option<f64>,
    output_dir: Option<PathBuf>,
    jobs: Option<usize>,
    fit: Option<FitPolicy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImage {
    id: String,
    path: PathBuf,
    crop: Option<RawCrop>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrop {
    left: usize,
    top: usize,
    width: usize,
    height: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    name: String,
    command: Option<Vec<String>>,
    timeout_secs: Option<f64>,
    polarity: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSpec {
    pub id: String,
    pub path: PathBuf,
    pub crop: Option<CropRect>,
}

/// A metric computed in-process or through an external scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricPlan {
    Native(MetricId),
    External(ExternalScorer),
}

impl MetricPlan {
    pub fn id(&self) -> &MetricId {
        match self {
            MetricPlan::Native(id) => id,
            MetricPlan::External(s) => s.metric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub images: Vec<ImageSpec>,
    pub ratios: Vec<u32>,
    pub metrics: Vec<MetricPlan>,
    pub rules: Vec<RoundingRule>,
    pub tie_epsilon: f64,
    pub projection_populations: Vec<u64>,
    pub proportion: f64,
    pub z: f64,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub fit: FitPolicy,
}

/// Command-line values that replace the corresponding config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub rules: Option<Vec<RoundingRule>>,
    pub ratios: Option<Vec<u32>>,
    pub tie_epsilon: Option<f64>,
    pub jobs: Option<usize>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl EvalConfig {
    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };

        let images = raw
            .images
            .into_iter()
            .map(|img| ImageSpec {
                id: img.id,
                path: resolve(img.path),
                crop: img
                    .crop
                    .map(|c| CropRect::new(c.left, c.top, c.width, c.height)),
            })
            .collect();
        let rules = match raw.rules {
            Some(names) => names
                .iter()
                .map(|n| {
                    n.parse::<RoundingRule>()
                        .map_err(|e| invalid(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => DEFAULT_RULES.to_vec(),
        };
        let metrics = match raw.metrics {
            Some(list) => list
                .into_iter()
                .map(resolve_metric)
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![
                MetricPlan::Native(MetricId::mse()),
                MetricPlan::Native(MetricId::ssim()),
            ],
        };
        let config = EvalConfig {
            images,
            ratios: raw.ratios.unwrap_or_else(|| DEFAULT_RATIOS.to_vec()),
            metrics,
            rules,
            tie_epsilon: raw.tie_epsilon.unwrap_or(0.0),
            projection_populations: raw
                .projection_populations
                .unwrap_or_else(|| DEFAULT_POPULATIONS.to_vec()),
            proportion: raw.proportion.unwrap_or(DEFAULT_PROPORTION),
            z: raw.z.unwrap_or(Z_95),
            output_dir: resolve(raw.output_dir.unwrap_or_else(|| PathBuf::from("out"))),
            jobs: raw.jobs.unwrap_or_else(default_jobs),
            fit: raw.fit.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn apply(mut self, o: Overrides) -> Result<Self, ConfigError> {
        if let Some(out) = o.output_dir {
            self.output_dir = out;
        }
        if let Some(rules) = o.rules {
            self.rules = rules;
        }
        if let Some(ratios) = o.ratios {
            self.ratios = ratios;
        }
        if let Some(eps) = o.tie_epsilon {
            self.tie_epsilon = eps;
        }
        if let Some(jobs) = o.jobs {
            self.jobs = jobs;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.images.is_empty() {
            return Err(invalid("at least one image is required"));
        }
        if self.ratios.is_empty() || self.metrics.is_empty() || self.rules.is_empty() {
            return Err(invalid("ratios, metrics and rules must be non-empty"));
        }
        if let Some(r) = self.ratios.iter().find(|&&r| r < 2) {
            return Err(invalid(format!("ratio {r} is below 2")));
        }
        check_unique("image id", self.images.iter().map(|i| i.id.as_str()))?;
        check_unique("ratio", self.ratios.iter())?;
        check_unique("rule", self.rules.iter())?;
        check_unique(
            "metric",
            self.metrics
                .iter()
                .map(|m| m.id().name().to_ascii_uppercase()),
        )?;
        if !(self.tie_epsilon >= 0.0 && self.tie_epsilon.is_finite()) {
            return Err(invalid(format!(
                "tie_epsilon {} must be finite and non-negative",
                self.tie_epsilon
            )));
        }
        if self.projection_populations.contains(&0) {
            return Err(invalid("projection populations must be positive"));
        }
        if !(0.0..=1.0).contains(&self.proportion) {
            return Err(invalid(format!(
                "proportion {} outside [0, 1]",
                self.proportion
            )));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(invalid(format!("z {} must be positive", self.z)));
        }
        if self.jobs == 0 {
            return Err(invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    /// Number of (image, ratio, metric) cases in the full grid.
    pub fn grid_size(&self) -> usize {
        self.images.len() * self.ratios.len() * self.metrics.len()
    }
}

fn check_unique<T: Ord + std::fmt::Debug>(
    what: &str,
    items: impl Iterator<Item = T>,
) -> Result<(), ConfigError> {
    let mut seen = BTreeSet::new();
    for item in items {
        if let Some(dup) = seen.replace(item) {
            return Err(invalid(format!("duplicate {what} {dup:?}")));
        }
    }
    Ok(())
}

fn resolve_metric(raw: RawMetric) -> Result<MetricPlan, ConfigError> {
    let polarity = match raw
        .polarity
        .as_deref()
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        None => None,
        Some("lower") => Some(Polarity::LowerBetter),
        Some("higher") => Some(Polarity::HigherBetter),
        Some(other) => {
            return Err(invalid(format!(
                "metric {}: polarity {other:?} must be \"lower\" or \"higher\"",
                raw.name
            )))
        }
    };
    let builtin = MetricId::builtin(&raw.name);
    match (builtin, raw.command) {
        (Some(id), None) if id.is_native() => Ok(MetricPlan::Native(id)),
        (Some(id), Some(_)) if id.is_native() => Err(invalid(format!(
            "metric {} is computed natively and takes no command",
            id
        ))),
        (known, Some(command)) => {
            let id = match known {
                Some(id) => {
                    if polarity.is_some_and(|p| p != id.polarity()) {
                        return Err(invalid(format!("metric {id} has a fixed polarity")));
                    }
                    id
                }
                None => MetricId::external(
                    raw.name.clone(),
                    polarity.ok_or_else(|| {
                        invalid(format!(
                            "metric {}: external metrics need a polarity",
                            raw.name
                        ))
                    })?,
                ),
            };
            let secs = raw.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(invalid(format!(
                    "metric {id}: timeout_secs must be positive"
                )));
            }
            ExternalScorer::new(id, command, Duration::from_secs_f64(secs))
                .map(MetricPlan::External)
                .map_err(|e| invalid(format!("metric {}: {e}", raw.name)))
        }
        (_, None) => Err(invalid(format!(
            "metric {} needs an external scorer command",
            raw.name
        ))),
    }
}

//! TOML run configuration: parsing, validation and conversion into the
//! library's domain types.

use pbdesign::{
    baseline_contrasts, helmert_contrasts, AnnealConfig, BlockDesign, ContrastSet, Criterion,
    InitialTemp, PointPriors,
};
use serde::{Deserialize, Serialize};

/// Parse failures keep the TOML location context; validation failures name
/// the violated invariant.
#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Validation(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(msg) => write!(f, "config parse error: {msg}"),
            ConfigError::Validation(msg) => write!(f, "config validation error: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContrastSpec {
    /// "baseline" (differences from treatment 1, the default) or "helmert".
    Named(String),
    /// Explicit `t x c` matrix, one row per treatment.
    Matrix(Vec<Vec<f64>>),
}

impl Default for ContrastSpec {
    fn default() -> Self {
        ContrastSpec::Named("baseline".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialTempSpec {
    Named(String), // "auto"
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_temp: Option<InitialTempSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooling_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps_per_temp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temp_levels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl AnnealSection {
    fn is_empty(&self) -> bool {
        *self == AnnealSection::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub alloc: Vec<Vec<u32>>,
}

fn default_criterion() -> String {
    "C".into()
}

/// One run: problem dimensions, point priors, criterion, contrasts,
/// annealing overrides and optional explicit designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub t: usize,
    pub b: usize,
    pub k: usize,
    pub lambda: Vec<f64>,
    /// Residual variance; `sigma` is the standard-deviation alias, squared
    /// on ingestion. Exactly one of the two must be present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Block variance; `sigmab` is the standard-deviation alias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmab2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmab: Option<f64>,
    #[serde(default = "default_criterion")]
    pub criterion: String,
    #[serde(default)]
    pub contrasts: ContrastSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "AnnealSection::is_empty")]
    pub anneal: AnnealSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub designs: Vec<DesignEntry>,
}

/// Domain objects built from a validated config.
pub struct Resolved {
    pub priors: PointPriors,
    pub contrasts: ContrastSet,
    pub criterion: Criterion,
    pub anneal: AnnealConfig,
    pub designs: Vec<(String, BlockDesign)>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.resolve()?;
    Ok(config)
}

#[cfg_attr(not(test), allow(dead_code))]
pub fn render_config(config: &RunConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes")
}

fn variance_from_pair(
    name2: &str,
    direct: Option<f64>,
    name_sd: &str,
    sd: Option<f64>,
) -> Result<f64, ConfigError> {
    let value = match (direct, sd) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Validation(format!(
                "{name2} and {name_sd} are both set; give exactly one"
            )))
        }
        (None, None) => {
            return Err(ConfigError::Validation(format!(
                "one of {name2} or {name_sd} is required"
            )))
        }
        (Some(v), None) => v,
        (None, Some(s)) => s * s,
    };
    if !(value.is_finite() && value >= 0.0) {
        return Err(ConfigError::Validation(format!(
            "{name2} must be finite and non-negative"
        )));
    }
    Ok(value)
}

impl RunConfig {
    /// Validates every invariant and builds the domain objects.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let val = ConfigError::Validation;
        if self.t < 1 || self.b < 1 || self.k < 1 {
            return Err(val("t, b and k must all be at least 1".into()));
        }
        if self.lambda.len() != self.t {
            return Err(val(format!(
                "lambda length {} must equal t = {}",
                self.lambda.len(),
                self.t
            )));
        }
        let sigma2 = variance_from_pair("sigma2", self.sigma2, "sigma", self.sigma)?;
        let sigmab2 = variance_from_pair("sigmab2", self.sigmab2, "sigmab", self.sigmab)?;
        let priors = PointPriors::new(self.lambda.clone(), sigma2, sigmab2)
            .map_err(|e| val(e.to_string()))?;

        let criterion: Criterion = self
            .criterion
            .parse()
            .map_err(|e: pbdesign::Error| val(e.to_string()))?;

        let contrasts = match &self.contrasts {
            ContrastSpec::Named(name) => match name.as_str() {
                "baseline" => baseline_contrasts(self.t).map_err(|e| val(e.to_string()))?,
                "helmert" => helmert_contrasts(self.t).map_err(|e| val(e.to_string()))?,
                other => {
                    return Err(val(format!(
                        "contrasts must be \"baseline\", \"helmert\" or a matrix, got {other:?}"
                    )))
                }
            },
            ContrastSpec::Matrix(rows) => {
                if rows.len() != self.t {
                    return Err(val(format!(
                        "contrast matrix has {} rows but t = {}",
                        rows.len(),
                        self.t
                    )));
                }
                let cols = rows.first().map_or(0, |r| r.len());
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(val("contrast matrix rows have unequal lengths".into()));
                }
                let columns: Vec<Vec<f64>> = (0..cols)
                    .map(|j| rows.iter().map(|r| r[j]).collect())
                    .collect();
                ContrastSet::new(self.t, &columns).map_err(|e| val(e.to_string()))?
            }
        };

        let mut anneal = AnnealConfig::default();
        if let Some(spec) = &self.anneal.initial_temp {
            anneal.initial_temp = match spec {
                InitialTempSpec::Named(s) if s == "auto" => InitialTemp::Auto,
                InitialTempSpec::Named(s) => {
                    return Err(val(format!(
                        "initial_temp must be \"auto\" or a positive number, got {s:?}"
                    )))
                }
                InitialTempSpec::Fixed(v) => InitialTemp::Fixed(*v),
            };
        }
        if let Some(v) = self.anneal.cooling_factor {
            anneal.cooling_factor = v;
        }
        if let Some(v) = self.anneal.steps_per_temp {
            anneal.steps_per_temp = Some(v);
        }
        if let Some(v) = self.anneal.temp_levels {
            anneal.temp_levels = v;
        }
        if let Some(v) = &self.anneal.swap_probs {
            anneal.swap_probs = v.clone();
        }
        if let Some(v) = self.anneal.restarts {
            anneal.restarts = v;
        }
        if let Some(v) = self.anneal.seed {
            anneal.seed = v;
        }
        anneal.validate().map_err(|e| val(e.to_string()))?;

        let mut designs = Vec::with_capacity(self.designs.len());
        for (index, entry) in self.designs.iter().enumerate() {
            let id = entry
                .id
                .clone()
                .unwrap_or_else(|| format!("D{}", index + 1));
            let design = BlockDesign::new(self.t, self.b, self.k, &entry.alloc)
                .map_err(|e| val(format!("design {id}: {e}")))?;
            designs.push((id, design));
        }

        Ok(Resolved {
            priors,
            contrasts,
            criterion,
            anneal,
            designs,
        })
    }
}

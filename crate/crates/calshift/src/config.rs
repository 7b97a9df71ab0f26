use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use ratio_meta::{EstimatorMode, TrainConfig};

use crate::{HarnessError, Result};

/// One of the seven set-prediction pipelines. Top-k carries its list size
/// in the name, e.g. `top-2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    TopK(usize),
    Cp,
    Ccp,
    WcpIdeal,
    MlWcp,
    MlWcpMv,
    MlWcpMix,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::TopK(k) => format!("top-{k}"),
            Method::Cp => "cp".into(),
            Method::Ccp => "ccp".into(),
            Method::WcpIdeal => "wcp-ideal".into(),
            Method::MlWcp => "ml-wcp".into(),
            Method::MlWcpMv => "ml-wcp-mv".into(),
            Method::MlWcpMix => "ml-wcp-mix".into(),
        }
    }

    /// Whether the pipeline reads ratio estimates from a pairwise-trained
    /// model. CCP estimates its total-variation derating from the model
    /// whenever the scenario has no exact-likelihood oracle.
    pub fn needs_pairwise_model(&self, scenario_has_oracle: bool) -> bool {
        match self {
            Method::MlWcp | Method::MlWcpMv => true,
            Method::Ccp => !scenario_has_oracle,
            _ => false,
        }
    }

    pub fn needs_mixture_model(&self) -> bool {
        matches!(self, Method::MlWcpMix)
    }

    /// Single-calibration-context pipelines reject multi-context selection.
    pub fn requires_single_context(&self) -> bool {
        matches!(self, Method::Ccp | Method::MlWcp)
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cp" => return Ok(Method::Cp),
            "ccp" => return Ok(Method::Ccp),
            "wcp-ideal" => return Ok(Method::WcpIdeal),
            "ml-wcp" => return Ok(Method::MlWcp),
            "ml-wcp-mv" => return Ok(Method::MlWcpMv),
            "ml-wcp-mix" => return Ok(Method::MlWcpMix),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("top-") {
            let k: usize = k
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad top-k method '{s}'")))?;
            if k == 0 {
                return Err(HarnessError::Config("top-0 is not a method".into()));
            }
            return Ok(Method::TopK(k));
        }
        Err(HarnessError::Config(format!(
            "unknown method '{s}' (expected top-<k>, cp, ccp, wcp-ideal, ml-wcp, ml-wcp-mv, ml-wcp-mix)"
        )))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Calibration-context selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionConfig {
    /// Nearest context by cosine distance.
    Single,
    /// The k nearest contexts.
    FixedK { k: usize },
    /// Every context within distance epsilon (nearest as fallback).
    Adaptive { epsilon: f64 },
    /// One context drawn uniformly per trial.
    Random,
}

impl SelectionConfig {
    pub fn label(&self) -> String {
        match self {
            SelectionConfig::Single => "single".into(),
            SelectionConfig::FixedK { k } => format!("fixed-{k}"),
            SelectionConfig::Adaptive { epsilon } => format!("adaptive-{epsilon}"),
            SelectionConfig::Random => "random".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Cal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianContextSpec {
    pub id: String,
    pub mean: f64,
    pub variance: f64,
    pub split: SplitTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianScenarioConfig {
    pub contexts: Vec<GaussianContextSpec>,
    /// Test contexts; defaults to the calibration split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_pool: Option<Vec<String>>,
}

/// One explicit link-scenario context. Which fields apply depends on the
/// informativeness level: `p_b` for least, `i_b` for moderate and most,
/// `t_0` for most.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyContextSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_b: Option<u8>,
    pub t_b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_0: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InformativenessConfig {
    Least,
    Moderate,
    Most,
}

fn default_snr() -> f64 {
    1.0
}

fn default_inr() -> f64 {
    -7.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyScenarioConfig {
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default = "default_inr")]
    pub inr_db: f64,
    pub informativeness: InformativenessConfig,
    /// Rate-1/2 generator polynomials in octal; defaults to (7, 5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_polynomials: Option<(u32, u32)>,
    /// Explicit context grid; defaults to the built-in grid of the level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<PhyContextSpec>>,
    /// Test contexts; defaults to the calibration split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_pool: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestedScenarioConfig {
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioConfig {
    Phy(PhyScenarioConfig),
    Gaussian(GaussianScenarioConfig),
    Ingested(IngestedScenarioConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    /// Meta-training contexts; required by the link scenario, derived from
    /// split tags elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_contexts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cal_contexts: Option<usize>,
    pub samples_per_context: usize,
    pub trials: usize,
}

/// Optional training overrides; anything unset falls back to the
/// per-mode defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub adam_beta1: Option<f64>,
    pub adam_beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub pairs_per_iteration: Option<usize>,
    pub examples_per_context: Option<usize>,
    pub max_epochs: Option<usize>,
    pub early_stop_patience: Option<usize>,
}

impl TrainSettings {
    pub fn resolve(&self, mode: EstimatorMode, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::defaults(mode, seed);
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.adam_beta1 {
            cfg.adam_beta1 = v;
        }
        if let Some(v) = self.adam_beta2 {
            cfg.adam_beta2 = v;
        }
        if let Some(v) = self.adam_eps {
            cfg.adam_eps = v;
        }
        if let Some(v) = self.pairs_per_iteration {
            cfg.pairs_per_iteration = v;
        }
        if let Some(v) = self.examples_per_context {
            cfg.examples_per_context = v;
        }
        if let Some(v) = self.max_epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.early_stop_patience {
            cfg.early_stop_patience = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub method: Method,
    pub alpha: f64,
    pub selection: SelectionConfig,
    pub counts: CountsConfig,
    pub seed: u64,
    #[serde(default)]
    pub train: TrainSettings,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HarnessError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.counts.trials == 0 || self.counts.samples_per_context == 0 {
            return Err(HarnessError::Config(
                "trials and samples_per_context must be positive".into(),
            ));
        }
        if let SelectionConfig::FixedK { k: 0 } = self.selection {
            return Err(HarnessError::Config("fixed-k selection needs k >= 1".into()));
        }
        if let SelectionConfig::Adaptive { epsilon } = self.selection {
            if !(epsilon.is_finite() && epsilon >= 0.0) {
                return Err(HarnessError::Config(format!(
                    "adaptive selection needs a nonnegative epsilon, got {epsilon}"
                )));
            }
        }
        if self.method.requires_single_context() {
            let single = matches!(
                self.selection,
                SelectionConfig::Single | SelectionConfig::Random | SelectionConfig::FixedK { k: 1 }
            );
            if !single {
                return Err(HarnessError::Config(format!(
                    "method {} calibrates on one context; use single, random, or fixed-k with k = 1",
                    self.method
                )));
            }
        }
        if let ScenarioConfig::Phy(phy) = &self.scenario {
            if self.counts.train_contexts.is_none() || self.counts.cal_contexts.is_none() {
                return Err(HarnessError::Config(
                    "the link scenario needs counts.train_contexts and counts.cal_contexts".into(),
                ));
            }
            if !(phy.snr_db.is_finite() && phy.inr_db.is_finite()) {
                return Err(HarnessError::Config("snr_db and inr_db must be finite".into()));
            }
        }
        Ok(())
    }
}

//! Pipeline configuration, typically read from a TOML file and then
//! overridden field by field from the command line.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::aggregate::AggregationConfig;
use crate::augment::AugmentConfig;
use crate::classify::ClassifierConfig;
use crate::dtw::DtwConfig;
use crate::provider::ProviderSpec;
use crate::{Error, Result};

fn default_alpha() -> f64 {
    0.1
}
fn default_timeout() -> f64 {
    300.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub provider: ProviderSpec,
    #[serde(default)]
    pub aggregation: AggregationConfig,
    #[serde(default)]
    pub augment: AugmentConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub dtw: DtwConfig,
    /// Suite directories, each holding `<Name>/<Name>_TRAIN.tsd` and
    /// `<Name>/<Name>_TEST.tsd`.
    #[serde(default)]
    pub suites: Vec<PathBuf>,
    /// Longest allowed series; 0 keeps everything.
    #[serde(default)]
    pub max_len: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Per-cell limit in seconds; 0 disables it.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            provider: ProviderSpec::default(),
            aggregation: AggregationConfig::default(),
            augment: AugmentConfig::default(),
            classifier: ClassifierConfig::default(),
            dtw: DtwConfig::default(),
            suites: Vec::new(),
            max_len: 0,
            seed: 0,
            alpha: default_alpha(),
            timeout_secs: default_timeout(),
            jobs: None,
            out: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.timeout_secs >= 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::invalid("timeout_secs must be a non-negative number"));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs must be >= 1"));
        }
        if self.augment.stats && self.augment.k == 0 {
            return Err(Error::invalid("patch count k must be >= 1"));
        }
        self.classifier.linear.validate()?;
        self.dtw.validate()?;
        if let ProviderSpec::File(f) = &self.provider {
            if !f.dir.is_dir() {
                return Err(Error::invalid(format!(
                    "hidden-state directory {} does not exist",
                    f.dir.display()
                )));
            }
        }
        for s in &self.suites {
            if !s.is_dir() {
                return Err(Error::invalid(format!("suite directory {} does not exist", s.display())));
            }
        }
        Ok(())
    }

    /// The classifier settings with the pipeline seed and job count applied.
    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            seed: self.seed,
            threads: self.jobs,
            ..self.classifier.clone()
        }
    }
}

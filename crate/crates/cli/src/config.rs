//! Run configuration file (TOML).
//!
//! ```toml
//! output_dir = "reports"          # default "mcudi-out"
//! seeds = [11, 23, 37]            # default: ten pinned seeds
//! alpha = 0.05
//! window = 1
//! folds = 10
//!
//! [schema]
//! feature_columns = ["smart_5_raw", "smart_187_raw"]
//! label_column = "failure"
//! period_column = "date"
//! period_granularity = "week"     # day | week | month | { rows = 5000 }
//!
//! [hyperparams]
//! n_trees = 100
//! min_samples_split = 2
//! max_features = "sqrt"           # sqrt | all | { fixed = 3 }
//! bootstrap = true
//! # max_depth = 12
//! ```

use std::path::{Path, PathBuf};

use mcudi_core::classifier::ForestHyperparams;
use mcudi_core::data::DatasetSchema;
use mcudi_core::evaluation::EvaluationConfig;
use mcudi_core::ground_truth::{GroundTruthConfig, DEFAULT_FOLDS, DEFAULT_SEEDS};
use mcudi_core::stats::DEFAULT_ALPHA;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: DatasetSchema,
    #[serde(default)]
    pub hyperparams: ForestHyperparams,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_window() -> usize {
    1
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("mcudi-out")
}

impl RunConfig {
    pub fn with_schema(schema: DatasetSchema) -> Self {
        Self {
            schema,
            hyperparams: ForestHyperparams::default(),
            seeds: default_seeds(),
            alpha: default_alpha(),
            window: default_window(),
            folds: default_folds(),
            output_dir: default_output_dir(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("cannot parse config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.schema.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Usage("seeds must not be empty".into()));
        }
        if self.window == 0 {
            return Err(CliError::Usage("window must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(CliError::Usage("folds must be at least 2".into()));
        }
        self.hyperparams.validate()?;
        Ok(())
    }

    pub fn ground_truth(&self) -> GroundTruthConfig {
        GroundTruthConfig {
            hyperparams: self.hyperparams.clone(),
            seeds: self.seeds.clone(),
            folds: self.folds,
            alpha: self.alpha,
        }
    }

    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            hyperparams: self.hyperparams.clone(),
            seeds: self.seeds.clone(),
            alpha: self.alpha,
            window: self.window,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable in TOML")
    }
}

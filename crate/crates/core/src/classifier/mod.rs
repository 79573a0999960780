//! Random-forest failure classifier with Gini splits and MDI importances,
//! plus the error metrics the evaluation harness needs.

mod forest;
mod metrics;
mod tree;

use serde::{Deserialize, Serialize};

pub use forest::{
    bootstrap_sample, train_forest, ForestHyperparams, ForestModel, MaxFeatures, ModelSummary,
};
pub use metrics::{cross_val_error, error_rate, fold_bounds, roc_auc, CrossValidation};
pub use tree::{DecisionTree, Node};

const MEAN_TOLERANCE: f64 = 1e-12;

/// Features whose importance is strictly above the mean importance.
///
/// "Above" ignores differences within a few ulps of the mean, so a uniform
/// importance vector selects nothing even when its mean rounds down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportantFeatureSet {
    pub indices: Vec<usize>,
    pub threshold: f64,
}

impl ImportantFeatureSet {
    pub fn from_importances(importances: &[f64]) -> Self {
        let threshold = if importances.is_empty() {
            0.0
        } else {
            importances.iter().sum::<f64>() / importances.len() as f64
        };
        let indices = importances
            .iter()
            .enumerate()
            .filter(|(_, &v)| v - threshold > MEAN_TOLERANCE * threshold.abs())
            .map(|(j, _)| j)
            .collect();
        Self { indices, threshold }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

pub fn important_features(model: &ForestModel) -> ImportantFeatureSet {
    ImportantFeatureSet::from_importances(model.importances())
}

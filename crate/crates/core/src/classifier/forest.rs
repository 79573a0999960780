use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use crate::data::Matrix;
use crate::error::{Error, Result};

/// How many features each split may consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(d)))`
    #[default]
    Sqrt,
    /// Every feature (plain bagged trees).
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl ForestHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::Config("max_depth must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config("min_samples_split must be at least 2".into()));
        }
        if self.max_features == MaxFeatures::Fixed(0) {
            return Err(Error::Config("max_features must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<DecisionTree>,
    importances: Vec<f64>,
    hyperparams: ForestHyperparams,
    train_seed: u64,
    n_features: usize,
}

/// Audit record of a trained forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub n_features: usize,
    pub train_seed: u64,
    pub hyperparams: ForestHyperparams,
    pub importances: Vec<f64>,
    pub total_splits: usize,
}

/// Per-tree RNG: a ChaCha stream keyed by the forest seed and the tree index,
/// so tree `i` is identical whatever the thread schedule.
pub(crate) fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

/// Bootstrap (or identity) sample drawn as the first step of tree `tree`.
pub fn bootstrap_sample(rng: &mut ChaCha8Rng, n: usize, bootstrap: bool) -> Vec<usize> {
    if bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    }
}

pub fn train_forest(
    features: &Matrix,
    labels: &[bool],
    hp: &ForestHyperparams,
    seed: u64,
) -> Result<ForestModel> {
    hp.validate()?;
    let n = features.n_rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "forest needs at least 2 rows, got {n}"
        )));
    }
    if !(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y)) {
        return Err(Error::SingleClass(
            "training labels contain a single class".into(),
        ));
    }
    let d = features.n_cols();
    let params = TreeParams {
        max_depth: hp.max_depth,
        min_samples_split: hp.min_samples_split,
        features_per_split: hp.max_features.resolve(d),
    };
    let trees: Vec<DecisionTree> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(seed, t);
            let sample = bootstrap_sample(&mut rng, n, hp.bootstrap);
            DecisionTree::grow(features, labels, sample, &params, &mut rng)
        })
        .collect();

    // total decrease per feature, averaged over trees, normalized to sum 1
    let mut importances = vec![0.0; d];
    for tree in &trees {
        for (acc, v) in importances
            .iter_mut()
            .zip(tree.impurity_decrease_by_feature())
        {
            *acc += v;
        }
    }
    for v in importances.iter_mut() {
        *v /= trees.len() as f64;
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    }

    Ok(ForestModel {
        trees,
        importances,
        hyperparams: hp.clone(),
        train_seed: seed,
        n_features: d,
    })
}

impl ForestModel {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// MDI importances; sum to 1 unless no tree made a split (then all zero).
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn train_seed(&self) -> u64 {
        self.train_seed
    }

    pub fn hyperparams(&self) -> &ForestHyperparams {
        &self.hyperparams
    }

    pub fn summary(&self) -> ModelSummary {
        ModelSummary {
            n_features: self.n_features,
            train_seed: self.train_seed,
            hyperparams: self.hyperparams.clone(),
            importances: self.importances.clone(),
            total_splits: self.trees.iter().map(|t| t.n_splits()).sum(),
        }
    }

    fn check_dims(&self, features: &Matrix) -> Result<()> {
        if features.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: features.n_cols(),
            });
        }
        Ok(())
    }

    /// Mean over trees of the class-1 frequency in the reached leaf.
    pub fn predict_proba(&self, features: &Matrix) -> Result<Vec<f64>> {
        self.check_dims(features)?;
        let k = self.trees.len() as f64;
        Ok(features
            .rows()
            .map(|row| self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / k)
            .collect())
    }

    /// Class 1 when the probability is at least 0.5.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<bool>> {
        Ok(self
            .predict_proba(features)?
            .into_iter()
            .map(|p| p >= 0.5)
            .collect())
    }
}

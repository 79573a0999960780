//! Drift ground truth from model error rates.
//!
//! For each consecutive pair of periods a forest is cross-validated on the
//! earlier period (training error) and, trained on the whole earlier period,
//! scored on the later one (testing error). A two-proportion Z-test on the two
//! error rates decides drift for that seed; a period is labeled drift when a
//! strict majority of all seeds vote drift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{cross_val_error, error_rate, train_forest, ForestHyperparams};
use crate::data::{apply_scaler, fit_scaler, Batch};
use crate::error::{Error, Result};
use crate::stats::{z_test_two_proportion, DEFAULT_ALPHA};

/// Seeds used when none are configured.
pub const DEFAULT_SEEDS: [u64; 10] = [11, 23, 37, 41, 53, 67, 79, 83, 97, 101];

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthConfig {
    pub hyperparams: ForestHyperparams,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub alpha: f64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            hyperparams: ForestHyperparams::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            folds: DEFAULT_FOLDS,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// The training period holds one class only, so no classifier can be fit.
    SingleClassPeriod,
    /// The training period has fewer rows than cross-validation folds.
    TooFewRows,
    /// Every cross-validation fold had a single-class training split.
    AllFoldsSkipped,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::SingleClassPeriod => "single-class period",
            ExclusionReason::TooFewRows => "too few rows",
            ExclusionReason::AllFoldsSkipped => "all folds skipped",
        }
    }
}

/// One seed's drift decision for a pair of periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedVote {
    pub seed: u64,
    pub drift: bool,
    pub eps_train: f64,
    pub eps_test: f64,
    pub z: f64,
    pub p_value: f64,
    pub severity: Option<f64>,
    pub degenerate: bool,
    pub skipped_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOutcome {
    Decided(SeedVote),
    Excluded(ExclusionReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub period_id: usize,
    pub period_key: String,
    pub n_seeds: usize,
    pub drift_votes: usize,
    /// Decided seeds only; excluded seed runs leave no vote.
    pub votes: Vec<SeedVote>,
    /// `None` when the period is excluded.
    pub is_drift: Option<bool>,
    /// Mean severity over all decided seeds with a defined severity.
    pub mean_severity: Option<f64>,
    /// Mean severity over the seeds that voted drift.
    pub drift_severity: Option<f64>,
    pub excluded: Option<ExclusionReason>,
}

impl GroundTruthLabel {
    pub fn is_excluded(&self) -> bool {
        self.excluded.is_some()
    }
}

/// Strict majority of all seeds, counting excluded seeds as non-drift.
pub fn majority_vote(drift_votes: usize, total_seeds: usize) -> bool {
    2 * drift_votes > total_seeds
}

/// Single-seed drift decision between a training and a testing period.
///
/// Both periods are standardized with a scaler fitted on the training period.
pub fn label_batch_pair(
    train: &Batch,
    test: &Batch,
    config: &GroundTruthConfig,
    seed: u64,
) -> Result<PairOutcome> {
    let train_y = train.require_labels()?;
    let test_y = test.require_labels()?;
    if train.n_features() != test.n_features() {
        return Err(Error::DimensionMismatch {
            expected: train.n_features(),
            found: test.n_features(),
        });
    }
    if !train.has_both_classes() {
        return Ok(PairOutcome::Excluded(ExclusionReason::SingleClassPeriod));
    }
    if train.len() < config.folds.max(2) {
        return Ok(PairOutcome::Excluded(ExclusionReason::TooFewRows));
    }
    let scaler = fit_scaler(train)?;
    let train_s = apply_scaler(&scaler, train)?;
    let test_s = apply_scaler(&scaler, test)?;

    let cv = match cross_val_error(
        train_s.features(),
        train_y,
        config.folds,
        &config.hyperparams,
        seed,
    ) {
        Ok(cv) => cv,
        Err(Error::SingleClass(_)) => {
            return Ok(PairOutcome::Excluded(ExclusionReason::AllFoldsSkipped))
        }
        Err(e) => return Err(e),
    };
    let model = train_forest(train_s.features(), train_y, &config.hyperparams, seed)?;
    let eps_test = error_rate(&model.predict(test_s.features())?, test_y)?;
    let z = z_test_two_proportion(cv.error, eps_test, train.len(), test.len(), config.alpha)?;
    Ok(PairOutcome::Decided(SeedVote {
        seed,
        drift: z.drift,
        eps_train: cv.error,
        eps_test,
        z: z.z,
        p_value: z.p_value,
        severity: z.severity,
        degenerate: z.degenerate,
        skipped_folds: cv.skipped_folds,
    }))
}

/// Labels every period after the first against its predecessor.
pub fn label_all_batches(
    batches: &[Batch],
    config: &GroundTruthConfig,
) -> Result<Vec<GroundTruthLabel>> {
    if batches.len() < 2 {
        return Err(Error::InsufficientData(
            "ground truth needs at least two periods".into(),
        ));
    }
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    batches
        .windows(2)
        .map(|pair| {
            let outcomes: Vec<PairOutcome> = config
                .seeds
                .par_iter()
                .map(|&seed| label_batch_pair(&pair[0], &pair[1], config, seed))
                .collect::<Result<_>>()?;
            Ok(aggregate(&pair[1], config.seeds.len(), outcomes))
        })
        .collect()
}

fn aggregate(test: &Batch, n_seeds: usize, outcomes: Vec<PairOutcome>) -> GroundTruthLabel {
    let mut votes = Vec::new();
    let mut reason = None;
    for o in outcomes {
        match o {
            PairOutcome::Decided(v) => votes.push(v),
            PairOutcome::Excluded(r) => {
                reason.get_or_insert(r);
            }
        }
    }
    let drift_votes = votes.iter().filter(|v| v.drift).count();
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (s, c) = it.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (c > 0).then(|| s / c as f64)
    };
    let mean_severity = mean(&mut votes.iter().filter_map(|v| v.severity));
    let drift_severity = mean(&mut votes.iter().filter(|v| v.drift).filter_map(|v| v.severity));
    let all_excluded = votes.is_empty();
    GroundTruthLabel {
        period_id: test.period_id(),
        period_key: test.period_key().to_string(),
        n_seeds,
        drift_votes,
        votes,
        is_drift: (!all_excluded).then(|| majority_vote(drift_votes, n_seeds)),
        mean_severity,
        drift_severity,
        excluded: if all_excluded { reason } else { None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn vote(seed: u64, drift: bool, severity: Option<f64>) -> PairOutcome {
        PairOutcome::Decided(SeedVote {
            seed,
            drift,
            eps_train: 0.1,
            eps_test: 0.1,
            z: 0.0,
            p_value: 1.0,
            severity,
            degenerate: false,
            skipped_folds: 0,
        })
    }

    fn dummy_batch() -> Batch {
        Batch::new(
            4,
            Matrix::from_rows(&[vec![0.0]]).unwrap(),
            Some(vec![true]),
        )
        .unwrap()
    }

    #[test]
    fn strict_majority() {
        assert!(majority_vote(6, 10));
        assert!(!majority_vote(5, 10));
        assert!(majority_vote(1, 1));
        assert!(!majority_vote(0, 1));
        assert!(majority_vote(2, 3));
    }

    #[test]
    fn aggregate_counts_and_severities() {
        let outcomes: Vec<PairOutcome> = (0..10)
            .map(|s| vote(s, s < 6, Some(if s < 6 { 1.0 } else { 0.0 })))
            .collect();
        let label = aggregate(&dummy_batch(), 10, outcomes);
        assert_eq!(label.drift_votes, 6);
        assert_eq!(label.is_drift, Some(true));
        assert_eq!(label.drift_severity, Some(1.0));
        assert!((label.mean_severity.unwrap() - 0.6).abs() < 1e-12);

        let outcomes: Vec<PairOutcome> = (0..10).map(|s| vote(s, s < 5, None)).collect();
        let label = aggregate(&dummy_batch(), 10, outcomes);
        assert_eq!(label.is_drift, Some(false));
        assert_eq!(label.mean_severity, None);
    }

    #[test]
    fn all_excluded_marks_period() {
        let outcomes = vec![PairOutcome::Excluded(ExclusionReason::SingleClassPeriod); 3];
        let label = aggregate(&dummy_batch(), 3, outcomes);
        assert!(label.is_excluded());
        assert_eq!(label.is_drift, None);
        assert_eq!(label.excluded, Some(ExclusionReason::SingleClassPeriod));
    }

    #[test]
    fn single_class_training_period_is_excluded() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let train =
            Batch::new(0, Matrix::from_rows(&rows).unwrap(), Some(vec![false; 20])).unwrap();
        let labels = (0..20).map(|i| i % 2 == 0).collect();
        let test = Batch::new(1, Matrix::from_rows(&rows).unwrap(), Some(labels)).unwrap();
        let cfg = GroundTruthConfig::default();
        for seed in [1, 2, 3] {
            assert_eq!(
                label_batch_pair(&train, &test, &cfg, seed).unwrap(),
                PairOutcome::Excluded(ExclusionReason::SingleClassPeriod)
            );
        }
    }

    #[test]
    fn unlabeled_batches_are_rejected() {
        let m = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let a = Batch::new(0, m.clone(), None).unwrap();
        let b = Batch::new(1, m, Some(vec![true, false])).unwrap();
        assert!(matches!(
            label_batch_pair(&a, &b, &GroundTruthConfig::default(), 0),
            Err(Error::MissingLabels(_))
        ));
    }
}

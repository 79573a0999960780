//! Model-centric, label-free drift indication for failure-prediction models.
//!
//! The crate trains a random-forest failure classifier on one period of
//! operational data, keeps the features whose MDI importance is above the
//! mean, and raises a drift alarm when a per-feature two-sample KS test on
//! those features rejects at `alpha`. Around that detector it provides the
//! baselines (never retrain, always retrain, KS on all features), an
//! error-rate based ground truth, and the evaluation harness: detection
//! accuracy, retraining-strategy simulation and label-cost accounting.
//!
//! ```no_run
//! use mcudi_core::prelude::*;
//!
//! let config = SynthConfig {
//!     n_features: 6,
//!     periods: 4,
//!     rows_per_period: 500,
//!     label_rule: LabelRule { features: vec![0, 1], weights: None, threshold: 0.5, flip_probability: 0.0 },
//!     drifts: vec![DriftInjection { period: 2, features: vec![0], magnitude: 3.0 }],
//!     churn: None,
//! };
//! let stream = generate_synthetic_stream(&config, 7)?;
//! let (train, test) = (&stream.batches[1], &stream.batches[2]);
//! let model = train_forest(train.features(), train.require_labels()?, &ForestHyperparams::default(), 1)?;
//! let verdict = detect_mcudi(&model, train, test, DEFAULT_ALPHA)?;
//! assert!(verdict.alarm);
//! # Ok::<(), mcudi_core::Error>(())
//! ```

pub mod classifier;
pub mod data;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod ground_truth;
pub mod stats;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::classifier::{
        cross_val_error, error_rate, important_features, roc_auc, train_forest, ForestHyperparams,
        ForestModel, ImportantFeatureSet, MaxFeatures,
    };
    pub use crate::data::{
        apply_scaler, fit_scaler, generate_synthetic_stream, load_csv, Batch, DatasetSchema,
        DriftInjection, LabelRule, Matrix, PeriodGranularity, SynthConfig,
    };
    pub use crate::detectors::{
        count_changed_features, detect_ks_all, detect_mcudi, detect_periodic, detect_static,
        DetectorKind, DriftVerdict,
    };
    pub use crate::evaluation::{
        run_label_cost_pipeline, run_strategy, score_detector, DetectionAccuracy, EvaluationConfig,
    };
    pub use crate::ground_truth::{label_all_batches, GroundTruthConfig, GroundTruthLabel};
    pub use crate::stats::{ks_two_sample, z_test_two_proportion, DEFAULT_ALPHA};
    pub use crate::{Error, Result};
}

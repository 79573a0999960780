//! Degradation indicators behind a common interface.
//!
//! * `Static` never alarms (the model is never refreshed).
//! * `Periodic` always alarms (retrain every period).
//! * `Ks` runs a per-feature two-sample KS test on every feature.
//! * `Mcudi` runs the same test only on the features the deployed model ranks
//!   above its mean MDI importance.
//!
//! KS-family detectors alarm when any examined feature has `p < alpha`; no
//! multiplicity correction is applied.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{important_features, ForestModel};
use crate::data::Batch;
use crate::error::{Error, Result};
use crate::stats::{ks_two_sample, KsResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Static,
    Periodic,
    Ks,
    Mcudi,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Static,
        DetectorKind::Periodic,
        DetectorKind::Ks,
        DetectorKind::Mcudi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Static => "static",
            DetectorKind::Periodic => "periodic",
            DetectorKind::Ks => "ks",
            DetectorKind::Mcudi => "mcudi",
        }
    }

    /// Whether the verdict depends on the deployed model (and therefore on its seed).
    pub fn needs_model(self) -> bool {
        self == DetectorKind::Mcudi
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(DetectorKind::Static),
            "periodic" => Ok(DetectorKind::Periodic),
            "ks" | "ks-all" | "ks_all" => Ok(DetectorKind::Ks),
            "mcudi" => Ok(DetectorKind::Mcudi),
            other => Err(Error::Config(format!(
                "unknown detector `{other}` (expected static, periodic, ks or mcudi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVerdict {
    pub detector: DetectorKind,
    pub alarm: bool,
    /// KS result for every examined feature.
    pub per_feature: BTreeMap<usize, KsResult>,
    pub examined_features: Vec<usize>,
    /// McUDI found no feature above mean importance and fell back to all features.
    pub degenerate: bool,
    /// Significance level; `None` for the constant detectors.
    pub alpha: Option<f64>,
}

impl DriftVerdict {
    fn constant(detector: DetectorKind, alarm: bool) -> Self {
        Self {
            detector,
            alarm,
            per_feature: BTreeMap::new(),
            examined_features: Vec::new(),
            degenerate: false,
            alpha: None,
        }
    }

    pub fn min_p_value(&self) -> Option<f64> {
        self.per_feature
            .values()
            .map(|r| r.p_value)
            .reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChangeReport {
    pub changed_count: usize,
    pub changed_fraction: f64,
    pub changed_indices: Vec<usize>,
}

pub fn detect_static(_train: &Batch, _test: &Batch) -> DriftVerdict {
    DriftVerdict::constant(DetectorKind::Static, false)
}

pub fn detect_periodic(_train: &Batch, _test: &Batch) -> DriftVerdict {
    DriftVerdict::constant(DetectorKind::Periodic, true)
}

pub fn detect_ks_all(train: &Batch, test: &Batch, alpha: f64) -> Result<DriftVerdict> {
    check_dims(train, test)?;
    let all: Vec<usize> = (0..train.n_features()).collect();
    ks_verdict(DetectorKind::Ks, train, test, all, false, alpha)
}

pub fn detect_mcudi(
    model: &ForestModel,
    train: &Batch,
    test: &Batch,
    alpha: f64,
) -> Result<DriftVerdict> {
    check_dims(train, test)?;
    if model.n_features() != train.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: train.n_features(),
        });
    }
    let important = important_features(model);
    let (examined, degenerate) = if important.is_empty() {
        ((0..train.n_features()).collect(), true)
    } else {
        (important.indices, false)
    };
    ks_verdict(
        DetectorKind::Mcudi,
        train,
        test,
        examined,
        degenerate,
        alpha,
    )
}

pub fn count_changed_features(
    train: &Batch,
    test: &Batch,
    alpha: f64,
) -> Result<FeatureChangeReport> {
    let verdict = detect_ks_all(train, test, alpha)?;
    let changed_indices: Vec<usize> = verdict
        .per_feature
        .iter()
        .filter(|(_, r)| r.p_value < alpha)
        .map(|(&j, _)| j)
        .collect();
    Ok(FeatureChangeReport {
        changed_count: changed_indices.len(),
        changed_fraction: changed_indices.len() as f64 / train.n_features() as f64,
        changed_indices,
    })
}

fn check_dims(train: &Batch, test: &Batch) -> Result<()> {
    if train.n_features() != test.n_features() {
        return Err(Error::DimensionMismatch {
            expected: train.n_features(),
            found: test.n_features(),
        });
    }
    Ok(())
}

fn ks_verdict(
    detector: DetectorKind,
    train: &Batch,
    test: &Batch,
    examined: Vec<usize>,
    degenerate: bool,
    alpha: f64,
) -> Result<DriftVerdict> {
    let results: Vec<(usize, KsResult)> = examined
        .par_iter()
        .map(|&j| ks_two_sample(&train.column(j), &test.column(j)).map(|r| (j, r)))
        .collect::<Result<_>>()?;
    let alarm = results.iter().any(|(_, r)| r.p_value < alpha);
    Ok(DriftVerdict {
        detector,
        alarm,
        per_feature: results.into_iter().collect(),
        examined_features: examined,
        degenerate,
        alpha: Some(alpha),
    })
}

/// A detector ready to compare a reference batch with an incoming one.
pub trait DriftDetector {
    fn kind(&self) -> DetectorKind;
    fn detect(&self, train: &Batch, test: &Batch) -> Result<DriftVerdict>;
}

pub struct StaticDetector;

pub struct PeriodicDetector;

pub struct KsAllDetector {
    pub alpha: f64,
}

pub struct McudiDetector<'a> {
    pub model: &'a ForestModel,
    pub alpha: f64,
}

impl DriftDetector for StaticDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Static
    }
    fn detect(&self, train: &Batch, test: &Batch) -> Result<DriftVerdict> {
        Ok(detect_static(train, test))
    }
}

impl DriftDetector for PeriodicDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Periodic
    }
    fn detect(&self, train: &Batch, test: &Batch) -> Result<DriftVerdict> {
        Ok(detect_periodic(train, test))
    }
}

impl DriftDetector for KsAllDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Ks
    }
    fn detect(&self, train: &Batch, test: &Batch) -> Result<DriftVerdict> {
        detect_ks_all(train, test, self.alpha)
    }
}

impl DriftDetector for McudiDetector<'_> {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Mcudi
    }
    fn detect(&self, train: &Batch, test: &Batch) -> Result<DriftVerdict> {
        detect_mcudi(self.model, train, test, self.alpha)
    }
}

/// Runs `kind` on one pair; `model` is required for McUDI only.
pub fn run_detector(
    kind: DetectorKind,
    model: Option<&ForestModel>,
    train: &Batch,
    test: &Batch,
    alpha: f64,
) -> Result<DriftVerdict> {
    match kind {
        DetectorKind::Static => Ok(detect_static(train, test)),
        DetectorKind::Periodic => Ok(detect_periodic(train, test)),
        DetectorKind::Ks => detect_ks_all(train, test, alpha),
        DetectorKind::Mcudi => {
            let model = model
                .ok_or_else(|| Error::Config("the mcudi detector needs a trained model".into()))?;
            detect_mcudi(model, train, test, alpha)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{train_forest, ForestHyperparams};
    use crate::data::Matrix;
    use crate::stats::DEFAULT_ALPHA;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_batch(n: usize, d: usize, shifts: &[(usize, f64)], seed: u64) -> Batch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            for &(j, s) in shifts {
                row[j] += s;
            }
            rows.push(row);
        }
        let labels = rows.iter().map(|r| r[0] > 0.0).collect();
        Batch::new(0, Matrix::from_rows(&rows).unwrap(), Some(labels)).unwrap()
    }

    #[test]
    fn constant_detectors() {
        let a = gaussian_batch(20, 2, &[], 1);
        let b = gaussian_batch(20, 3, &[(0, 9.0)], 2);
        assert!(!detect_static(&a, &a).alarm);
        assert!(!detect_static(&a, &b).alarm);
        assert!(detect_static(&a, &b).examined_features.is_empty());
        assert!(detect_periodic(&a, &a).alarm);
        assert!(detect_periodic(&a, &b).alarm);
    }

    #[test]
    fn ks_all_on_copy_is_quiet() {
        let a = gaussian_batch(200, 4, &[], 1);
        let v = detect_ks_all(&a, &a, DEFAULT_ALPHA).unwrap();
        assert!(!v.alarm);
        assert!(v.per_feature.values().all(|r| r.p_value == 1.0));
        assert_eq!(v.examined_features, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ks_all_catches_shift_on_any_feature() {
        let a = gaussian_batch(500, 4, &[], 1);
        let b = gaussian_batch(500, 4, &[(3, 5.0)], 2);
        let v = detect_ks_all(&a, &b, DEFAULT_ALPHA).unwrap();
        assert!(v.alarm);
        assert!(v.per_feature[&3].p_value < 1e-10);
    }

    #[test]
    fn dimension_mismatch() {
        let a = gaussian_batch(10, 2, &[], 1);
        let b = gaussian_batch(10, 3, &[], 2);
        assert!(detect_ks_all(&a, &b, DEFAULT_ALPHA).is_err());
        assert!(count_changed_features(&a, &b, DEFAULT_ALPHA).is_err());
    }

    #[test]
    fn changed_features_count() {
        let a = gaussian_batch(500, 10, &[], 1);
        assert_eq!(
            count_changed_features(&a, &a, DEFAULT_ALPHA)
                .unwrap()
                .changed_count,
            0
        );
        let b = gaussian_batch(500, 10, &[(1, 5.0), (4, 5.0), (7, 5.0)], 2);
        let r = count_changed_features(&a, &b, DEFAULT_ALPHA).unwrap();
        // per-column oracle
        let expected: Vec<usize> = (0..10)
            .filter(|&j| ks_two_sample(&a.column(j), &b.column(j)).unwrap().p_value < DEFAULT_ALPHA)
            .collect();
        assert_eq!(r.changed_indices, expected);
        assert_eq!(r.changed_indices, vec![1, 4, 7]);
        assert!((r.changed_fraction - 0.3).abs() < 1e-15);
        let all: Vec<(usize, f64)> = (0..10).map(|j| (j, 5.0)).collect();
        let c = gaussian_batch(500, 10, &all, 3);
        assert_eq!(
            count_changed_features(&a, &c, DEFAULT_ALPHA)
                .unwrap()
                .changed_fraction,
            1.0
        );
    }

    #[test]
    fn mcudi_ignores_unimportant_shift() {
        let train = gaussian_batch(500, 4, &[], 1);
        let hp = ForestHyperparams {
            n_trees: 30,
            ..Default::default()
        };
        let model = train_forest(train.features(), train.labels().unwrap(), &hp, 3).unwrap();
        let important = important_features(&model);
        assert_eq!(important.indices, vec![0]);

        let churn = gaussian_batch(500, 4, &[(2, 5.0)], 2);
        assert!(
            !detect_mcudi(&model, &train, &churn, DEFAULT_ALPHA)
                .unwrap()
                .alarm
        );
        assert!(detect_ks_all(&train, &churn, DEFAULT_ALPHA).unwrap().alarm);

        let drift = gaussian_batch(500, 4, &[(0, 3.0)], 2);
        let v = detect_mcudi(&model, &train, &drift, DEFAULT_ALPHA).unwrap();
        assert!(v.alarm);
        assert_eq!(v.examined_features, vec![0]);
        assert!(!v.degenerate);
    }

    #[test]
    fn mcudi_falls_back_when_importances_are_uniform() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0, 1.0]; 8]).unwrap();
        let y = [true, false, true, false, true, false, true, false];
        let model = train_forest(
            &x,
            &y,
            &ForestHyperparams {
                n_trees: 2,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let a = gaussian_batch(100, 3, &[], 1);
        let b = gaussian_batch(100, 3, &[(1, 1.0)], 2);
        let m = detect_mcudi(&model, &a, &b, DEFAULT_ALPHA).unwrap();
        let k = detect_ks_all(&a, &b, DEFAULT_ALPHA).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.alarm, k.alarm);
        assert_eq!(m.per_feature, k.per_feature);
    }

    #[test]
    fn detector_names_parse() {
        for k in DetectorKind::ALL {
            assert_eq!(k.name().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("adwin".parse::<DetectorKind>().is_err());
    }
}

//! Scoring detectors against ground truth, simulating retraining strategies
//! over a period sequence, and counting the labels each strategy consumes.
//!
//! Detection-accuracy counts use the convention where the drift class lives in
//! specificity: `tn` = drift periods that raised an alarm, `fp` = drift periods
//! that did not, `tp` = non-drift periods without an alarm, `fn` = non-drift
//! periods with an alarm. An always-alarming detector therefore scores
//! specificity 1 and sensitivity 0.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{roc_auc, train_forest, ForestHyperparams, ForestModel};
use crate::data::{apply_scaler, fit_scaler, Batch, Scaler};
use crate::detectors::{count_changed_features, run_detector, DetectorKind, FeatureChangeReport};
use crate::error::{Error, Result};
use crate::ground_truth::{GroundTruthLabel, DEFAULT_SEEDS};
use crate::stats::DEFAULT_ALPHA;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub hyperparams: ForestHyperparams,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    /// Number of most recent periods a retrained model sees.
    pub window: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            hyperparams: ForestHyperparams::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            alpha: DEFAULT_ALPHA,
            window: 1,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionAccuracy {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `tn / (tn + fp)`: share of drift periods caught. `None` without drift periods.
    pub specificity: Option<f64>,
    /// `tp / (tp + fn)`: share of non-drift periods left alone. `None` without non-drift periods.
    pub sensitivity: Option<f64>,
    pub balanced_accuracy: Option<f64>,
}

impl DetectionAccuracy {
    pub fn from_counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        let specificity = ratio(tn, fp);
        let sensitivity = ratio(tp, fn_);
        let balanced_accuracy = match (specificity, sensitivity) {
            (Some(s), Some(t)) => Some((s + t) / 2.0),
            _ => None,
        };
        Self {
            tp,
            tn,
            fp,
            fn_,
            specificity,
            sensitivity,
            balanced_accuracy,
        }
    }

    pub fn scored_periods(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodAlarm {
    pub period_id: usize,
    pub alarm: bool,
}

/// Confusion counts of `verdicts` against the non-excluded ground-truth periods.
pub fn score_detector(
    verdicts: &[PeriodAlarm],
    truth: &[GroundTruthLabel],
) -> Result<DetectionAccuracy> {
    let mut alarms = BTreeMap::new();
    for v in verdicts {
        if alarms.insert(v.period_id, v.alarm).is_some() {
            return Err(Error::Alignment(format!(
                "period {} has more than one verdict",
                v.period_id
            )));
        }
    }
    let known: BTreeMap<usize, &GroundTruthLabel> =
        truth.iter().map(|l| (l.period_id, l)).collect();
    if let Some(p) = alarms.keys().find(|p| !known.contains_key(p)) {
        return Err(Error::Alignment(format!(
            "verdict for period {p} has no ground truth"
        )));
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for label in truth {
        let Some(is_drift) = label.is_drift else {
            continue;
        };
        let alarm = *alarms.get(&label.period_id).ok_or_else(|| {
            Error::Alignment(format!("no verdict for period {}", label.period_id))
        })?;
        match (is_drift, alarm) {
            (true, true) => tn += 1,
            (true, false) => fp += 1,
            (false, false) => tp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(DetectionAccuracy::from_counts(tp, tn, fp, fn_))
}

/// One detector decision on a consecutive period pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    /// Model seed; `None` for detectors that do not use a model.
    pub seed: Option<u64>,
    pub period_id: usize,
    pub alarm: bool,
    pub examined_features: Vec<usize>,
    pub min_p_value: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAccuracy {
    pub seed: Option<u64>,
    pub accuracy: DetectionAccuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorEvaluation {
    pub detector: DetectorKind,
    pub per_seed: Vec<SeedAccuracy>,
    /// Means over seeds of each metric, skipping seeds where it is undefined.
    pub mean_specificity: Option<f64>,
    pub mean_sensitivity: Option<f64>,
    pub mean_balanced_accuracy: Option<f64>,
    pub verdicts: Vec<PairVerdict>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (s, c) = values
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (c > 0).then(|| s / c as f64)
}

/// Runs each detector on every consecutive pair `(P[t-1], P[t])` whose ground
/// truth is not excluded, and scores the alarms. Model-based detectors are run
/// once per seed, with the model trained on `P[t-1]`.
pub fn evaluate_detectors(
    batches: &[Batch],
    truth: &[GroundTruthLabel],
    detectors: &[DetectorKind],
    config: &EvaluationConfig,
) -> Result<Vec<DetectorEvaluation>> {
    config.validate()?;
    let labels: BTreeMap<usize, &GroundTruthLabel> =
        truth.iter().map(|l| (l.period_id, l)).collect();
    let pairs: Vec<(&Batch, &Batch)> = batches
        .windows(2)
        .filter(|w| {
            labels
                .get(&w[1].period_id())
                .is_some_and(|l| !l.is_excluded())
        })
        .map(|w| (&w[0], &w[1]))
        .collect();
    let scaled: Vec<(Batch, Batch)> = pairs
        .iter()
        .map(|(a, b)| {
            let s = fit_scaler(a)?;
            Ok((apply_scaler(&s, a)?, apply_scaler(&s, b)?))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(detectors.len());
    for &kind in detectors {
        let seeds: Vec<Option<u64>> = if kind.needs_model() {
            config.seeds.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        let runs: Vec<(Option<u64>, Vec<PairVerdict>)> = seeds
            .par_iter()
            .map(|&seed| {
                let verdicts = scaled
                    .iter()
                    .map(|(train, test)| {
                        let model = match seed {
                            Some(s) => Some(train_forest(
                                train.features(),
                                train.require_labels()?,
                                &config.hyperparams,
                                s,
                            )?),
                            None => None,
                        };
                        let v = run_detector(kind, model.as_ref(), train, test, config.alpha)?;
                        Ok(PairVerdict {
                            seed,
                            period_id: test.period_id(),
                            alarm: v.alarm,
                            min_p_value: v.min_p_value(),
                            examined_features: v.examined_features,
                            degenerate: v.degenerate,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((seed, verdicts))
            })
            .collect::<Result<_>>()?;

        let mut per_seed = Vec::with_capacity(runs.len());
        let mut all_verdicts = Vec::new();
        for (seed, verdicts) in runs {
            let alarms: Vec<PeriodAlarm> = verdicts
                .iter()
                .map(|v| PeriodAlarm {
                    period_id: v.period_id,
                    alarm: v.alarm,
                })
                .collect();
            per_seed.push(SeedAccuracy {
                seed,
                accuracy: score_detector(&alarms, truth)?,
            });
            all_verdicts.extend(verdicts);
        }
        out.push(DetectorEvaluation {
            detector: kind,
            mean_specificity: mean_defined(per_seed.iter().map(|s| s.accuracy.specificity)),
            mean_sensitivity: mean_defined(per_seed.iter().map(|s| s.accuracy.sensitivity)),
            mean_balanced_accuracy: mean_defined(
                per_seed.iter().map(|s| s.accuracy.balanced_accuracy),
            ),
            per_seed,
            verdicts: all_verdicts,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureChangeRecord {
    pub period_id: usize,
    pub period_key: String,
    #[serde(flatten)]
    pub report: FeatureChangeReport,
}

/// Per-feature KS change counts between every consecutive pair of periods.
pub fn feature_change_series(batches: &[Batch], alpha: f64) -> Result<Vec<FeatureChangeRecord>> {
    batches
        .windows(2)
        .map(|w| {
            Ok(FeatureChangeRecord {
                period_id: w[1].period_id(),
                period_key: w[1].period_key().to_string(),
                report: count_changed_features(&w[0], &w[1], alpha)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodScore {
    pub period_id: usize,
    pub n_samples: usize,
    /// AUC of the model deployed when the period arrived; `None` for single-class periods.
    pub roc_auc: Option<f64>,
    pub alarm: bool,
    /// Samples annotated because of this period's alarm.
    pub newly_annotated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub periods: Vec<PeriodScore>,
    pub retrain_count: usize,
    pub label_cost: usize,
    /// Alarms whose training window held one class, so the old model stayed.
    pub skipped_retrains: usize,
    pub mean_roc_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRunReport {
    pub strategy: DetectorKind,
    pub window: usize,
    /// Period the initial model was trained on (first period with both classes).
    pub initial_period: usize,
    pub total_periods: usize,
    /// Mean of per-period AUCs over all periods and seeds, equal period weight.
    pub mean_roc_auc: Option<f64>,
    pub sample_weighted_roc_auc: Option<f64>,
    /// Mean over seeds.
    pub retrain_count: f64,
    /// Mean over seeds of annotated samples (the initial training period excluded).
    pub label_cost: f64,
    pub per_seed: Vec<SeedRun>,
}

struct Deployed {
    scaler: Scaler,
    model: ForestModel,
    /// Training window, already scaled.
    window: Batch,
}

impl Deployed {
    fn train(parts: &[Batch], hp: &ForestHyperparams, seed: u64) -> Result<Option<Deployed>> {
        let refs: Vec<&Batch> = parts.iter().collect();
        let raw = Batch::concat(&refs)?;
        if !raw.has_both_classes() || raw.len() < 2 {
            return Ok(None);
        }
        let scaler = fit_scaler(&raw)?;
        let window = apply_scaler(&scaler, &raw)?;
        let model = train_forest(window.features(), window.require_labels()?, hp, seed)?;
        Ok(Some(Deployed {
            scaler,
            model,
            window,
        }))
    }
}

fn initial_period(batches: &[Batch]) -> Result<usize> {
    for b in batches {
        b.require_labels()?;
    }
    let start = batches
        .iter()
        .position(Batch::has_both_classes)
        .ok_or_else(|| Error::SingleClass("no period contains both classes".into()))?;
    if start + 1 >= batches.len() {
        return Err(Error::InsufficientData(
            "no testing period after the first trainable period".into(),
        ));
    }
    Ok(start)
}

/// One seed of a retraining strategy: deploy a model on the first trainable
/// period, then for every later period score it, ask the detector (reference =
/// the deployed model's training window) and on alarm retrain on the most
/// recent `window` periods.
fn simulate_seed(
    batches: &[Batch],
    start: usize,
    strategy: DetectorKind,
    window: usize,
    config: &EvaluationConfig,
    seed: u64,
) -> Result<SeedRun> {
    let hp = &config.hyperparams;
    let mut annotated = vec![false; batches.len()];
    annotated[start] = true;
    let mut deployed = Deployed::train(&batches[start..=start], hp, seed)?
        .expect("initial period has both classes");

    let mut periods = Vec::with_capacity(batches.len() - start - 1);
    let (mut retrain_count, mut label_cost, mut skipped) = (0, 0, 0);
    for t in start + 1..batches.len() {
        let incoming = apply_scaler(&deployed.scaler, &batches[t])?;
        let labels = incoming.require_labels()?;
        let auc = if incoming.has_both_classes() {
            Some(roc_auc(
                &deployed.model.predict_proba(incoming.features())?,
                labels,
            )?)
        } else {
            None
        };
        let verdict = run_detector(
            strategy,
            Some(&deployed.model),
            &deployed.window,
            &incoming,
            config.alpha,
        )?;
        let mut newly = 0;
        if verdict.alarm {
            retrain_count += 1;
            let lo = start.max((t + 1).saturating_sub(window));
            for k in lo..=t {
                if !annotated[k] {
                    annotated[k] = true;
                    newly += batches[k].len();
                }
            }
            label_cost += newly;
            match Deployed::train(&batches[lo..=t], hp, seed)? {
                Some(d) => deployed = d,
                None => skipped += 1,
            }
        }
        periods.push(PeriodScore {
            period_id: batches[t].period_id(),
            n_samples: batches[t].len(),
            roc_auc: auc,
            alarm: verdict.alarm,
            newly_annotated: newly,
        });
    }
    Ok(SeedRun {
        seed,
        mean_roc_auc: mean_defined(periods.iter().map(|p| p.roc_auc)),
        periods,
        retrain_count,
        label_cost,
        skipped_retrains: skipped,
    })
}

fn run_with_window(
    batches: &[Batch],
    strategy: DetectorKind,
    window: usize,
    config: &EvaluationConfig,
) -> Result<StrategyRunReport> {
    config.validate()?;
    let start = initial_period(batches)?;
    let per_seed: Vec<SeedRun> = config
        .seeds
        .par_iter()
        .map(|&seed| simulate_seed(batches, start, strategy, window, config, seed))
        .collect::<Result<_>>()?;

    let all = per_seed.iter().flat_map(|r| r.periods.iter());
    let mean_roc_auc = mean_defined(all.clone().map(|p| p.roc_auc));
    let (ws, w) = all
        .filter_map(|p| {
            p.roc_auc
                .map(|a| (a * p.n_samples as f64, p.n_samples as f64))
        })
        .fold((0.0, 0.0), |(s, n), (a, k)| (s + a, n + k));
    let k = per_seed.len() as f64;
    Ok(StrategyRunReport {
        strategy,
        window,
        initial_period: batches[start].period_id(),
        total_periods: batches.len() - start - 1,
        mean_roc_auc,
        sample_weighted_roc_auc: (w > 0.0).then(|| ws / w),
        retrain_count: per_seed.iter().map(|r| r.retrain_count as f64).sum::<f64>() / k,
        label_cost: per_seed.iter().map(|r| r.label_cost as f64).sum::<f64>() / k,
        per_seed,
    })
}

pub fn run_strategy(
    batches: &[Batch],
    strategy: DetectorKind,
    config: &EvaluationConfig,
) -> Result<StrategyRunReport> {
    run_with_window(batches, strategy, config.window, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedLabelCost {
    pub seed: u64,
    pub mcudi_cost: usize,
    pub periodic_cost: usize,
    pub savings: usize,
    /// Summed sizes of the periods McUDI did not flag, from its verdict log.
    pub unflagged_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCostReport {
    /// Retrains on the flagged period only.
    pub mcudi: StrategyRunReport,
    /// Retrains every period on the configured sliding window.
    pub periodic: StrategyRunReport,
    pub per_seed: Vec<SeedLabelCost>,
    /// Mean over seeds of `periodic_cost - mcudi_cost`.
    pub savings: f64,
    /// `periodic.mean_roc_auc - mcudi.mean_roc_auc`.
    pub auc_gap: Option<f64>,
}

/// Periodic retraining annotates every testing period; the McUDI pipeline
/// annotates (and retrains on) only the periods it flags.
pub fn run_label_cost_pipeline(
    batches: &[Batch],
    config: &EvaluationConfig,
) -> Result<LabelCostReport> {
    let periodic = run_with_window(batches, DetectorKind::Periodic, config.window, config)?;
    let mcudi = run_with_window(batches, DetectorKind::Mcudi, 1, config)?;
    let per_seed: Vec<SeedLabelCost> = mcudi
        .per_seed
        .iter()
        .zip(&periodic.per_seed)
        .map(|(m, p)| SeedLabelCost {
            seed: m.seed,
            mcudi_cost: m.label_cost,
            periodic_cost: p.label_cost,
            savings: p.label_cost - m.label_cost,
            unflagged_samples: m
                .periods
                .iter()
                .filter(|s| !s.alarm)
                .map(|s| s.n_samples)
                .sum(),
        })
        .collect();
    let savings = per_seed.iter().map(|s| s.savings as f64).sum::<f64>() / per_seed.len() as f64;
    let auc_gap = match (periodic.mean_roc_auc, mcudi.mean_roc_auc) {
        (Some(p), Some(m)) => Some(p - m),
        _ => None,
    };
    Ok(LabelCostReport {
        mcudi,
        periodic,
        per_seed,
        savings,
        auc_gap,
    })
}

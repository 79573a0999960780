use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{train_forest, ForestHyperparams};
use crate::data::Matrix;
use crate::error::{Error, Result};

/// Fraction of positions where prediction and label disagree.
pub fn error_rate(predictions: &[bool], labels: &[bool]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("error rate of an empty set".into()));
    }
    let wrong = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p != y)
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Rank-based ROC AUC (Mann–Whitney U), tied scores sharing their average rank.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(
            "ROC AUC is undefined for one class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share the 1-based average rank
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        pos_rank_sum += avg_rank * positives as f64;
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    /// Pooled error over every held-out prediction of the evaluated folds.
    pub error: f64,
    pub folds: usize,
    /// Folds whose training split held one class only.
    pub skipped_folds: usize,
    pub evaluated_rows: usize,
}

/// Split boundaries of `n` rows into `folds` contiguous parts; the first
/// `n % folds` parts get one extra row.
pub fn fold_bounds(n: usize, folds: usize) -> Vec<(usize, usize)> {
    let base = n / folds;
    let extra = n % folds;
    let mut start = 0;
    (0..folds)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

/// K-fold cross-validated error of a forest: one seeded shuffle, contiguous
/// folds, errors pooled over all held-out rows.
pub fn cross_val_error(
    features: &Matrix,
    labels: &[bool],
    folds: usize,
    hp: &ForestHyperparams,
    seed: u64,
) -> Result<CrossValidation> {
    let n = features.n_rows();
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if folds < 2 {
        return Err(Error::Config(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if n < folds {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot fill {folds} folds"
        )));
    }
    if !(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y)) {
        return Err(Error::SingleClass(
            "cross-validation labels are single-class".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut wrong = 0usize;
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    for (lo, hi) in fold_bounds(n, folds) {
        let held = &order[lo..hi];
        let train_idx: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let train_y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
        if !(train_y.iter().any(|&y| y) && train_y.iter().any(|&y| !y)) {
            skipped += 1;
            continue;
        }
        let model = train_forest(&features.select_rows(&train_idx), &train_y, hp, seed)?;
        let pred = model.predict(&features.select_rows(held))?;
        wrong += pred
            .iter()
            .zip(held)
            .filter(|(p, &i)| **p != labels[i])
            .count();
        evaluated += held.len();
    }
    if evaluated == 0 {
        return Err(Error::SingleClass(format!(
            "all {folds} folds had single-class training splits"
        )));
    }
    Ok(CrossValidation {
        error: wrong as f64 / evaluated as f64,
        folds,
        skipped_folds: skipped,
        evaluated_rows: evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] && !labels[j] {
                    den += 1.0;
                    if si > sj {
                        num += 1.0;
                    } else if si == sj {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn error_rate_examples() {
        let y = [
            true, false, true, true, false, false, true, false, true, false,
        ];
        assert_eq!(error_rate(&y, &y).unwrap(), 0.0);
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        assert_eq!(error_rate(&flipped, &y).unwrap(), 1.0);
        let mut three = y;
        for k in [0, 4, 9] {
            three[k] = !three[k];
        }
        assert!((error_rate(&three, &y).unwrap() - 0.3).abs() < 1e-15);
        assert!(error_rate(&y[..3], &y).is_err());
    }

    #[test]
    fn auc_examples() {
        let labels = [false, false, true, true];
        assert_eq!(roc_auc(&[0.0, 0.0, 1.0, 1.0], &labels).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 4], &labels).unwrap(), 0.5);
        let s = [0.1, 0.4, 0.35, 0.8];
        assert_eq!(pairwise_auc(&s, &labels), 0.75);
        assert!((roc_auc(&s, &labels).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn fold_bounds_cover_rows() {
        let b = fold_bounds(23, 10);
        assert_eq!(b.len(), 10);
        assert_eq!(b[0], (0, 3));
        assert_eq!(b[2], (6, 9));
        assert_eq!(b[3], (9, 11));
        assert_eq!(b[9].1, 23);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..80)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
            let auc = roc_auc(&scores, &labels).unwrap();
            prop_assert!((auc - pairwise_auc(&scores, &labels)).abs() < 1e-9);
            let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0).collect();
            prop_assert!((roc_auc(&cubed, &labels).unwrap() - auc).abs() < 1e-12);
        }
    }
}

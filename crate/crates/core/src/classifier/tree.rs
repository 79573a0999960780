//! CART classification tree with Gini splits, grown on a (bootstrap) sample.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease `N_t * gini(t) - N_l * gini(l) - N_r * gini(r)`,
        /// in sample counts.
        impurity_decrease: f64,
        n_samples: usize,
    },
    Leaf {
        /// Fraction of class-1 samples that reached this leaf during training.
        probability: f64,
        n_samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    /// Row indices (with repetition) the tree was grown on.
    #[serde(skip)]
    sample: Vec<usize>,
}

pub(crate) struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: usize,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Training rows, including bootstrap duplicates.
    pub fn sample(&self) -> &[usize] {
        &self.sample
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    /// Class-1 frequency of the leaf reached by `row`.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probability, .. } => return *probability,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Unnormalized per-feature sum of weighted impurity decreases, divided by the
    /// root sample count.
    pub fn impurity_decrease_by_feature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let root = match self.nodes.first() {
            Some(Node::Split { n_samples, .. }) | Some(Node::Leaf { n_samples, .. }) => {
                *n_samples as f64
            }
            None => return out,
        };
        for node in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                ..
            } = node
            {
                out[*feature] += impurity_decrease / root;
            }
        }
        out
    }

    pub(crate) fn grow<R: Rng>(
        x: &Matrix,
        y: &[bool],
        sample: Vec<usize>,
        params: &TreeParams,
        rng: &mut R,
    ) -> DecisionTree {
        let mut builder = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
            features: (0..x.n_cols()).collect(),
            scratch: Vec::with_capacity(sample.len()),
            best_values: Vec::with_capacity(sample.len()),
        };
        let mut work = sample.clone();
        builder.build(&mut work, 0, rng);
        DecisionTree {
            nodes: builder.nodes,
            n_features: x.n_cols(),
            sample,
        }
    }
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [bool],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    features: Vec<usize>,
    scratch: Vec<(f64, bool)>,
    /// Sorted node values of the current best feature, for tie-breaking.
    best_values: Vec<f64>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    /// `(l1^2 + l0^2)/n_l + (r1^2 + r0^2)/n_r`; larger is purer.
    score: f64,
}

impl Builder<'_> {
    fn build<R: Rng>(&mut self, rows: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i]).count();
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            probability: pos as f64 / n as f64,
            n_samples: n,
        };
        let stop = pos == 0
            || pos == n
            || n < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|m| depth >= m);
        if stop {
            self.nodes.push(leaf);
            return id;
        }
        let Some(best) = self.find_split(rows, rng) else {
            self.nodes.push(leaf);
            return id;
        };

        let (nf, neg) = (n as f64, (n - pos) as f64);
        let parent = (pos as f64 * pos as f64 + neg * neg) / nf;
        let impurity_decrease = (best.score - parent).max(0.0);

        // partition in place: rows going left first
        let mut split_at = 0;
        for k in 0..n {
            if self.x.get(rows[k], best.feature) <= best.threshold {
                rows.swap(k, split_at);
                split_at += 1;
            }
        }
        debug_assert!(split_at > 0 && split_at < n);

        self.nodes.push(Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
            impurity_decrease,
            n_samples: n,
        });
        let (l_rows, r_rows) = rows.split_at_mut(split_at);
        let left = self.build(l_rows, depth + 1, rng);
        let right = self.build(r_rows, depth + 1, rng);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// Draws features in random order and evaluates them until
    /// `features_per_split` non-constant ones have been scanned (or all are
    /// exhausted). Ties on score go to the lowest threshold, then to the
    /// feature whose sorted node values are lexicographically smallest, and
    /// only then to the lowest index. Everything before the index depends on
    /// column content alone, so reordering columns reorders the tree's
    /// features and nothing else.
    fn find_split<R: Rng>(&mut self, rows: &[usize], rng: &mut R) -> Option<BestSplit> {
        let d = self.features.len();
        self.features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        let mut scanned = 0;
        for k in 0..d {
            if scanned >= self.params.features_per_split {
                break;
            }
            let feature = self.features[k];
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let first = self.scratch[0].0;
            let last = self.scratch[self.scratch.len() - 1].0;
            if first == last {
                continue;
            }
            scanned += 1;
            if let Some(candidate) = scan_sorted(&self.scratch, feature) {
                let better = match &best {
                    None => true,
                    Some(b) => candidate
                        .score
                        .total_cmp(&b.score)
                        .then_with(|| b.threshold.total_cmp(&candidate.threshold))
                        .then_with(|| compare_values(&self.best_values, &self.scratch))
                        .then_with(|| b.feature.cmp(&candidate.feature))
                        .is_gt(),
                };
                if better {
                    best = Some(candidate);
                    self.best_values.clear();
                    self.best_values.extend(self.scratch.iter().map(|p| p.0));
                }
            }
        }
        best
    }
}

/// Lexicographic order of `best` against the values in `sorted`.
fn compare_values(best: &[f64], sorted: &[(f64, bool)]) -> std::cmp::Ordering {
    best.iter()
        .zip(sorted)
        .map(|(a, b)| a.total_cmp(&b.0))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Best threshold on one feature, given `(value, label)` pairs sorted by value.
fn scan_sorted(sorted: &[(f64, bool)], feature: usize) -> Option<BestSplit> {
    let n = sorted.len();
    let total_pos = sorted.iter().filter(|p| p.1).count() as f64;
    let mut left_pos = 0.0;
    let mut best: Option<BestSplit> = None;
    for k in 0..n - 1 {
        if sorted[k].1 {
            left_pos += 1.0;
        }
        let (lo, hi) = (sorted[k].0, sorted[k + 1].0);
        if lo == hi {
            continue;
        }
        let nl = (k + 1) as f64;
        let nr = (n - k - 1) as f64;
        let ln = nl - left_pos;
        let rp = total_pos - left_pos;
        let rn = nr - rp;
        let score = (left_pos * left_pos + ln * ln) / nl + (rp * rp + rn * rn) / nr;
        // strict: the earliest (lowest) threshold wins ties
        if best.as_ref().is_none_or(|b| score > b.score) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(BestSplit {
                feature,
                threshold,
                score,
            });
        }
    }
    best
}

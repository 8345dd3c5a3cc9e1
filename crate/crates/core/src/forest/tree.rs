//! CART decision trees stored as flat node arrays.
//!
//! A split sends `x[feature] <= threshold` left. Thresholds are midpoints
//! between consecutive distinct values. Candidate splits are scanned feature by
//! feature in sampled order, thresholds ascending, and a candidate replaces the
//! incumbent only if it lowers the weighted child impurity strictly, so the
//! first best split wins. A node splits only when that impurity is strictly
//! below the node's own.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; clamped to `[1, p]`.
    pub max_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// `None` for a leaf.
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Class probabilities (classification) or `[mean]` (regression).
    pub value: Vec<f64>,
    pub n_samples: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    /// Row indices (with repetition) the tree was grown on.
    pub sample_rows: Vec<usize>,
}

/// Training targets: class indices with the class count, or reals.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes { y: &'a [usize], n_classes: usize },
    Reals(&'a [f64]),
}

pub fn gini(counts: &[f64], n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>()
}

/// Population variance from running sums.
pub fn variance(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    (sum_sq / n - (sum / n).powi(2)).max(0.0)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    targets: Targets<'a>,
    params: TreeParams,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<'a> Builder<'a> {
    fn leaf_value(&self, rows: &[usize]) -> Vec<f64> {
        let n = rows.len() as f64;
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &r in rows {
                    counts[y[r]] += 1.0;
                }
                counts.iter().map(|c| c / n).collect()
            }
            Targets::Reals(y) => vec![rows.iter().map(|&r| y[r]).sum::<f64>() / n],
        }
    }

    fn impurity(&self, rows: &[usize]) -> f64 {
        let n = rows.len() as f64;
        match self.targets {
            Targets::Classes { y, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &r in rows {
                    counts[y[r]] += 1.0;
                }
                gini(&counts, n)
            }
            Targets::Reals(y) => {
                let (s, s2) = rows.iter().fold((0.0, 0.0), |(s, s2), &r| (s + y[r], s2 + y[r] * y[r]));
                variance(s, s2, n)
            }
        }
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let n = rows.len();
        let leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<Split> = None;
        let mut order: Vec<usize> = rows.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            match self.targets {
                Targets::Classes { y, n_classes } => {
                    let mut left = vec![0.0; n_classes];
                    let mut right = vec![0.0; n_classes];
                    for &r in &order {
                        right[y[r]] += 1.0;
                    }
                    for i in 0..n - 1 {
                        let r = order[i];
                        left[y[r]] += 1.0;
                        right[y[r]] -= 1.0;
                        let (nl, nr) = (i + 1, n - i - 1);
                        let (a, b) = (self.x[r][f], self.x[order[i + 1]][f]);
                        if a == b || nl < leaf || nr < leaf {
                            continue;
                        }
                        let imp = (nl as f64 * gini(&left, nl as f64) + nr as f64 * gini(&right, nr as f64)) / n as f64;
                        if best.as_ref().is_none_or(|s| imp < s.impurity) {
                            best = Some(Split { feature: f, threshold: midpoint(a, b), impurity: imp });
                        }
                    }
                }
                Targets::Reals(y) => {
                    let (ts, ts2) = order.iter().fold((0.0, 0.0), |(s, s2), &r| (s + y[r], s2 + y[r] * y[r]));
                    let (mut ls, mut ls2) = (0.0, 0.0);
                    for i in 0..n - 1 {
                        let r = order[i];
                        ls += y[r];
                        ls2 += y[r] * y[r];
                        let (nl, nr) = (i + 1, n - i - 1);
                        let (a, b) = (self.x[r][f], self.x[order[i + 1]][f]);
                        if a == b || nl < leaf || nr < leaf {
                            continue;
                        }
                        let imp = (nl as f64 * variance(ls, ls2, nl as f64)
                            + nr as f64 * variance(ts - ls, ts2 - ls2, nr as f64))
                            / n as f64;
                        if best.as_ref().is_none_or(|s| imp < s.impurity) {
                            best = Some(Split { feature: f, threshold: midpoint(a, b), impurity: imp });
                        }
                    }
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: self.leaf_value(&rows),
            n_samples: rows.len(),
            depth,
        });
        let own = self.impurity(&rows);
        if depth >= self.params.max_depth
            || rows.len() < self.params.min_samples_split.max(2)
            || own <= 0.0
        {
            return id;
        }
        let p = self.x[0].len();
        let k = self.params.max_features.clamp(1, p);
        let features: Vec<usize> = if k == p {
            (0..p).collect()
        } else {
            sample(rng, p, k).into_vec()
        };
        let Some(split) = self.best_split(&rows, &features) else {
            return id;
        };
        // Relative tolerance guards against rounding creating a phantom gain.
        if split.impurity >= own - 1e-12 * own.max(1.0) {
            return id;
        }
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        let node = &mut self.nodes[id];
        node.feature = Some(split.feature);
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        id
    }
}

/// Midpoint that stays strictly below `b` when `a < b` are adjacent floats.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

impl DecisionTree {
    /// Grows a tree on `rows` of `x` (rows may repeat). `x` must be non-empty.
    pub fn fit(
        x: &[Vec<f64>],
        targets: Targets<'_>,
        rows: Vec<usize>,
        params: TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> DecisionTree {
        let mut b = Builder { x, targets, params, nodes: Vec::new() };
        b.grow(rows.clone(), 0, rng);
        DecisionTree { nodes: b.nodes, sample_rows: rows }
    }

    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut node = &self.nodes[0];
        while let Some(f) = node.feature {
            node = &self.nodes[if row[f] <= node.threshold { node.left } else { node.right }];
        }
        node
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.feature.is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params(depth: usize) -> TreeParams {
        TreeParams { max_depth: depth, min_samples_split: 2, min_samples_leaf: 1, max_features: 1 }
    }

    #[test]
    fn pure_node_impurities_are_zero() {
        assert_eq!(gini(&[5.0, 0.0], 5.0), 0.0);
        assert_eq!(variance(15.0, 45.0, 5.0), 0.0);
    }

    #[test]
    fn stump_separates_two_groups() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..10).map(|i| usize::from(i >= 4)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::fit(&x, Targets::Classes { y: &y, n_classes: 2 }, (0..10).collect(), params(1), &mut rng);
        assert_eq!(t.nodes[0].threshold, 3.5);
        assert_eq!(t.leaf_for(&[2.0]).value, vec![1.0, 0.0]);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn regression_leaf_is_mean() {
        let x: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let y = [1.0, 1.0, 5.0, 7.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::fit(&x, Targets::Reals(&y), (0..4).collect(), params(1), &mut rng);
        assert_eq!(t.leaf_for(&[0.0]).value, vec![1.0]);
        assert_eq!(t.leaf_for(&[3.0]).value, vec![6.0]);
    }

    #[test]
    fn leaf_bound_respected() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| (i * i) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = TreeParams { max_depth: 10, min_samples_split: 2, min_samples_leaf: 4, max_features: 1 };
        let t = DecisionTree::fit(&x, Targets::Reals(&y), (0..20).collect(), p, &mut rng);
        assert!(t.leaves().all(|n| n.n_samples >= 4));
    }
}

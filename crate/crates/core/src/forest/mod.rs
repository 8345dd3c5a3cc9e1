//! Random-forest baseline: preprocessing from a survey corpus, bagged CART
//! ensembles, grid search and held-out evaluation.

mod preprocess;
mod tree;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{pearson, tvd_binned, tvd_discrete, weighted_f1, DistributionSummary, DEFAULT_K_BINS};
use crate::seed::derive_seed;

pub use preprocess::{preprocess, DesignMatrix, PreprocessOptions, SplitIndices, Target, MISSING_COLUMN_LIMIT};
pub use tree::{gini, variance, DecisionTree, Node, Targets, Task, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl ForestParams {
    /// `floor(sqrt(p))` for classification, `floor(p / 3)` for regression, at least 1.
    pub fn max_features(task: Task, p: usize) -> usize {
        let k = match task {
            Task::Classification => (p as f64).sqrt().floor() as usize,
            Task::Regression => p / 3,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_estimators: vec![5, 10, 20, 50],
            max_depth: vec![3, 5, 7],
            min_samples_split: vec![10, 20, 50],
            min_samples_leaf: vec![5, 10, 20],
        }
    }
}

impl ForestGrid {
    pub fn points(&self) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &min_samples_split in &self.min_samples_split {
                    for &min_samples_leaf in &self.min_samples_leaf {
                        out.push(ForestParams { n_estimators, max_depth, min_samples_split, min_samples_leaf });
                    }
                }
            }
        }
        out
    }
}

/// Self-describing trained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub task: Task,
    pub params: ForestParams,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Class labels by index; empty for regression.
    pub classes: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Tree `t` draws its bootstrap rows and feature subsets from `derive_seed(seed, [t])`.
    pub fn fit(
        x: &[Vec<f64>],
        targets: Targets<'_>,
        rows: &[usize],
        params: ForestParams,
        seed: u64,
    ) -> Result<Vec<DecisionTree>> {
        if rows.is_empty() || params.n_estimators == 0 {
            return Err(Error::Training("empty training set or zero trees".into()));
        }
        let p = x.first().map_or(0, Vec::len);
        if p == 0 {
            return Err(Error::Training("design matrix has no feature columns".into()));
        }
        let task = match targets {
            Targets::Classes { .. } => Task::Classification,
            Targets::Reals(_) => Task::Regression,
        };
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: params.min_samples_leaf,
            max_features: ForestParams::max_features(task, p),
        };
        Ok((0..params.n_estimators)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t as u64]));
                let sample: Vec<usize> = (0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())]).collect();
                DecisionTree::fit(x, targets, sample, tree_params, &mut rng)
            })
            .collect())
    }

    /// Mean of the trees' leaf probabilities; ties go to the lower class index.
    pub fn predict_class(&self, row: &[f64]) -> usize {
        let mut probs = vec![0.0; self.classes.len()];
        for t in &self.trees {
            for (p, v) in probs.iter_mut().zip(&t.leaf_for(row).value) {
                *p += v;
            }
        }
        let mut best = 0;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict_real(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.leaf_for(row).value[0]).sum::<f64>() / self.trees.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest model serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: ForestParams,
    /// `None` when the metric is undefined (e.g. constant predictions).
    pub validation_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: ForestModel,
    pub table: Vec<GridScore>,
}

fn model_for(matrix: &DesignMatrix, params: ForestParams, seed: u64, trees: Vec<DecisionTree>) -> ForestModel {
    ForestModel {
        task: matrix.task(),
        params,
        seed,
        feature_names: matrix.column_names.clone(),
        classes: match &matrix.target {
            Target::Labels { classes, .. } => classes.clone(),
            Target::Reals(_) => Vec::new(),
        },
        trees,
    }
}

fn targets(matrix: &DesignMatrix) -> Targets<'_> {
    match &matrix.target {
        Target::Labels { classes, y } => Targets::Classes { y, n_classes: classes.len() },
        Target::Reals(y) => Targets::Reals(y),
    }
}

/// Weighted F1 (classification) or Pearson r (regression) on `rows`.
pub fn score_rows(model: &ForestModel, matrix: &DesignMatrix, rows: &[usize]) -> Result<f64> {
    match &matrix.target {
        Target::Labels { y, .. } => {
            let gt: Vec<usize> = rows.iter().map(|&r| y[r]).collect();
            let pred: Vec<usize> = rows.iter().map(|&r| model.predict_class(&matrix.rows[r])).collect();
            weighted_f1(&gt, &pred)
        }
        Target::Reals(y) => {
            let gt: Vec<f64> = rows.iter().map(|&r| y[r]).collect();
            let pred: Vec<f64> = rows.iter().map(|&r| model.predict_real(&matrix.rows[r])).collect();
            pearson(&gt, &pred)
        }
    }
}

/// Fits every grid point on the train split and keeps the best validation score.
/// Ties go to fewer trees, then shallower trees, then earlier grid order.
pub fn grid_search_train(matrix: &DesignMatrix, grid: &ForestGrid, seed: u64) -> Result<GridSearchOutcome> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    if let Target::Labels { y, .. } = &matrix.target {
        let first = matrix.split.train.first().map(|&r| y[r]);
        if matrix.split.train.iter().all(|&r| Some(y[r]) == first) {
            return Err(Error::Training("train split holds a single class".into()));
        }
    }
    let fitted: Vec<(ForestModel, Option<f64>)> = points
        .par_iter()
        .map(|&params| {
            let trees = ForestModel::fit(&matrix.rows, targets(matrix), &matrix.split.train, params, seed)?;
            let model = model_for(matrix, params, seed, trees);
            let score = score_rows(&model, matrix, &matrix.split.validation).ok();
            Ok((model, score))
        })
        .collect::<Result<_>>()?;
    let table: Vec<GridScore> = fitted
        .iter()
        .map(|(m, s)| GridScore { params: m.params, validation_score: *s })
        .collect();
    let mut best: Option<usize> = None;
    for (i, (m, s)) in fitted.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => {
                let (bm, bs) = (&fitted[b].0, fitted[b].1);
                let key = |s: Option<f64>| s.unwrap_or(f64::NEG_INFINITY);
                key(*s) > key(bs)
                    || (key(*s) == key(bs)
                        && (m.params.n_estimators, m.params.max_depth)
                            < (bm.params.n_estimators, bm.params.max_depth))
            }
        };
        if better {
            best = Some(i);
        }
    }
    let best = fitted.into_iter().nth(best.expect("grid is non-empty")).expect("index in range").0;
    Ok(GridSearchOutcome { best, table })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestEvaluation {
    pub task: Task,
    /// `weighted_f1` or `pearson`.
    pub metric: String,
    pub train_score: Option<f64>,
    pub test_score: Option<f64>,
    /// Set when a score is undefined (constant predictions or targets).
    pub undefined: Vec<String>,
    /// TVD between predicted and true test distributions.
    pub test_tvd: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub params: ForestParams,
    /// Predicted label frequencies on the test split (classification only).
    pub predicted_frequencies: BTreeMap<String, usize>,
}

pub fn evaluate(model: &ForestModel, matrix: &DesignMatrix) -> Result<ForestEvaluation> {
    if model.task != matrix.task() {
        return Err(Error::Validation("model task does not match target kind".into()));
    }
    let test = &matrix.split.test;
    let mut undefined = Vec::new();
    let mut score = |name: &str, rows: &[usize]| match score_rows(model, matrix, rows) {
        Ok(v) => Some(v),
        Err(_) => {
            undefined.push(name.to_string());
            None
        }
    };
    let train_score = score("train", &matrix.split.train);
    let test_score = score("test", test);
    let mut predicted_frequencies = BTreeMap::new();
    let test_tvd = match &matrix.target {
        Target::Labels { classes, y } => {
            let gt: Vec<&str> = test.iter().map(|&r| classes[y[r]].as_str()).collect();
            let pred: Vec<&str> = test
                .iter()
                .map(|&r| classes[model.predict_class(&matrix.rows[r])].as_str())
                .collect();
            for p in &pred {
                *predicted_frequencies.entry(p.to_string()).or_insert(0) += 1;
            }
            tvd_discrete(
                &DistributionSummary::from_labels(gt.iter().copied(), classes)?,
                &DistributionSummary::from_labels(pred.iter().copied(), classes)?,
            )?
        }
        Target::Reals(y) => {
            let gt: Vec<f64> = test.iter().map(|&r| y[r]).collect();
            let pred: Vec<f64> = test.iter().map(|&r| model.predict_real(&matrix.rows[r])).collect();
            tvd_binned(&gt, &pred, DEFAULT_K_BINS)?
        }
    };
    Ok(ForestEvaluation {
        task: model.task,
        metric: match model.task {
            Task::Classification => "weighted_f1".into(),
            Task::Regression => "pearson".into(),
        },
        train_score,
        test_score,
        undefined,
        test_tvd,
        n_train: matrix.split.train.len(),
        n_test: test.len(),
        params: model.params,
        predicted_frequencies,
    })
}

/// Fits a forest on the matrix's train split with one parameter set.
pub fn train(matrix: &DesignMatrix, params: ForestParams, seed: u64) -> Result<ForestModel> {
    let trees = ForestModel::fit(&matrix.rows, targets(matrix), &matrix.split.train, params, seed)?;
    Ok(model_for(matrix, params, seed, trees))
}

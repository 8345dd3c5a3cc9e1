//! Leave-one-item-out evaluation against each respondent's own answers.


use serde::{Deserialize, Serialize};

use super::{Diagnostics, Predictions, Study};
use crate::agent::Condition;
use crate::corpus::{format_number, AnswerValue, ItemKind, MissingReason};
use crate::error::{Error, Result};
use crate::forest::{evaluate as forest_evaluate, grid_search_train, preprocess, ForestEvaluation, PreprocessOptions};
use crate::inference::{participant_bootstrap, BootstrapConfig, BootstrapResult, Panel, PanelCell, PanelQuestion};
use crate::metrics::{
    bin_edges, bin_index, binned_pair, item_entropy, pct_change, pearson, profile_diversity, tercile_mean_validation,
    tvd_discrete, weighted_f1, DistributionSummary, DiversityResult, LogBase, Support, TercileRow,
};
use crate::seed::{derive_seed, stable_hash};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frequencies {
    pub labels: Vec<String>,
    pub ground_truth: Vec<usize>,
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density {
    /// `k + 1` bin edges over the pooled range.
    pub edges: Vec<f64>,
    pub ground_truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeGroupRow {
    pub band: String,
    pub n: usize,
    pub mean_ground_truth: Option<f64>,
    pub mean_predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    /// `weighted_f1` (categorical) or `pearson` (numeric).
    pub metric: String,
    pub value: Option<f64>,
    pub tvd: Option<f64>,
    /// Pairs entering the agreement metric.
    pub n: usize,
    /// Answers entering the TVD.
    pub n_tvd: usize,
    pub predicted_entropy: Option<f64>,
    pub ground_truth_entropy: Option<f64>,
    /// Why a metric is absent; empty when all are present.
    pub failures: Vec<String>,
    pub frequencies: Option<Frequencies>,
    pub density: Option<Density>,
    pub terciles: Option<Vec<TercileRow>>,
    pub age_groups: Vec<AgeGroupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub code: String,
    pub numeric: bool,
    pub conditions: Vec<ConditionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PctChangeRow {
    pub question: String,
    pub from: Condition,
    pub to: Condition,
    pub tvd_from: f64,
    pub tvd_to: f64,
    pub pct_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    /// A condition name or `ground_truth`.
    pub source: String,
    pub result: Option<DiversityResult>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub a: Condition,
    pub b: Condition,
    pub result: Option<BootstrapResult>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub question: String,
    pub evaluation: Option<ForestEvaluation>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualReport {
    pub questions: Vec<QuestionResult>,
    pub pct_change: Vec<PctChangeRow>,
    pub diversity: Vec<DiversityRow>,
    pub bootstrap: Vec<BootstrapRow>,
    pub forest: Vec<ForestRow>,
    pub diagnostics: Diagnostics,
}

impl IndividualReport {
    pub fn result(&self, question: &str, condition: Condition) -> Option<&ConditionResult> {
        self.questions
            .iter()
            .find(|q| q.code == question)?
            .conditions
            .iter()
            .find(|c| c.condition == condition)
    }
}

fn count_labels(labels: &[String], order: &[String]) -> Vec<usize> {
    order.iter().map(|o| labels.iter().filter(|l| *l == o).count()).collect()
}

fn failure<T>(out: &mut Vec<String>, what: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            out.push(format!("{what}: {e}"));
            None
        }
    }
}

struct Pair<'a> {
    age: u32,
    truth: &'a AnswerValue,
    pred: &'a AnswerValue,
}

fn categorical_result(
    condition: Condition,
    options: &[String],
    pairs: &[Pair<'_>],
    missing_as_category: bool,
) -> ConditionResult {
    let mut failures = Vec::new();
    let kept: Vec<&Pair<'_>> = pairs
        .iter()
        .filter(|p| missing_as_category || !(p.truth.is_missing() || p.pred.is_missing()))
        .collect();
    let gt: Vec<String> = kept.iter().map(|p| p.truth.category_label()).collect();
    let pred: Vec<String> = kept.iter().map(|p| p.pred.category_label()).collect();
    let mut order: Vec<String> = options.to_vec();
    for r in MissingReason::ALL {
        let l = r.label().to_string();
        if gt.contains(&l) || pred.contains(&l) {
            order.push(l);
        }
    }
    let tvd = failure(
        &mut failures,
        "tvd",
        DistributionSummary::from_labels(gt.iter().map(String::as_str), &order).and_then(|p| {
            DistributionSummary::from_labels(pred.iter().map(String::as_str), &order).and_then(|q| tvd_discrete(&p, &q))
        }),
    );
    let substantive: Vec<(&str, &str)> = pairs
        .iter()
        .filter_map(|p| Some((p.truth.as_label()?, p.pred.as_label()?)))
        .collect();
    let (sg, sp): (Vec<&str>, Vec<&str>) = substantive.iter().copied().unzip();
    let value = failure(&mut failures, "weighted_f1", weighted_f1(&sg, &sp));
    let pred_subst: Vec<&str> = pairs.iter().filter_map(|p| p.pred.as_label()).collect();
    let gt_subst: Vec<&str> = pairs.iter().filter_map(|p| p.truth.as_label()).collect();
    ConditionResult {
        condition,
        metric: "weighted_f1".into(),
        value,
        tvd,
        n: substantive.len(),
        n_tvd: kept.len(),
        predicted_entropy: item_entropy(&pred_subst, LogBase::Natural).ok(),
        ground_truth_entropy: item_entropy(&gt_subst, LogBase::Natural).ok(),
        failures,
        frequencies: Some(Frequencies {
            ground_truth: count_labels(&gt, &order),
            predicted: count_labels(&pred, &order),
            labels: order,
        }),
        density: None,
        terciles: None,
        age_groups: Vec::new(),
    }
}

fn numeric_result(
    condition: Condition,
    range: (f64, f64),
    pairs: &[Pair<'_>],
    k_bins: usize,
    age_bands: &[(u32, u32)],
) -> ConditionResult {
    let mut failures = Vec::new();
    let complete: Vec<(u32, f64, f64)> = pairs
        .iter()
        .filter_map(|p| Some((p.age, p.truth.as_numeric()?, p.pred.as_numeric()?)))
        .collect();
    let gt: Vec<f64> = complete.iter().map(|c| c.1).collect();
    let pred: Vec<f64> = complete.iter().map(|c| c.2).collect();
    let value = failure(&mut failures, "pearson", pearson(&gt, &pred));
    let binned = failure(&mut failures, "tvd", binned_pair(&gt, &pred, k_bins));
    let (tvd, density, pred_entropy, gt_entropy) = match binned {
        Some(Some((p, q))) => {
            let edges = match p.support() {
                Support::Bins(e) => e.clone(),
                Support::Labels(_) => unreachable!("binned summaries have bin support"),
            };
            let bins = |xs: &[f64]| xs.iter().map(|x| bin_index(*x, &edges)).collect::<Vec<usize>>();
            (
                tvd_discrete(&p, &q).ok(),
                Some(Density { edges: edges.clone(), ground_truth: p.mass().to_vec(), predicted: q.mass().to_vec() }),
                item_entropy(&bins(&pred), LogBase::Natural).ok(),
                item_entropy(&bins(&gt), LogBase::Natural).ok(),
            )
        }
        // All values coincide: identical point masses.
        Some(None) => (Some(0.0), None, Some(0.0), Some(0.0)),
        None => (None, None, None, None),
    };
    let terciles = if range == (0.0, 100.0) && !gt.is_empty() {
        failure(&mut failures, "terciles", tercile_mean_validation(&gt, &pred))
    } else {
        None
    };
    let age_groups = age_bands
        .iter()
        .map(|&(lo, hi)| {
            let inside: Vec<&(u32, f64, f64)> = complete.iter().filter(|c| (lo..=hi).contains(&c.0)).collect();
            let n = inside.len();
            let mean = |f: fn(&(u32, f64, f64)) -> f64| (n > 0).then(|| inside.iter().map(|c| f(c)).sum::<f64>() / n as f64);
            AgeGroupRow {
                band: format!("{lo}-{hi}"),
                n,
                mean_ground_truth: mean(|c| c.1),
                mean_predicted: mean(|c| c.2),
            }
        })
        .collect();
    ConditionResult {
        condition,
        metric: "pearson".into(),
        value,
        tvd,
        n: complete.len(),
        n_tvd: complete.len(),
        predicted_entropy: pred_entropy,
        ground_truth_entropy: gt_entropy,
        failures,
        frequencies: None,
        density,
        terciles,
        age_groups,
    }
}

/// Response-vector entry for diversity: numeric answers are discretized into
/// `k` equal-width bins over the item range, so continuous noise does not make
/// every vector unique.
fn profile_label(v: &AnswerValue, range: Option<(f64, f64)>, k: usize) -> String {
    match (v, range) {
        (AnswerValue::Numeric(x), Some((lo, hi))) => format!("bin{}", bin_index(*x, &bin_edges(lo, hi, k))),
        (AnswerValue::Numeric(x), None) => format_number(*x),
        (other, _) => other.category_label(),
    }
}

pub(super) fn evaluate(study: &Study, preds: &Predictions, diagnostics: Diagnostics) -> Result<IndividualReport> {
    let cfg = &study.config;
    let eval = &cfg.evaluation;
    let participants = study.participants();

    let mut questions = Vec::new();
    for target in &study.targets {
        let item = &target.template.item;
        let mut conditions = Vec::new();
        for &condition in &cfg.conditions {
            let pairs: Vec<Pair<'_>> = participants
                .iter()
                .filter_map(|rid| {
                    let record = study.corpus.respondent(rid)?;
                    Some(Pair {
                        age: record.age,
                        truth: record.answer(&item.code)?,
                        pred: preds.get(rid, &item.code, condition)?,
                    })
                })
                .collect();
            conditions.push(match &item.kind {
                ItemKind::Categorical { options } => {
                    categorical_result(condition, options, &pairs, eval.missing_as_category)
                }
                ItemKind::Numeric { min, max } => {
                    numeric_result(condition, (*min, *max), &pairs, eval.k_bins, &eval.age_bands)
                }
            });
        }
        questions.push(QuestionResult { code: item.code.clone(), numeric: item.is_numeric(), conditions });
    }

    let mut pct_change_rows = Vec::new();
    for q in &questions {
        for &(from, to) in &eval.pct_change_pairs {
            let tvd = |c: Condition| q.conditions.iter().find(|r| r.condition == c).and_then(|r| r.tvd);
            if let (Some(a), Some(b)) = (tvd(from), tvd(to)) {
                pct_change_rows.push(PctChangeRow {
                    question: q.code.clone(),
                    from,
                    to,
                    tvd_from: a,
                    tvd_to: b,
                    pct_change: pct_change(a, b).ok(),
                });
            }
        }
    }

    let codes: Vec<(&str, Option<(f64, f64)>)> =
        study.targets.iter().map(|t| (t.template.item.code.as_str(), t.template.item.range())).collect();
    let k = eval.k_bins;
    let mut diversity = Vec::new();
    let truth_rows: Vec<Vec<String>> = participants
        .iter()
        .filter_map(|rid| {
            let r = study.corpus.respondent(rid)?;
            codes.iter().map(|(c, range)| r.answer(c).map(|a| profile_label(a, *range, k))).collect()
        })
        .collect();
    diversity.push(diversity_row("ground_truth", &truth_rows));
    for &condition in &cfg.conditions {
        let rows: Vec<Vec<String>> = participants
            .iter()
            .filter_map(|rid| {
                codes.iter().map(|(c, range)| preds.get(rid, c, condition).map(|a| profile_label(a, *range, k))).collect()
            })
            .collect();
        diversity.push(diversity_row(condition.as_str(), &rows));
    }

    let mut bootstrap = Vec::new();
    for &(a, b) in &eval.bootstrap_pairs {
        let panel = Panel {
            questions: study
                .targets
                .iter()
                .map(|t| PanelQuestion { code: t.template.item.code.clone(), numeric: t.template.item.is_numeric() })
                .collect(),
            participants: participants.iter().map(|p| p.to_string()).collect(),
            cells: participants
                .iter()
                .map(|rid| {
                    let record = study.corpus.respondent(rid);
                    codes
                        .iter()
                        .map(|(c, _)| {
                            let truth = record?.answer(c)?.clone();
                            Some(PanelCell {
                                truth,
                                a: preds.get(rid, c, a).cloned(),
                                b: preds.get(rid, c, b).cloned(),
                            })
                        })
                        .collect()
                })
                .collect(),
        };
        let config = BootstrapConfig {
            seed: derive_seed(cfg.seed, &[cfg.bootstrap.seed, stable_hash(a.as_str()), stable_hash(b.as_str())]),
            ..cfg.bootstrap.clone()
        };
        let (result, failure) = match participant_bootstrap(&panel, &config) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        bootstrap.push(BootstrapRow { a, b, result, failure });
    }

    let mut forest = Vec::new();
    if cfg.forest.enabled {
        for (code, _) in &codes {
            let opts = PreprocessOptions {
                exclude: cfg.exclusion_codes(),
                min_rows: cfg.forest.min_rows,
                seed: derive_seed(cfg.seed, &[stable_hash("forest"), stable_hash(code)]),
                ..PreprocessOptions::default()
            };
            let outcome = preprocess(&study.corpus, code, &opts).and_then(|m| {
                let search = grid_search_train(&m, &cfg.forest.grid, opts.seed)?;
                forest_evaluate(&search.best, &m)
            });
            forest.push(match outcome {
                Ok(e) => ForestRow { question: code.to_string(), evaluation: Some(e), failure: None },
                Err(e) => ForestRow { question: code.to_string(), evaluation: None, failure: Some(e.to_string()) },
            });
        }
    }

    if questions.iter().any(|q| q.conditions.len() != cfg.conditions.len()) {
        return Err(Error::Integrity("a (question, condition) pair has no result".into()));
    }
    Ok(IndividualReport { questions, pct_change: pct_change_rows, diversity, bootstrap, forest, diagnostics })
}

fn diversity_row(source: &str, rows: &[Vec<String>]) -> DiversityRow {
    match profile_diversity(rows) {
        Ok(r) => DiversityRow { source: source.to_string(), result: Some(r), failure: None },
        Err(e) => DiversityRow { source: source.to_string(), result: None, failure: Some(e.to_string()) },
    }
}

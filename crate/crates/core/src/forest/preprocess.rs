//! Survey corpus to numeric design matrix.
//!
//! Order of operations: population filter, drop rows whose target is missing
//! for any reason, drop feature columns missing in more than 30% of the
//! remaining rows, split 60/20/20, impute with train-split mode (categorical)
//! or median (numeric), one-hot encode categoricals.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::Task;
use crate::corpus::{filter_population, AnswerValue, ItemKind, RespondentRecord, SurveyCorpus};
use crate::error::{Error, Result};

/// A column missing in more than this share of rows is removed.
pub const MISSING_COLUMN_LIMIT: f64 = 0.30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Empty keeps every country.
    pub countries: BTreeSet<String>,
    /// Items never used as features (besides the target itself).
    pub exclude: BTreeSet<String>,
    pub include_country: bool,
    pub include_age: bool,
    pub min_rows: usize,
    pub seed: u64,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            countries: BTreeSet::new(),
            exclude: BTreeSet::new(),
            include_country: true,
            include_age: true,
            min_rows: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Labels { classes: Vec<String>, y: Vec<usize> },
    Reals(Vec<f64>),
}

/// Row indices into the design matrix; disjoint, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub target_code: String,
    pub row_ids: Vec<String>,
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Target,
    pub split: SplitIndices,
    pub dropped_columns: Vec<String>,
}

impl DesignMatrix {
    pub fn task(&self) -> Task {
        match self.target {
            Target::Labels { .. } => Task::Classification,
            Target::Reals(_) => Task::Regression,
        }
    }
}

fn present<'a>(r: &'a RespondentRecord, code: &str) -> Option<&'a AnswerValue> {
    r.answer(code).filter(|a| !a.is_missing())
}

fn split_indices(n: usize, seed: u64) -> SplitIndices {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = (n as f64 * 0.2).round() as usize;
    let mut train = idx[..n_train].to_vec();
    let mut validation = idx[n_train..n_train + n_val].to_vec();
    let mut test = idx[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    SplitIndices { train, validation, test }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn preprocess(corpus: &SurveyCorpus, target: &str, opts: &PreprocessOptions) -> Result<DesignMatrix> {
    let inst = corpus.instrument();
    let target_item = inst
        .get(target)
        .ok_or_else(|| Error::UnknownItems { codes: vec![target.to_string()] })?;
    let population = filter_population(corpus, &opts.countries, None);
    let rows: Vec<&RespondentRecord> = population
        .respondents()
        .iter()
        .filter(|r| present(r, target).is_some())
        .collect();
    let min_rows = opts.min_rows.max(5);
    if rows.len() < min_rows {
        return Err(Error::InsufficientData(format!(
            "{} rows with an answer to `{target}`, need {min_rows}",
            rows.len()
        )));
    }
    let n = rows.len();
    let split = split_indices(n, opts.seed);

    let mut kept = Vec::new();
    let mut dropped_columns = Vec::new();
    for item in inst.items() {
        if item.code == target || opts.exclude.contains(&item.code) {
            continue;
        }
        let missing = rows.iter().filter(|r| present(r, &item.code).is_none()).count();
        if missing as f64 > MISSING_COLUMN_LIMIT * n as f64 {
            dropped_columns.push(item.code.clone());
        } else {
            kept.push(item);
        }
    }

    let mut column_names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for item in kept {
        match &item.kind {
            ItemKind::Numeric { .. } => {
                let train_values: Vec<f64> = split
                    .train
                    .iter()
                    .filter_map(|&i| present(rows[i], &item.code).and_then(AnswerValue::as_numeric))
                    .collect();
                let all_values: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| present(r, &item.code).and_then(AnswerValue::as_numeric))
                    .collect();
                let fill = median(if train_values.is_empty() { all_values } else { train_values });
                column_names.push(item.code.clone());
                columns.push(
                    rows.iter()
                        .map(|r| present(r, &item.code).and_then(AnswerValue::as_numeric).unwrap_or(fill))
                        .collect(),
                );
            }
            ItemKind::Categorical { options } => {
                let label = |r: &RespondentRecord| present(r, &item.code).and_then(|a| a.as_label().map(str::to_string));
                let observed: BTreeSet<String> = rows.iter().filter_map(|r| label(r)).collect();
                let levels: Vec<&String> = options.iter().filter(|o| observed.contains(*o)).collect();
                let count_in = |idx: &mut dyn Iterator<Item = &RespondentRecord>| {
                    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                    for r in idx {
                        if let Some(l) = label(r) {
                            *counts.entry(l).or_default() += 1;
                        }
                    }
                    counts
                };
                let mut train_counts = count_in(&mut split.train.iter().map(|&i| rows[i]));
                if train_counts.is_empty() {
                    train_counts = count_in(&mut rows.iter().copied());
                }
                // Mode; ties go to the earlier option.
                let mut fill: Option<String> = None;
                let mut best = 0;
                for level in &levels {
                    let c = train_counts.get(level.as_str()).copied().unwrap_or(0);
                    if c > best {
                        best = c;
                        fill = Some(level.to_string());
                    }
                }
                let values: Vec<Option<String>> = rows.iter().map(|r| label(r).or_else(|| fill.clone())).collect();
                for level in levels {
                    column_names.push(format!("{}={level}", item.code));
                    columns.push(values.iter().map(|v| f64::from(v.as_deref() == Some(level.as_str()))).collect());
                }
            }
        }
    }
    if opts.include_country {
        let countries: BTreeSet<&str> = rows.iter().map(|r| r.country.as_str()).collect();
        for c in countries {
            column_names.push(format!("country={c}"));
            columns.push(rows.iter().map(|r| f64::from(r.country == c)).collect());
        }
    }
    if opts.include_age {
        column_names.push("age".into());
        columns.push(rows.iter().map(|r| f64::from(r.age)).collect());
    }
    if columns.is_empty() {
        return Err(Error::InsufficientData(format!("no feature columns survive for `{target}`")));
    }

    let target = match &target_item.kind {
        ItemKind::Categorical { options } => {
            let labels: Vec<String> = rows
                .iter()
                .map(|r| present(r, target).map(AnswerValue::category_label).expect("filtered above"))
                .collect();
            let observed: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
            let mut classes: Vec<String> = options.iter().filter(|o| observed.contains(o.as_str())).cloned().collect();
            classes.extend(observed.iter().filter(|l| !options.iter().any(|o| o == *l)).map(|l| l.to_string()));
            let y = labels
                .iter()
                .map(|l| classes.iter().position(|c| c == l).expect("class present"))
                .collect();
            Target::Labels { classes, y }
        }
        ItemKind::Numeric { .. } => Target::Reals(
            rows.iter()
                .map(|r| present(r, target).and_then(AnswerValue::as_numeric).expect("filtered above"))
                .collect(),
        ),
    };

    Ok(DesignMatrix {
        target_code: target_item.code.clone(),
        row_ids: rows.iter().map(|r| r.respondent_id.clone()).collect(),
        column_names,
        rows: (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect(),
        target,
        split,
        dropped_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_for_100_rows() {
        let s = split_indices(100, 7);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (60, 20, 20));
        let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

//! Country-level comparison of simulated answer shares with reference shares.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Diagnostics, Predictions, Study};
use crate::agent::Condition;
use crate::corpus::AnswerValue;
use crate::error::{Error, Result};
use crate::metrics::{tvd_discrete, DistributionSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryOption {
    pub label: String,
    pub simulated: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRow {
    pub question: String,
    pub condition: Condition,
    pub country: String,
    pub options: Vec<CountryOption>,
    pub tvd: Option<f64>,
    /// Predictions counted in the simulated shares.
    pub n: usize,
    /// Predictions dropped as unparseable or non-substantive.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryReport {
    pub rows: Vec<CountryRow>,
    pub diagnostics: Diagnostics,
}

impl CountryReport {
    pub fn row(&self, question: &str, condition: Condition, country: &str) -> Option<&CountryRow> {
        self.rows
            .iter()
            .find(|r| r.question == question && r.condition == condition && r.country == country)
    }
}

pub(super) fn evaluate(study: &Study, preds: &Predictions, diagnostics: Diagnostics) -> Result<CountryReport> {
    let participants = study.participants();
    let countries: BTreeSet<&str> = participants
        .iter()
        .filter_map(|rid| study.corpus.respondent(rid).map(|r| r.country.as_str()))
        .collect();
    let mut rows = Vec::new();
    for target in &study.targets {
        let code = &target.template.item.code;
        for country in &countries {
            let reference = study
                .references
                .iter()
                .find(|r| &r.item_code == code && r.stratum == *country)
                .ok_or_else(|| Error::Coverage(format!("no reference distribution for `{code}` in {country}")))?;
            let labels: Vec<String> = reference.labels().map(str::to_string).collect();
            for &condition in &study.config.conditions {
                let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
                let mut unmatched = BTreeSet::new();
                let mut dropped = 0;
                for rid in &participants {
                    let Some(record) = study.corpus.respondent(rid) else { continue };
                    if record.country != *country {
                        continue;
                    }
                    let Some(pred) = preds.get(rid, code, condition) else { continue };
                    let label = pred.category_label();
                    match labels.iter().find(|l| **l == label) {
                        Some(l) => *counts.entry(l.as_str()).or_default() += 1,
                        None if matches!(pred, AnswerValue::Missing(_)) => dropped += 1,
                        None => {
                            unmatched.insert(label);
                        }
                    }
                }
                if !unmatched.is_empty() {
                    return Err(Error::LabelMapping { unmatched: unmatched.into_iter().collect() });
                }
                let n: usize = counts.values().sum();
                let simulated: Vec<f64> = labels
                    .iter()
                    .map(|l| if n == 0 { 0.0 } else { counts.get(l.as_str()).copied().unwrap_or(0) as f64 / n as f64 })
                    .collect();
                let tvd = if n == 0 {
                    None
                } else {
                    let p = DistributionSummary::from_labels(
                        labels.iter().zip(&simulated).flat_map(|(l, _)| {
                            std::iter::repeat_n(l.as_str(), counts.get(l.as_str()).copied().unwrap_or(0))
                        }),
                        &labels,
                    )?;
                    Some(tvd_discrete(&p, &DistributionSummary::from_reference(reference)?)?)
                };
                rows.push(CountryRow {
                    question: code.clone(),
                    condition,
                    country: country.to_string(),
                    options: labels
                        .iter()
                        .zip(&simulated)
                        .zip(&reference.frequencies)
                        .map(|((l, s), (_, r))| CountryOption { label: l.clone(), simulated: *s, reference: *r })
                        .collect(),
                    tvd,
                    n,
                    dropped,
                });
            }
        }
    }
    Ok(CountryReport { rows, diagnostics })
}

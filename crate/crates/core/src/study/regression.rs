//! Scale-based regression study: elicited 1-7 answers are scored into scales,
//! checked for dispersion, reliability and homogeneity, then regressed.

use serde::{Deserialize, Serialize};

use super::{Diagnostics, Predictions, Study};
use crate::agent::Condition;
use crate::corpus::StratumKey;
use crate::metrics::{
    cronbach, icc1, item_entropy, profile_diversity, AlphaDecomposition, DiversityResult, IccResult, LogBase,
};
use crate::psychometrics::{
    hierarchical_regression, retirement_scale_definitions, score_scales, simple_slopes, RegressionResult,
    RegressionRoles, ResponseMatrix, SimpleSlopesResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub name: String,
    pub n: usize,
    pub deletions: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Mean over the scale's items of the answer entropy (natural log).
    pub entropy: Option<f64>,
    pub alpha: Option<AlphaDecomposition>,
    pub icc: Option<IccResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConditionReport {
    pub condition: Condition,
    pub agents: usize,
    pub scales: Vec<ScaleSummary>,
    /// `(item, entropy)` in instrument order.
    pub item_entropy: Vec<(String, Option<f64>)>,
    pub diversity: Option<DiversityResult>,
    pub regression: Option<RegressionResult>,
    pub slopes: Option<SimpleSlopesResult>,
    /// Non-fatal errors, e.g. a constant predictor.
    pub failures: Vec<String>,
}

/// A published comparison value, keyed by term name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetValue {
    pub term: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub conditions: Vec<RegressionConditionReport>,
    /// Standardized betas, R² and two slope cells of the human sample, for side-by-side reading.
    pub original: Vec<TargetValue>,
    pub icc_grouping: StratumKey,
    pub diagnostics: Diagnostics,
}

pub fn original_study_targets() -> Vec<TargetValue> {
    [
        ("KFP", 0.51),
        ("FTP", 0.25),
        ("FRT", 0.16),
        ("KFP:FTP", 0.00),
        ("KFP:FRT", -0.07),
        ("FTP:FRT", 0.13),
        ("KFP:FTP:FRT", -0.19),
        ("r_squared", 0.59),
        ("slope_high_ftp_low_kfp", 0.55),
        ("slope_high_ftp_high_kfp", 0.16),
    ]
    .into_iter()
    .map(|(term, value)| TargetValue { term: term.into(), value })
    .collect()
}

/// Ten-year age bands crossed with the gender item.
fn default_grouping(gender_item: &str) -> StratumKey {
    StratumKey::Joint(vec![
        StratumKey::AgeBands((0..12).map(|i| (i * 10, i * 10 + 9)).collect()),
        StratumKey::Item(gender_item.to_string()),
    ])
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = (v.len() > 1)
        .then(|| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt());
    (Some(m), sd)
}

pub(super) fn evaluate(study: &Study, preds: &Predictions, diagnostics: Diagnostics) -> crate::error::Result<RegressionReport> {
    let cfg = &study.config;
    let defs = retirement_scale_definitions();
    let items: Vec<String> = study.targets.iter().map(|t| t.template.item.code.clone()).collect();
    let agents: Vec<String> = study.participants().iter().map(|s| s.to_string()).collect();
    let grouping = cfg
        .regression
        .icc_groups
        .clone()
        .unwrap_or_else(|| default_grouping(&cfg.demographics.gender));
    let roles = RegressionRoles::default();

    let mut conditions = Vec::new();
    for &condition in &cfg.conditions {
        let mut failures = Vec::new();
        let labels: Vec<Vec<String>> = agents
            .iter()
            .map(|a| {
                items
                    .iter()
                    .map(|i| preds.get(a, i, condition).map(|v| v.category_label()).unwrap_or_default())
                    .collect()
            })
            .collect();
        let values: Vec<Vec<Option<f64>>> = labels
            .iter()
            .map(|row| row.iter().map(|l| l.parse::<f64>().ok()).collect())
            .collect();
        let matrix = ResponseMatrix { agents: agents.clone(), items: items.clone(), values: values.clone() };

        let item_entropy_rows: Vec<(String, Option<f64>)> = items
            .iter()
            .enumerate()
            .map(|(j, code)| {
                let col: Vec<&str> = labels
                    .iter()
                    .zip(&values)
                    .filter(|(_, v)| v[j].is_some())
                    .map(|(l, _)| l[j].as_str())
                    .collect();
                (code.clone(), item_entropy(&col, LogBase::Natural).ok())
            })
            .collect();
        let diversity = match profile_diversity(&labels) {
            Ok(d) => Some(d),
            Err(e) => {
                failures.push(format!("diversity: {e}"));
                None
            }
        };

        let scores = match score_scales(&matrix, &defs) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("scoring: {e}"));
                conditions.push(RegressionConditionReport {
                    condition,
                    agents: agents.len(),
                    scales: Vec::new(),
                    item_entropy: item_entropy_rows,
                    diversity,
                    regression: None,
                    slopes: None,
                    failures,
                });
                continue;
            }
        };

        let mut scales = Vec::new();
        for (s, def) in defs.iter().enumerate() {
            let present: Vec<(usize, f64)> = scores
                .values
                .iter()
                .enumerate()
                .filter_map(|(a, row)| row[s].map(|v| (a, v)))
                .collect();
            let vals: Vec<f64> = present.iter().map(|p| p.1).collect();
            let (mean, sd) = mean_sd(&vals);
            let cols: Vec<usize> = def
                .item_codes
                .iter()
                .map(|c| items.iter().position(|i| i == c).expect("scale items are targets"))
                .collect();
            let rows: Vec<Vec<f64>> = values
                .iter()
                .map(|row| {
                    cols.iter()
                        .zip(&def.reverse_flags)
                        .map(|(&c, &rev)| row[c].map_or(f64::NAN, |v| if rev { def.reverse(v) } else { v }))
                        .collect()
                })
                .collect();
            let alpha = match cronbach(&rows, &def.item_codes) {
                Ok(a) => Some(a),
                Err(e) => {
                    failures.push(format!("alpha {}: {e}", def.name));
                    None
                }
            };
            let mut icc_scores = Vec::new();
            let mut icc_groups = Vec::new();
            for (a, v) in &present {
                if let Some(label) = study.corpus.respondent(&agents[*a]).and_then(|r| grouping.label(r)) {
                    icc_scores.push(*v);
                    icc_groups.push(label);
                }
            }
            let icc = match icc1(&icc_scores, &icc_groups) {
                Ok(i) => Some(i),
                Err(e) => {
                    failures.push(format!("icc {}: {e}", def.name));
                    None
                }
            };
            let entropies: Vec<f64> = cols.iter().filter_map(|&c| item_entropy_rows[c].1).collect();
            scales.push(ScaleSummary {
                name: def.name.clone(),
                n: vals.len(),
                deletions: scores.deletions[&def.name],
                mean,
                sd,
                entropy: (entropies.len() == cols.len()).then(|| entropies.iter().sum::<f64>() / cols.len() as f64),
                alpha,
                icc,
            });
        }

        let regression = match hierarchical_regression(&scores, &roles) {
            Ok(r) => Some(r),
            Err(e) => {
                failures.push(format!("regression: {e}"));
                None
            }
        };
        let slopes = if regression.is_some() {
            match simple_slopes(&scores, &roles, cfg.regression.band) {
                Ok(s) => Some(s),
                Err(e) => {
                    failures.push(format!("simple slopes: {e}"));
                    None
                }
            }
        } else {
            None
        };
        conditions.push(RegressionConditionReport {
            condition,
            agents: agents.len(),
            scales,
            item_entropy: item_entropy_rows,
            diversity,
            regression,
            slopes,
            failures,
        });
    }
    Ok(RegressionReport { conditions, original: original_study_targets(), icc_grouping: grouping, diagnostics })
}

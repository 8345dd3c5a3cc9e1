//! Response entropy and profile diversity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

/// Shannon entropy of the observed answer proportions.
pub fn item_entropy<T: Ord>(answers: &[T], base: LogBase) -> Result<f64> {
    if answers.is_empty() {
        return Err(Error::UndefinedMetric("entropy of zero answers".into()));
    }
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a).or_default() += 1;
    }
    let n = answers.len() as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(match base {
        LogBase::Natural => h,
        LogBase::Base2 => h / std::f64::consts::LN_2,
    }
    .max(0.0))
}

/// Mean item entropy over the columns of an agents × items matrix.
pub fn scale_entropy<T: Ord + Clone>(rows: &[Vec<T>], base: LogBase) -> Result<f64> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if k == 0 {
        return Err(Error::UndefinedMetric("scale entropy needs at least one item".into()));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("ragged response matrix".into()));
    }
    let mut total = 0.0;
    for j in 0..k {
        let col: Vec<T> = rows.iter().map(|r| r[j].clone()).collect();
        total += item_entropy(&col, base)?;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityResult {
    pub unique_profiles: usize,
    pub total: usize,
    pub ratio: f64,
    /// Share of agents whose response vector is among the 10 most frequent.
    pub top10_coverage: f64,
}

pub fn profile_diversity<T: Ord>(rows: &[Vec<T>]) -> Result<DiversityResult> {
    if rows.is_empty() {
        return Err(Error::UndefinedMetric("diversity of zero agents".into()));
    }
    let mut counts: BTreeMap<&[T], usize> = BTreeMap::new();
    for r in rows {
        *counts.entry(r.as_slice()).or_default() += 1;
    }
    let mut freq: Vec<usize> = counts.values().copied().collect();
    freq.sort_unstable_by(|a, b| b.cmp(a));
    let total = rows.len();
    let top: usize = freq.iter().take(10).sum();
    Ok(DiversityResult {
        unique_profiles: counts.len(),
        total,
        ratio: counts.len() as f64 / total as f64,
        top10_coverage: top as f64 / total as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_cases() {
        assert_eq!(item_entropy(&[3, 3, 3], LogBase::Natural).unwrap(), 0.0);
        let uniform: Vec<u8> = (1..=7).collect();
        assert!((item_entropy(&uniform, LogBase::Natural).unwrap() - 7f64.ln()).abs() < 1e-12);
        assert!((item_entropy(&[0, 1], LogBase::Base2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diversity_cases() {
        let same = vec![vec![1, 2]; 5];
        let d = profile_diversity(&same).unwrap();
        assert_eq!((d.unique_profiles, d.ratio, d.top10_coverage), (1, 0.2, 1.0));
        let distinct: Vec<Vec<u32>> = (0..40).map(|i| vec![i]).collect();
        let d = profile_diversity(&distinct).unwrap();
        assert_eq!((d.ratio, d.top10_coverage), (1.0, 0.25));
    }
}

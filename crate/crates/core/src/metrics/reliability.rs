//! Internal consistency and within-group homogeneity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scoring::pearson;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc: f64,
    pub ms_between: f64,
    pub ms_within: f64,
    pub n_groups: usize,
    /// `n0 = (N − Σ nᵢ² / N) / (a − 1)`; the plain group size when balanced.
    pub avg_group_size: f64,
}

/// One-way random-effects ICC(1).
pub fn icc1<G: Ord>(scores: &[f64], groups: &[G]) -> Result<IccResult> {
    if scores.len() != groups.len() {
        return Err(Error::Validation("scores and group labels differ in length".into()));
    }
    let mut by_group: BTreeMap<&G, Vec<f64>> = BTreeMap::new();
    for (s, g) in scores.iter().zip(groups) {
        by_group.entry(g).or_default().push(*s);
    }
    let a = by_group.len();
    if a < 2 {
        return Err(Error::Grouping(format!("need at least 2 groups, got {a}")));
    }
    if let Some(small) = by_group.values().find(|v| v.len() < 2) {
        return Err(Error::Grouping(format!(
            "every group needs at least 2 members, found one with {}",
            small.len()
        )));
    }
    let n = scores.len() as f64;
    let grand = scores.iter().sum::<f64>() / n;
    let (mut ssb, mut ssw, mut sum_sq_sizes) = (0.0, 0.0, 0.0);
    for v in by_group.values() {
        let ni = v.len() as f64;
        let mean = v.iter().sum::<f64>() / ni;
        ssb += ni * (mean - grand).powi(2);
        ssw += v.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        sum_sq_sizes += ni * ni;
    }
    let ms_between = ssb / (a - 1) as f64;
    let ms_within = ssw / (n - a as f64);
    let n0 = (n - sum_sq_sizes / n) / (a - 1) as f64;
    let denom = ms_between + (n0 - 1.0) * ms_within;
    if denom == 0.0 {
        return Err(Error::UndefinedMetric("ICC of a constant series".into()));
    }
    Ok(IccResult {
        icc: (ms_between - ms_within) / denom,
        ms_between,
        ms_within,
        n_groups: a,
        avg_group_size: n0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaDecomposition {
    pub alpha_raw: f64,
    pub alpha_std: f64,
    pub mean_inter_item_r: f64,
    pub mean_item_variance: f64,
    /// Variance of the per-agent item means.
    pub scale_variance: f64,
    pub k: usize,
    pub n: usize,
    /// Rows removed because some item was missing (NaN).
    pub dropped_rows: usize,
}

/// `k r̄ / (1 + (k − 1) r̄)`.
pub fn alpha_standardized(k: usize, mean_r: f64) -> f64 {
    let k = k as f64;
    k * mean_r / (1.0 + (k - 1.0) * mean_r)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Cronbach's α over an agents × k matrix, listwise-complete rows only.
/// `names` label the columns in errors.
pub fn cronbach(rows: &[Vec<f64>], names: &[String]) -> Result<AlphaDecomposition> {
    let k = names.len();
    if k < 2 {
        return Err(Error::Validation(format!("alpha needs k >= 2 items, got {k}")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::Validation("row width differs from item count".into()));
    }
    let complete: Vec<&Vec<f64>> = rows.iter().filter(|r| r.iter().all(|x| x.is_finite())).collect();
    let n = complete.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("alpha needs 2 complete rows, got {n}")));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| complete.iter().map(|r| r[j]).collect()).collect();
    let item_vars: Vec<f64> = cols.iter().map(|c| sample_variance(c)).collect();
    if let Some(j) = item_vars.iter().position(|v| *v == 0.0) {
        return Err(Error::CorrelationUndefined { item: names[j].clone() });
    }
    let totals: Vec<f64> = complete.iter().map(|r| r.iter().sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(Error::UndefinedMetric("scale total has zero variance".into()));
    }
    let mut r_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            r_sum += pearson(&cols[i], &cols[j])?;
            pairs += 1;
        }
    }
    let r_bar = r_sum / pairs as f64;
    let kf = k as f64;
    let means: Vec<f64> = totals.iter().map(|t| t / kf).collect();
    Ok(AlphaDecomposition {
        alpha_raw: kf / (kf - 1.0) * (1.0 - item_vars.iter().sum::<f64>() / total_var),
        alpha_std: alpha_standardized(k, r_bar),
        mean_inter_item_r: r_bar,
        mean_item_variance: item_vars.iter().sum::<f64>() / kf,
        scale_variance: sample_variance(&means),
        k,
        n,
        dropped_rows: rows.len() - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icc_exact_cases() {
        let r = icc1(&[1.0, 1.0, 3.0, 3.0], &["a", "a", "b", "b"]).unwrap();
        assert_eq!((r.ms_within, r.icc), (0.0, 1.0));
        assert!(icc1(&[1.0, 2.0], &["a", "a"]).is_err());
        assert!(icc1(&[1.0, 2.0, 3.0], &["a", "a", "b"]).is_err());
    }

    #[test]
    fn icc_balanced_n0_is_group_size() {
        let r = icc1(&[1.0, 2.0, 3.0, 2.0, 3.0, 5.0], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((r.avg_group_size - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cronbach_parallel_items() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 4]).collect();
        let names: Vec<String> = (0..4).map(|i| format!("i{i}")).collect();
        let a = cronbach(&rows, &names).unwrap();
        assert!((a.alpha_std - 1.0).abs() < 1e-12);
        assert!((a.alpha_raw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cronbach_constant_item_named() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 4.0]).collect();
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(cronbach(&rows, &names), Err(Error::CorrelationUndefined { item }) if item == "b"));
    }

    #[test]
    fn cronbach_listwise() {
        let mut rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        rows.push(vec![f64::NAN, 1.0]);
        let a = cronbach(&rows, &["a".into(), "b".into()]).unwrap();
        assert_eq!((a.n, a.dropped_rows), (10, 1));
    }
}

//! Item-level agreement scores.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Support-weighted mean of per-class F1 over the classes present in `gt`.
/// A class never predicted has precision 0 and F1 0.
pub fn weighted_f1<T: Ord>(gt: &[T], pred: &[T]) -> Result<f64> {
    if gt.len() != pred.len() {
        return Err(Error::Validation(format!(
            "weighted F1 needs equal lengths, got {} and {}",
            gt.len(),
            pred.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::UndefinedMetric("weighted F1 of zero pairs".into()));
    }
    let mut support: BTreeMap<&T, usize> = BTreeMap::new();
    let mut predicted: BTreeMap<&T, usize> = BTreeMap::new();
    let mut hits: BTreeMap<&T, usize> = BTreeMap::new();
    for (g, p) in gt.iter().zip(pred) {
        *support.entry(g).or_default() += 1;
        *predicted.entry(p).or_default() += 1;
        if g == p {
            *hits.entry(g).or_default() += 1;
        }
    }
    let n = gt.len() as f64;
    let classes: BTreeSet<&T> = support.keys().copied().collect();
    let mut total = 0.0;
    for c in classes {
        let s = support[c] as f64;
        let tp = hits.get(c).copied().unwrap_or(0) as f64;
        let np = predicted.get(c).copied().unwrap_or(0) as f64;
        let precision = if np > 0.0 { tp / np } else { 0.0 };
        let recall = tp / s;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1 * s / n;
    }
    Ok(total)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "pearson needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedMetric("pearson needs at least two pairs".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedMetric("pearson of a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `(survey − demo) / demo × 100`.
pub fn pct_change(demo_tvd: f64, survey_tvd: f64) -> Result<f64> {
    if demo_tvd == 0.0 {
        return Err(Error::DivisionByZero("percent change from a zero baseline".into()));
    }
    Ok((survey_tvd - demo_tvd) / demo_tvd * 100.0)
}

//! Frequency summaries and total variation distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ReferenceDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Labels(Vec<String>),
    /// `k + 1` increasing edges for `k` bins; the last bin is closed on the right.
    Bins(Vec<f64>),
}

/// Normalized mass over labels or bins. `mass.len()` equals the number of
/// labels or bins and sums to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    support: Support,
    mass: Vec<f64>,
    n: usize,
}

impl DistributionSummary {
    pub fn new(support: Support, mass: Vec<f64>, n: usize) -> Result<Self> {
        let slots = match &support {
            Support::Labels(l) => {
                let mut seen = std::collections::BTreeSet::new();
                if let Some(d) = l.iter().find(|x| !seen.insert(x.as_str())) {
                    return Err(Error::Validation(format!("label `{d}` repeated in support")));
                }
                l.len()
            }
            Support::Bins(e) => {
                if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Validation("bin edges must be strictly increasing".into()));
                }
                e.len() - 1
            }
        };
        if mass.len() != slots {
            return Err(Error::Validation(format!(
                "{} mass entries for {slots} support slots",
                mass.len()
            )));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Validation("negative or NaN mass".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("mass sums to {total}")));
        }
        Ok(DistributionSummary { support, mass, n })
    }

    /// Empirical label frequencies. `order` fixes the leading labels (zero mass
    /// allowed); unseen extra labels follow in lexicographic order.
    pub fn from_labels<'a, I>(labels: I, order: &[String]) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut n = 0;
        for l in labels {
            *counts.entry(l).or_default() += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::UndefinedMetric("distribution of zero answers".into()));
        }
        let mut support: Vec<String> = order.to_vec();
        support.extend(
            counts
                .keys()
                .filter(|k| !order.iter().any(|o| o == *k))
                .map(|k| k.to_string()),
        );
        let mass = support
            .iter()
            .map(|s| counts.get(s.as_str()).copied().unwrap_or(0) as f64 / n as f64)
            .collect();
        DistributionSummary::new(Support::Labels(support), mass, n)
    }

    pub fn from_reference(r: &ReferenceDistribution) -> Result<Self> {
        let (labels, mass): (Vec<String>, Vec<f64>) = r.frequencies.iter().cloned().unzip();
        DistributionSummary::new(Support::Labels(labels), mass, 0)
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.support {
            Support::Labels(l) => Some(l),
            Support::Bins(_) => None,
        }
    }

    /// Mass of `label`; 0 when the label is outside the support.
    pub fn prob(&self, label: &str) -> f64 {
        self.labels()
            .and_then(|l| l.iter().position(|x| x == label))
            .map(|i| self.mass[i])
            .unwrap_or(0.0)
    }
}

fn half_l1(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `½ Σ |p − q|` after aligning label supports on their union (absent labels
/// get mass 0). Binned summaries must share identical edges.
pub fn tvd_discrete(p: &DistributionSummary, q: &DistributionSummary) -> Result<f64> {
    match (&p.support, &q.support) {
        (Support::Labels(lp), Support::Labels(lq)) => {
            let mut union: Vec<&str> = lp.iter().map(String::as_str).collect();
            union.extend(lq.iter().map(String::as_str).filter(|l| !lp.iter().any(|x| x == l)));
            let pa: Vec<f64> = union.iter().map(|l| p.prob(l)).collect();
            let qa: Vec<f64> = union.iter().map(|l| q.prob(l)).collect();
            Ok(half_l1(&pa, &qa).min(1.0))
        }
        (Support::Bins(ep), Support::Bins(eq)) if ep == eq => Ok(half_l1(&p.mass, &q.mass).min(1.0)),
        _ => Err(Error::Validation("distributions have incompatible supports".into())),
    }
}

/// Equal-width edges over `[lo, hi]`.
pub fn bin_edges(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect()
}

/// Bin of `x` under `edges`: `edges[i] <= x < edges[i+1]`, last bin closed.
pub fn bin_index(x: f64, edges: &[f64]) -> usize {
    let k = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[k]);
    let mut i = (((x - lo) / (hi - lo)) * k as f64).floor().clamp(0.0, (k - 1) as f64) as usize;
    while i > 0 && x < edges[i] {
        i -= 1;
    }
    while i + 1 < k && x >= edges[i + 1] {
        i += 1;
    }
    i
}

/// Histogram of `xs` over `edges`, normalized to mass.
pub fn histogram(xs: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; edges.len() - 1];
    for &x in xs {
        counts[bin_index(x, edges)] += 1;
    }
    counts.into_iter().map(|c| c as f64 / xs.len() as f64).collect()
}

fn pooled_range(gt: &[f64], pred: &[f64]) -> Result<(f64, f64)> {
    if gt.is_empty() || pred.is_empty() {
        return Err(Error::UndefinedMetric("binned TVD needs non-empty samples".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in gt.iter().chain(pred) {
        if !x.is_finite() {
            return Err(Error::Validation(format!("non-finite sample {x}")));
        }
        lo = lo.min(x);
        hi = hi.max(x);
    }
    Ok((lo, hi))
}

/// Binned summaries of both samples over `k` equal bins spanning the pooled range.
/// `None` when every value is identical.
pub fn binned_pair(
    gt: &[f64],
    pred: &[f64],
    k: usize,
) -> Result<Option<(DistributionSummary, DistributionSummary)>> {
    if k == 0 {
        return Err(Error::Validation("k_bins must be positive".into()));
    }
    let (lo, hi) = pooled_range(gt, pred)?;
    if hi == lo {
        return Ok(None);
    }
    let edges = bin_edges(lo, hi, k);
    let p = DistributionSummary::new(Support::Bins(edges.clone()), histogram(gt, &edges), gt.len())?;
    let q = DistributionSummary::new(Support::Bins(edges.clone()), histogram(pred, &edges), pred.len())?;
    Ok(Some((p, q)))
}

/// TVD between equal-width histograms over the pooled range; 0 when all
/// values coincide.
pub fn tvd_binned(gt: &[f64], pred: &[f64], k_bins: usize) -> Result<f64> {
    match binned_pair(gt, pred, k_bins)? {
        Some((p, q)) => tvd_discrete(&p, &q),
        None => Ok(0.0),
    }
}

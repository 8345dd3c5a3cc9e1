//! Participant-level bootstrap for the difference in TVD between two conditions.
//!
//! Each iteration resamples participants with replacement, keeping every
//! participant's answers and predictions together. For each question the TVD
//! between the ground truth and each condition is recomputed over the resampled
//! participants who answered it, and Δ is the mean over questions of
//! `TVD_A − TVD_B`. The interval is the percentile interval of the Δ draws.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::AnswerValue;
use crate::error::{Error, Result};
use crate::metrics::{bin_edges, bin_index};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub confidence: f64,
    pub seed: u64,
    /// Bins for numeric questions.
    pub k_bins: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { iterations: 5000, confidence: 0.95, seed: 0, k_bins: 50 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("bootstrap needs at least one iteration".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if self.k_bins == 0 {
            return Err(Error::Config("k_bins must be positive".into()));
        }
        Ok(())
    }
}

/// One participant's truth and the two conditions' predictions for a question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelCell {
    pub truth: AnswerValue,
    pub a: Option<AnswerValue>,
    pub b: Option<AnswerValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelQuestion {
    pub code: String,
    pub numeric: bool,
}

/// Participants × questions; `cells[p][q]` is `None` when participant `p`
/// has no ground truth for question `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub questions: Vec<PanelQuestion>,
    pub participants: Vec<String>,
    pub cells: Vec<Vec<Option<PanelCell>>>,
}

/// Question data encoded for fast resampled TVD.
enum Encoded {
    /// Label indices; missing answers are ordinary categories.
    Categorical { n_labels: usize, truth: Vec<Option<u32>>, a: Vec<Option<u32>>, b: Vec<Option<u32>> },
    /// NaN marks an unusable value; pairs are dropped per condition.
    Numeric { truth: Vec<f64>, a: Vec<f64>, b: Vec<f64> },
}

fn encode(panel: &Panel, q: usize) -> Encoded {
    let col = panel.cells.iter().map(|row| row[q].as_ref());
    if panel.questions[q].numeric {
        let num = |v: Option<&AnswerValue>| v.and_then(AnswerValue::as_numeric).unwrap_or(f64::NAN);
        let (mut truth, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for c in col {
            truth.push(num(c.map(|c| &c.truth)));
            a.push(num(c.and_then(|c| c.a.as_ref())));
            b.push(num(c.and_then(|c| c.b.as_ref())));
        }
        Encoded::Numeric { truth, a, b }
    } else {
        let mut labels: BTreeMap<String, u32> = BTreeMap::new();
        let mut idx = |v: Option<&AnswerValue>| {
            v.map(|v| {
                let n = labels.len() as u32;
                *labels.entry(v.category_label()).or_insert(n)
            })
        };
        let (mut truth, mut a, mut b) = (Vec::new(), Vec::new(), Vec::new());
        for c in col {
            truth.push(idx(c.map(|c| &c.truth)));
            a.push(idx(c.and_then(|c| c.a.as_ref())));
            b.push(idx(c.and_then(|c| c.b.as_ref())));
        }
        Encoded::Categorical { n_labels: labels.len(), truth, a, b }
    }
}

fn categorical_tvd(n_labels: usize, truth: &[Option<u32>], pred: &[Option<u32>], sample: &[usize]) -> Option<f64> {
    let mut ct = vec![0u32; n_labels];
    let mut cp = vec![0u32; n_labels];
    let mut n = 0u32;
    for &i in sample {
        if let (Some(t), Some(p)) = (truth[i], pred[i]) {
            ct[t as usize] += 1;
            cp[p as usize] += 1;
            n += 1;
        }
    }
    (n > 0).then(|| {
        let n = n as f64;
        0.5 * ct.iter().zip(&cp).map(|(a, b)| (*a as f64 / n - *b as f64 / n).abs()).sum::<f64>()
    })
}

fn numeric_tvd(truth: &[f64], pred: &[f64], sample: &[usize], k: usize) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = sample
        .iter()
        .map(|&i| (truth[i], pred[i]))
        .filter(|(t, p)| t.is_finite() && p.is_finite())
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let (lo, hi) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (t, p)| {
        (lo.min(*t).min(*p), hi.max(*t).max(*p))
    });
    if hi == lo {
        return Some(0.0);
    }
    let edges = bin_edges(lo, hi, k);
    let mut ct = vec![0u32; k];
    let mut cp = vec![0u32; k];
    for (t, p) in &pairs {
        ct[bin_index(*t, &edges)] += 1;
        cp[bin_index(*p, &edges)] += 1;
    }
    let n = pairs.len() as f64;
    Some(0.5 * ct.iter().zip(&cp).map(|(a, b)| (*a as f64 / n - *b as f64 / n).abs()).sum::<f64>())
}

impl Encoded {
    fn tvds(&self, sample: &[usize], k: usize) -> Option<(f64, f64)> {
        match self {
            Encoded::Categorical { n_labels, truth, a, b } => Some((
                categorical_tvd(*n_labels, truth, a, sample)?,
                categorical_tvd(*n_labels, truth, b, sample)?,
            )),
            Encoded::Numeric { truth, a, b } => {
                Some((numeric_tvd(truth, a, sample, k)?, numeric_tvd(truth, b, sample, k)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionDelta {
    pub tvd_a: f64,
    pub tvd_b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub participants: usize,
    pub questions: usize,
    /// Mean of the bootstrap Δ draws.
    pub mean_delta_tvd: f64,
    /// Δ on the original sample.
    pub observed_delta: f64,
    pub mean_tvd_a: f64,
    pub mean_tvd_b: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
    pub per_question_delta: BTreeMap<String, QuestionDelta>,
    pub significant: bool,
    /// Smallest two-sided level at which the percentile interval excludes zero.
    pub achieved_level: f64,
    pub iterations_used: usize,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_delta(encoded: &[Encoded], sample: &[usize], k: usize) -> Option<(f64, f64, f64)> {
    let mut sa = 0.0;
    let mut sb = 0.0;
    let mut m = 0usize;
    for e in encoded {
        if let Some((a, b)) = e.tvds(sample, k) {
            sa += a;
            sb += b;
            m += 1;
        }
    }
    (m > 0).then(|| (sa / m as f64, sb / m as f64, (sa - sb) / m as f64))
}

pub fn participant_bootstrap(panel: &Panel, config: &BootstrapConfig) -> Result<BootstrapResult> {
    config.validate()?;
    let n = panel.participants.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("bootstrap needs 2 participants, got {n}")));
    }
    if panel.cells.len() != n || panel.cells.iter().any(|r| r.len() != panel.questions.len()) {
        return Err(Error::Validation("panel cells do not match participants × questions".into()));
    }
    for (q, question) in panel.questions.iter().enumerate() {
        let cells = || panel.cells.iter().filter_map(|r| r[q].as_ref());
        let has_a = cells().any(|c| c.a.is_some());
        let has_b = cells().any(|c| c.b.is_some());
        if !(has_a && has_b) {
            return Err(Error::Coverage(format!(
                "question `{}` lacks predictions for condition {}",
                question.code,
                if has_a { "B" } else { "A" }
            )));
        }
    }
    let encoded: Vec<Encoded> = (0..panel.questions.len()).map(|q| encode(panel, q)).collect();
    let k = config.k_bins;

    let all: Vec<usize> = (0..n).collect();
    let mut per_question_delta = BTreeMap::new();
    for (q, e) in encoded.iter().enumerate() {
        if let Some((a, b)) = e.tvds(&all, k) {
            per_question_delta.insert(
                panel.questions[q].code.clone(),
                QuestionDelta { tvd_a: a, tvd_b: b, delta: a - b },
            );
        }
    }
    let (mean_tvd_a, mean_tvd_b, observed_delta) = mean_delta(&encoded, &all, k)
        .ok_or_else(|| Error::InsufficientData("no question has usable answer pairs".into()))?;

    let draws: Vec<Option<f64>> = (0..config.iterations)
        .into_par_iter()
        .map(|it| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[it as u64]));
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            mean_delta(&encoded, &sample, k).map(|(_, _, d)| d)
        })
        .collect();
    let mut deltas: Vec<f64> = draws.into_iter().flatten().collect();
    if deltas.is_empty() {
        return Err(Error::InsufficientData("no bootstrap iteration had usable data".into()));
    }
    let mean_delta_tvd = deltas.iter().sum::<f64>() / deltas.len() as f64;
    deltas.sort_by(f64::total_cmp);
    let alpha = 1.0 - config.confidence;
    let ci_low = quantile_sorted(&deltas, alpha / 2.0);
    let ci_high = quantile_sorted(&deltas, 1.0 - alpha / 2.0);
    let m = deltas.len() as f64;
    let below = deltas.iter().filter(|d| **d <= 0.0).count() as f64 / m;
    let above = deltas.iter().filter(|d| **d >= 0.0).count() as f64 / m;
    Ok(BootstrapResult {
        participants: n,
        questions: panel.questions.len(),
        mean_delta_tvd,
        observed_delta,
        mean_tvd_a,
        mean_tvd_b,
        ci_low,
        ci_high,
        confidence: config.confidence,
        per_question_delta,
        significant: ci_low > 0.0 || ci_high < 0.0,
        achieved_level: (2.0 * below.min(above)).min(1.0),
        iterations_used: deltas.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(s: &str) -> AnswerValue {
        AnswerValue::Categorical(s.into())
    }

    fn panel(a_equals_b: bool) -> Panel {
        let labels = ["x", "y", "z"];
        let cells = (0..30)
            .map(|i| {
                let t = labels[i % 3];
                let p = labels[(i / 2) % 3];
                vec![Some(PanelCell {
                    truth: cat(t),
                    a: Some(cat(p)),
                    b: Some(cat(if a_equals_b { p } else { t })),
                })]
            })
            .collect();
        Panel {
            questions: vec![PanelQuestion { code: "Q".into(), numeric: false }],
            participants: (0..30).map(|i| format!("p{i}")).collect(),
            cells,
        }
    }

    #[test]
    fn identical_conditions_are_null() {
        let r = participant_bootstrap(&panel(true), &BootstrapConfig { iterations: 200, ..Default::default() }).unwrap();
        assert_eq!(r.mean_delta_tvd, 0.0);
        assert!(r.ci_low <= 0.0 && r.ci_high >= 0.0);
        assert!(!r.significant);
    }

    #[test]
    fn missing_condition_is_coverage_error() {
        let mut p = panel(false);
        for row in &mut p.cells {
            row[0].as_mut().unwrap().b = None;
        }
        assert!(matches!(participant_bootstrap(&p, &BootstrapConfig::default()), Err(Error::Coverage(m)) if m.contains('Q')));
    }

    #[test]
    fn quantile_interpolates() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 0.125), 0.5);
    }
}

//! Deterministic simulated respondents.
//!
//! Each policy turns `(profile, target, truth, seed)` into raw text in the same
//! format a live model would use for the target's response mode, so the normal
//! parser reads it back. Continuous-mode numbers are written on the 0-100 scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::agent::{AgentProfile, ResponseMode, TargetQuestion};
use crate::corpus::{format_number, AnswerValue, ItemKind};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stable_hash};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum MockPolicy {
    /// Repeats the respondent's true answer.
    EchoTruth,
    /// Numeric: normal around `mean` (item units) with sd `dispersion`, clipped.
    /// Categorical: option at 1-based position `p` has weight
    /// `exp(-(p - mean)^2 / (2 dispersion^2))`.
    CentralTendency { mean: f64, dispersion: f64 },
    /// `correct` with probability `accuracy`, otherwise a uniformly chosen other option.
    HyperAccurate { correct: String, accuracy: f64 },
    UniformRandom,
    FixedLabel { label: String },
    /// `mean + dispersion * (loading * z + sqrt(1 - loading^2) * e)`, where `z`
    /// is a standard normal fixed per (respondent, factor, salt) and `e` is fresh
    /// noise. Items sharing a factor are correlated across respondents.
    /// Categorical items round to the nearest 1-based option position.
    Latent {
        factor: String,
        loading: f64,
        mean: f64,
        dispersion: f64,
        #[serde(default)]
        salt: u64,
    },
}

impl MockPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self {
            MockPolicy::CentralTendency { dispersion, mean } => {
                if !(dispersion.is_finite() && *dispersion > 0.0 && mean.is_finite()) {
                    return bad(format!("central tendency needs finite mean and dispersion > 0, got {mean}, {dispersion}"));
                }
            }
            MockPolicy::HyperAccurate { accuracy, .. } => {
                if !(0.0..=1.0).contains(accuracy) {
                    return bad(format!("accuracy {accuracy} outside [0, 1]"));
                }
            }
            MockPolicy::Latent { loading, dispersion, .. } => {
                if !(-1.0..=1.0).contains(loading) || !(*dispersion >= 0.0) {
                    return bad(format!("latent policy needs |loading| <= 1 and dispersion >= 0, got {loading}, {dispersion}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn needs_truth(&self) -> bool {
        matches!(self, MockPolicy::EchoTruth)
    }
}

/// Renders a numeric value in the target's response format.
fn numeric_text(target: &TargetQuestion, v: f64) -> String {
    let (min, max) = target.item.range().expect("numeric item");
    let shown = match target.response_mode {
        ResponseMode::Continuous0To100 => (v - min) / (max - min) * 100.0,
        ResponseMode::DiscreteOptions => v,
    };
    format_number((shown * 1e6).round() / 1e6)
}

fn latent_z(profile: &AgentProfile, factor: &str, salt: u64) -> f64 {
    let seed = derive_seed(
        salt,
        &[stable_hash(&profile.respondent_id), stable_hash(factor)],
    );
    StandardNormal.sample(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn simulate_mock(
    profile: &AgentProfile,
    target: &TargetQuestion,
    policy: &MockPolicy,
    truth: Option<&AnswerValue>,
    seed: u64,
) -> Result<String> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let item = &target.item;
    match (policy, &item.kind) {
        (MockPolicy::EchoTruth, _) => {
            let truth = truth.ok_or_else(|| {
                Error::Config(format!("echo policy needs the true answer for `{}`", item.code))
            })?;
            Ok(match truth {
                AnswerValue::Numeric(v) if item.is_numeric() => numeric_text(target, *v),
                other => other.category_label(),
            })
        }
        (MockPolicy::CentralTendency { mean, dispersion }, ItemKind::Numeric { min, max }) => {
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(numeric_text(target, (mean + dispersion * z).clamp(*min, *max)))
        }
        (MockPolicy::CentralTendency { mean, dispersion }, ItemKind::Categorical { options }) => {
            let weights: Vec<f64> = (1..=options.len())
                .map(|p| (-(p as f64 - mean).powi(2) / (2.0 * dispersion * dispersion)).exp())
                .collect();
            Ok(options[weighted_index(&weights, &mut rng)].clone())
        }
        (MockPolicy::HyperAccurate { correct, accuracy }, kind) => {
            let hit = rng.random::<f64>() < *accuracy;
            match kind {
                ItemKind::Categorical { options } => {
                    if !options.contains(correct) {
                        return Err(Error::Config(format!(
                            "`{correct}` is not an option of `{}`",
                            item.code
                        )));
                    }
                    if hit || options.len() == 1 {
                        return Ok(correct.clone());
                    }
                    let others: Vec<&String> = options.iter().filter(|o| *o != correct).collect();
                    Ok(others[rng.random_range(0..others.len())].clone())
                }
                ItemKind::Numeric { min, max } => {
                    let value: f64 = correct.trim().parse().map_err(|_| {
                        Error::Config(format!("`{correct}` is not a number for `{}`", item.code))
                    })?;
                    let v = if hit { value } else { rng.random_range(*min..=*max) };
                    Ok(numeric_text(target, v))
                }
            }
        }
        (MockPolicy::UniformRandom, ItemKind::Categorical { options }) => {
            Ok(options[rng.random_range(0..options.len())].clone())
        }
        (MockPolicy::UniformRandom, ItemKind::Numeric { min, max }) => {
            Ok(numeric_text(target, rng.random_range(*min..=*max)))
        }
        (MockPolicy::FixedLabel { label }, _) => Ok(label.clone()),
        (
            MockPolicy::Latent { factor, loading, mean, dispersion, salt },
            kind,
        ) => {
            let z = latent_z(profile, factor, *salt);
            let e: f64 = StandardNormal.sample(&mut rng);
            let score = mean + dispersion * (loading * z + (1.0 - loading * loading).max(0.0).sqrt() * e);
            match kind {
                ItemKind::Numeric { min, max } => Ok(numeric_text(target, score.clamp(*min, *max))),
                ItemKind::Categorical { options } => {
                    let pos = score.round().clamp(1.0, options.len() as f64) as usize;
                    Ok(options[pos - 1].clone())
                }
            }
        }
    }
}

fn weighted_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

//! Population filtering and demographic-matched sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RespondentRecord, SurveyCorpus};
use crate::error::{Error, Result};

/// Keeps respondents whose country is in `countries` (empty set = any country)
/// and whose age lies in the inclusive `age_range`.
pub fn filter_population(
    corpus: &SurveyCorpus,
    countries: &BTreeSet<String>,
    age_range: Option<(u32, u32)>,
) -> SurveyCorpus {
    let kept = corpus
        .respondents()
        .iter()
        .filter(|r| countries.is_empty() || countries.contains(&r.country))
        .filter(|r| age_range.is_none_or(|(lo, hi)| (lo..=hi).contains(&r.age)))
        .cloned()
        .collect();
    corpus.with_respondents(kept)
}

/// How a respondent is assigned to a stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratumKey {
    Country,
    /// The answer's category label for this item; absent answers have no stratum.
    Item(String),
    /// Inclusive age bands, labelled `lo-hi`.
    AgeBands(Vec<(u32, u32)>),
    /// Cross-classification, labels joined with `|`.
    Joint(Vec<StratumKey>),
}

impl StratumKey {
    pub fn label(&self, record: &RespondentRecord) -> Option<String> {
        match self {
            StratumKey::Country => Some(record.country.clone()),
            StratumKey::Item(code) => record.answer(code).map(|a| a.category_label()),
            StratumKey::AgeBands(bands) => bands
                .iter()
                .find(|(lo, hi)| (*lo..=*hi).contains(&record.age))
                .map(|(lo, hi)| format!("{lo}-{hi}")),
            StratumKey::Joint(keys) => {
                let parts: Option<Vec<String>> = keys.iter().map(|k| k.label(record)).collect();
                parts.map(|p| p.join("|"))
            }
        }
    }
}

/// Exact per-stratum counts, optionally restricted to an inclusive age range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumTargets {
    pub key: StratumKey,
    pub counts: BTreeMap<String, usize>,
    #[serde(default)]
    pub age_range: Option<(u32, u32)>,
}

impl StratumTargets {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Draws exactly `targets.counts[s]` respondents from each stratum `s`.
/// Output keeps corpus order; the choice within a stratum depends only on `seed`.
pub fn stratified_match(
    corpus: &SurveyCorpus,
    targets: &StratumTargets,
    n: usize,
    seed: u64,
) -> Result<SurveyCorpus> {
    if targets.total() != n {
        return Err(Error::Config(format!(
            "stratum targets sum to {} but n = {n}",
            targets.total()
        )));
    }
    let mut pools: BTreeMap<&str, Vec<usize>> =
        targets.counts.keys().map(|k| (k.as_str(), Vec::new())).collect();
    for (i, r) in corpus.respondents().iter().enumerate() {
        if let Some((lo, hi)) = targets.age_range {
            if !(lo..=hi).contains(&r.age) {
                continue;
            }
        }
        if let Some(label) = targets.key.label(r) {
            if let Some(pool) = pools.get_mut(label.as_str()) {
                pool.push(i);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n);
    for (stratum, mut pool) in pools {
        let needed = targets.counts[stratum];
        if pool.len() < needed {
            return Err(Error::StratumShortage {
                stratum: stratum.to_string(),
                needed,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        chosen.extend_from_slice(&pool[..needed]);
    }
    chosen.sort_unstable();
    let picked = chosen
        .into_iter()
        .map(|i| corpus.respondents()[i].clone())
        .collect();
    Ok(corpus.with_respondents(picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerValue, Instrument, SurveyItem};

    fn corpus() -> SurveyCorpus {
        let inst = Instrument::new(vec![SurveyItem::categorical(
            "G",
            "Sex",
            &["Male", "Female"],
        )])
        .unwrap();
        let rs = (0..40)
            .map(|i| RespondentRecord {
                respondent_id: format!("r{i}"),
                country: if i % 3 == 0 { "Germany" } else { "France" }.into(),
                age: 20 + i as u32,
                answers: [(
                    "G".to_string(),
                    AnswerValue::Categorical(if i % 2 == 0 { "Male" } else { "Female" }.into()),
                )]
                .into(),
            })
            .collect();
        SurveyCorpus::new(inst, rs, "test").unwrap()
    }

    #[test]
    fn age_range_inclusive() {
        let c = filter_population(&corpus(), &BTreeSet::new(), Some((25, 45)));
        assert_eq!(c.respondents().len(), 21);
        assert!(c.respondents().iter().all(|r| (25..=45).contains(&r.age)));
    }

    #[test]
    fn targets_met_exactly() {
        let t = StratumTargets {
            key: StratumKey::Item("G".into()),
            counts: [("Male".to_string(), 12), ("Female".to_string(), 7)].into(),
            age_range: None,
        };
        let s = stratified_match(&corpus(), &t, 19, 3).unwrap();
        let males = s
            .respondents()
            .iter()
            .filter(|r| r.answer("G").unwrap().as_label() == Some("Male"))
            .count();
        assert_eq!((males, s.respondents().len()), (12, 19));
    }

    #[test]
    fn shortage_names_stratum() {
        let t = StratumTargets {
            key: StratumKey::Item("G".into()),
            counts: [("Male".to_string(), 30)].into(),
            age_range: None,
        };
        match stratified_match(&corpus(), &t, 30, 1) {
            Err(Error::StratumShortage { stratum, available, .. }) => {
                assert_eq!((stratum.as_str(), available), ("Male", 20))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn joint_labels() {
        let key = StratumKey::Joint(vec![
            StratumKey::AgeBands(vec![(20, 39), (40, 59)]),
            StratumKey::Item("G".into()),
        ]);
        let c = corpus();
        assert_eq!(key.label(&c.respondents()[0]).as_deref(), Some("20-39|Male"));
    }
}

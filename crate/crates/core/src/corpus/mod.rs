//! Survey instruments, respondent records and external reference distributions.
//!
//! A [`SurveyCorpus`] is immutable once constructed: every answer has been
//! type-checked against its owning [`SurveyItem`], respondent ids are unique
//! and item codes resolve. Loading lives in [`io`], population selection in
//! [`sample`] and demographic extraction in [`demographics`].

pub mod demographics;
pub mod io;
pub mod sample;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use demographics::{extract_demographics, DemographicItems, DemographicVariant};
pub use io::{
    load_corpus, load_instrument, load_references, parse_instrument, parse_references,
    parse_respondents, write_instrument, write_respondents, CorpusFormat, IngestOptions,
};
pub use sample::{filter_population, stratified_match, StratumKey, StratumTargets};

/// Reason an answer carries no substantive value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingReason {
    Refusal,
    DontKnow,
    NotApplicable,
    Unparseable,
}

impl MissingReason {
    pub const ALL: [MissingReason; 4] = [
        MissingReason::Refusal,
        MissingReason::DontKnow,
        MissingReason::NotApplicable,
        MissingReason::Unparseable,
    ];

    /// Canonical text used when the reason is rendered or counted as a category.
    pub fn label(self) -> &'static str {
        match self {
            MissingReason::Refusal => "Refusal",
            MissingReason::DontKnow => "Don't know",
            MissingReason::NotApplicable => "Not applicable",
            MissingReason::Unparseable => "Unparseable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerValue {
    Categorical(String),
    Numeric(f64),
    Missing(MissingReason),
}

impl AnswerValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AnswerValue::Missing(_))
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            AnswerValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            AnswerValue::Categorical(l) => Some(l),
            _ => None,
        }
    }

    /// Text shown to a model and used as the category key in frequency tables.
    /// Missing answers map to their reason label.
    pub fn category_label(&self) -> String {
        match self {
            AnswerValue::Categorical(l) => l.clone(),
            AnswerValue::Numeric(v) => format_number(*v),
            AnswerValue::Missing(r) => r.label().to_string(),
        }
    }
}

/// Shortest round-trip representation, without a trailing `.0` for integers.
pub fn format_number(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemKind {
    Categorical { options: Vec<String> },
    Numeric { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyItem {
    pub code: String,
    pub question_text: String,
    pub kind: ItemKind,
    #[serde(default)]
    pub section: String,
    #[serde(default)]
    pub reverse_coded: bool,
}

impl SurveyItem {
    pub fn categorical(code: &str, text: &str, options: &[&str]) -> Self {
        SurveyItem {
            code: code.to_string(),
            question_text: text.to_string(),
            kind: ItemKind::Categorical {
                options: options.iter().map(|s| s.to_string()).collect(),
            },
            section: String::new(),
            reverse_coded: false,
        }
    }

    pub fn numeric(code: &str, text: &str, min: f64, max: f64) -> Self {
        SurveyItem {
            code: code.to_string(),
            question_text: text.to_string(),
            kind: ItemKind::Numeric { min, max },
            section: String::new(),
            reverse_coded: false,
        }
    }

    pub fn with_section(mut self, section: &str) -> Self {
        self.section = section.to_string();
        self
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, ItemKind::Numeric { .. })
    }

    pub fn options(&self) -> Option<&[String]> {
        match &self.kind {
            ItemKind::Categorical { options } => Some(options),
            ItemKind::Numeric { .. } => None,
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        match self.kind {
            ItemKind::Numeric { min, max } => Some((min, max)),
            ItemKind::Categorical { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.code.trim().is_empty() {
            return Err(Error::Integrity("item with empty code".into()));
        }
        match &self.kind {
            ItemKind::Categorical { options } => {
                if options.len() < 2 {
                    return Err(Error::Integrity(format!(
                        "categorical item `{}` needs at least 2 options",
                        self.code
                    )));
                }
                let mut seen = std::collections::BTreeSet::new();
                for o in options {
                    if !seen.insert(o.as_str()) {
                        return Err(Error::Integrity(format!(
                            "item `{}` repeats option `{o}`",
                            self.code
                        )));
                    }
                }
            }
            ItemKind::Numeric { min, max } => {
                if !(min.is_finite() && max.is_finite() && min < max) {
                    return Err(Error::Integrity(format!(
                        "numeric item `{}` needs finite min < max (got {min}, {max})",
                        self.code
                    )));
                }
            }
        }
        Ok(())
    }

    /// Type-checks an answer against this item.
    pub fn check(&self, value: &AnswerValue) -> Result<()> {
        match (&self.kind, value) {
            (_, AnswerValue::Missing(_)) => Ok(()),
            (ItemKind::Categorical { options }, AnswerValue::Categorical(l)) => {
                if options.iter().any(|o| o == l) {
                    Ok(())
                } else {
                    Err(Error::Integrity(format!(
                        "item `{}`: `{l}` is not one of its options",
                        self.code
                    )))
                }
            }
            (ItemKind::Numeric { min, max }, AnswerValue::Numeric(v)) => {
                if v.is_finite() && *v >= *min && *v <= *max {
                    Ok(())
                } else {
                    Err(Error::Integrity(format!(
                        "item `{}`: {v} lies outside [{min}, {max}]",
                        self.code
                    )))
                }
            }
            (ItemKind::Categorical { .. }, AnswerValue::Numeric(v)) => Err(Error::Integrity(
                format!("item `{}` is categorical but got number {v}", self.code),
            )),
            (ItemKind::Numeric { .. }, AnswerValue::Categorical(l)) => Err(Error::Integrity(
                format!("item `{}` is numeric but got `{l}`", self.code),
            )),
        }
    }
}

/// Ordered collection of items with unique codes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Instrument {
    items: Vec<SurveyItem>,
    index: HashMap<String, usize>,
}

impl Instrument {
    pub fn new(items: Vec<SurveyItem>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            item.validate()?;
            if index.insert(item.code.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate item code `{}`", item.code)));
            }
        }
        Ok(Instrument { items, index })
    }

    pub fn items(&self) -> &[SurveyItem] {
        &self.items
    }

    pub fn get(&self, code: &str) -> Option<&SurveyItem> {
        self.index.get(code).map(|&i| &self.items[i])
    }

    pub fn position(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentRecord {
    pub respondent_id: String,
    pub country: String,
    pub age: u32,
    pub answers: BTreeMap<String, AnswerValue>,
}

impl RespondentRecord {
    pub fn answer(&self, code: &str) -> Option<&AnswerValue> {
        self.answers.get(code)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyCorpus {
    instrument: Instrument,
    respondents: Vec<RespondentRecord>,
    provenance: String,
}

impl SurveyCorpus {
    pub fn new(
        instrument: Instrument,
        respondents: Vec<RespondentRecord>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut ids = std::collections::HashSet::with_capacity(respondents.len());
        let mut unknown = std::collections::BTreeSet::new();
        for r in &respondents {
            if !ids.insert(r.respondent_id.as_str()) {
                return Err(Error::DuplicateRespondent(r.respondent_id.clone()));
            }
            for (code, value) in &r.answers {
                match instrument.get(code) {
                    Some(item) => item.check(value).map_err(|e| match e {
                        Error::Integrity(m) => {
                            Error::Integrity(format!("respondent `{}`: {m}", r.respondent_id))
                        }
                        other => other,
                    })?,
                    None => {
                        unknown.insert(code.clone());
                    }
                }
            }
        }
        if !unknown.is_empty() {
            return Err(Error::UnknownItems {
                codes: unknown.into_iter().collect(),
            });
        }
        Ok(SurveyCorpus {
            instrument,
            respondents,
            provenance: provenance.into(),
        })
    }

    pub fn instrument(&self) -> &Instrument {
        &self.instrument
    }

    pub fn respondents(&self) -> &[RespondentRecord] {
        &self.respondents
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn respondent(&self, id: &str) -> Option<&RespondentRecord> {
        self.respondents.iter().find(|r| r.respondent_id == id)
    }

    /// Same instrument and provenance, a different respondent subset.
    pub fn with_respondents(&self, respondents: Vec<RespondentRecord>) -> SurveyCorpus {
        SurveyCorpus {
            instrument: self.instrument.clone(),
            respondents,
            provenance: self.provenance.clone(),
        }
    }
}

/// Population proportions for one item within one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub item_code: String,
    pub stratum: String,
    /// Option label to proportion, in file order.
    pub frequencies: Vec<(String, f64)>,
}

impl ReferenceDistribution {
    pub fn new(item_code: &str, stratum: &str, frequencies: Vec<(String, f64)>) -> Result<Self> {
        let mut sum = 0.0;
        for (label, p) in &frequencies {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::Validation(format!(
                    "reference {item_code}/{stratum}: proportion {p} for `{label}` outside [0,1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "reference {item_code}/{stratum}: proportions sum to {sum}, expected 1"
            )));
        }
        Ok(ReferenceDistribution {
            item_code: item_code.to_string(),
            stratum: stratum.to_string(),
            frequencies,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.frequencies.iter().map(|(l, _)| l.as_str())
    }
}

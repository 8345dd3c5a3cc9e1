//! Demographic attribute extraction for demographic-only agent contexts.

use serde::{Deserialize, Serialize};

use super::{Instrument, RespondentRecord};
use crate::error::{Error, Result};

/// Question texts used for the two attributes stored as record fields.
pub const COUNTRY_TEXT: &str = "Country";
pub const AGE_TEXT: &str = "Age";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DemographicVariant {
    Demo7,
    Demo3,
}

/// Item codes of the demographic attributes held in the instrument.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemographicItems {
    pub gender: String,
    pub employment: String,
    pub marital: String,
    pub income: String,
    pub education: String,
}

impl Default for DemographicItems {
    fn default() -> Self {
        DemographicItems {
            gender: "DN042".into(),
            employment: "EP005".into(),
            marital: "DN014".into(),
            income: "CO007".into(),
            education: "DN041".into(),
        }
    }
}

impl DemographicItems {
    /// Instrument codes in context order for the variant (country and age excluded).
    pub fn codes(&self, variant: DemographicVariant) -> Vec<&str> {
        match variant {
            DemographicVariant::Demo3 => vec![&self.gender],
            DemographicVariant::Demo7 => vec![
                &self.gender,
                &self.employment,
                &self.marital,
                &self.income,
                &self.education,
            ],
        }
    }
}

/// Ordered `(question_text, answer_text)` pairs: country, age, then the variant's items.
/// A required item that is absent or non-substantive makes the profile incomplete.
pub fn extract_demographics(
    record: &RespondentRecord,
    instrument: &Instrument,
    variant: DemographicVariant,
    items: &DemographicItems,
) -> Result<Vec<(String, String)>> {
    let mut pairs = vec![
        (COUNTRY_TEXT.to_string(), record.country.clone()),
        (AGE_TEXT.to_string(), record.age.to_string()),
    ];
    for code in items.codes(variant) {
        let incomplete = || Error::IncompleteProfile {
            respondent_id: record.respondent_id.clone(),
            item: code.to_string(),
        };
        let item = instrument.get(code).ok_or_else(incomplete)?;
        let answer = record
            .answer(code)
            .filter(|a| !a.is_missing())
            .ok_or_else(incomplete)?;
        pairs.push((item.question_text.clone(), answer.category_label()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerValue, MissingReason, SurveyItem};

    fn instrument() -> Instrument {
        Instrument::new(vec![
            SurveyItem::categorical("DN042", "Note sex of respondent from observation (ask if unsure)", &["Male", "Female"]),
            SurveyItem::categorical("EP005", "In general, which of the following best describes your current employment situation?", &["Retired", "Employed or self-employed", "Unemployed", "Permanently sick or disabled", "Homemaker", "Other"]),
            SurveyItem::categorical("DN014", "What is your marital status?", &["Married", "Registered partnership", "Divorced", "Widowed", "Never married"]),
            SurveyItem::categorical("CO007", "Thinking of your household's total monthly income, would you say that your household is able to make ends meet...", &["With great difficulty", "With some difficulty", "Fairly easily", "Easily"]),
            SurveyItem::numeric("DN041", "How many years have you been in full-time education?", 0.0, 30.0),
        ])
        .unwrap()
    }

    fn record() -> RespondentRecord {
        let cat = |s: &str| AnswerValue::Categorical(s.into());
        RespondentRecord {
            respondent_id: "r1".into(),
            country: "France".into(),
            age: 58,
            answers: [
                ("DN042".to_string(), cat("Female")),
                ("EP005".to_string(), cat("Retired")),
                ("DN014".to_string(), cat("Married")),
                ("CO007".to_string(), cat("Easily")),
                ("DN041".to_string(), AnswerValue::Numeric(12.0)),
            ]
            .into(),
        }
    }

    #[test]
    fn demo7_has_seven_pairs_in_order() {
        let p = extract_demographics(&record(), &instrument(), DemographicVariant::Demo7, &DemographicItems::default()).unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p[0], ("Country".into(), "France".into()));
        assert_eq!(p[1], ("Age".into(), "58".into()));
        assert_eq!(p[2].1, "Female");
        assert_eq!(p[6], ("How many years have you been in full-time education?".into(), "12".into()));
    }

    #[test]
    fn demo3_is_prefix_of_demo7() {
        let items = DemographicItems::default();
        let d7 = extract_demographics(&record(), &instrument(), DemographicVariant::Demo7, &items).unwrap();
        let d3 = extract_demographics(&record(), &instrument(), DemographicVariant::Demo3, &items).unwrap();
        assert_eq!(d3, d7[..3]);
    }

    #[test]
    fn missing_education_is_incomplete() {
        let mut r = record();
        r.answers.remove("DN041");
        let err = extract_demographics(&r, &instrument(), DemographicVariant::Demo7, &DemographicItems::default()).unwrap_err();
        assert!(matches!(err, Error::IncompleteProfile { item, .. } if item == "DN041"));
        r.answers.insert("DN041".into(), AnswerValue::Missing(MissingReason::Refusal));
        assert!(extract_demographics(&r, &instrument(), DemographicVariant::Demo7, &DemographicItems::default()).is_err());
    }
}

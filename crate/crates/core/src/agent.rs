//! Agent contexts, target questions and prompt rendering.
//!
//! Contexts are flat `"question": "answer"` lines. For survey-anchored agents the
//! country and age come first, followed by every substantive answer in instrument
//! order. Withheld and excluded items never reach the context, whatever the
//! condition.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::demographics::{AGE_TEXT, COUNTRY_TEXT};
use crate::corpus::{
    extract_demographics, format_number, DemographicItems, DemographicVariant, Instrument,
    ItemKind, RespondentRecord, SurveyItem,
};
use crate::error::{Error, Result};
use crate::gateway::GenerationConfig;

pub const SYSTEM_PROMPT: &str = "You are an expert behavioral analyst and survey researcher. Your task is to analyze a set of survey questions and the corresponding answers provided by a single respondent. Based on the patterns, tone, preferences, and reasoning evident in their responses, infer how this same person would likely answer a new, unseen question. Your predictions should be thoughtful, consistent with the respondent's previous answers, and reflect their likely perspective, values, and communication style.";

pub const BRIDGING_SENTENCE: &str = "The text above contains answers from a person to a survey of health, ageing and retirement in Europe. Analyzing those questions and answers, try to predict how this same person would answer to the following question: ";

/// Placeholder replaced by the individualized target age.
pub const AGE_PLACEHOLDER: &str = "XX";

/// Numeracy and serial-subtraction items that overlap financial-literacy targets.
pub const LEAKAGE_CODES: [&str; 10] = [
    "cf011_", "cf012_", "cf013_", "cf014_", "cf015_", "cf108_", "cf109_", "cf110_", "cf111_",
    "cf112_",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Demo7,
    Demo3,
    SurveyAnchored,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Demo7, Condition::Demo3, Condition::SurveyAnchored];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Demo7 => "Demo7",
            Condition::Demo3 => "Demo3",
            Condition::SurveyAnchored => "SurveyAnchored",
        }
    }

    fn demographic_variant(self) -> Option<DemographicVariant> {
        match self {
            Condition::Demo7 => Some(DemographicVariant::Demo7),
            Condition::Demo3 => Some(DemographicVariant::Demo3),
            Condition::SurveyAnchored => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(&s.replace(['_', '-'], "")))
            .ok_or_else(|| Error::Config(format!("unknown condition `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExclusionList {
    pub item_codes: BTreeSet<String>,
    #[serde(default)]
    pub reason: String,
}

impl ExclusionList {
    pub fn new<I, S>(codes: I, reason: &str) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ExclusionList {
            item_codes: codes.into_iter().map(Into::into).collect(),
            reason: reason.to_string(),
        }
    }

    pub fn contains(&self, code: &str) -> bool {
        self.item_codes.contains(code)
    }

    /// Every code must name an instrument item.
    pub fn validate(&self, instrument: &Instrument) -> Result<()> {
        let unknown: Vec<String> = self
            .item_codes
            .iter()
            .filter(|c| !instrument.contains(c))
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::UnknownItems { codes: unknown })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub respondent_id: String,
    pub condition: Condition,
    pub context: Vec<(String, String)>,
    pub withheld_item: Option<String>,
}

/// Builds the context for one respondent under `condition`.
///
/// `target` is the withheld instrument item, or `None` when the question comes
/// from outside the respondent's instrument.
pub fn build_profile(
    record: &RespondentRecord,
    instrument: &Instrument,
    condition: Condition,
    exclusions: &ExclusionList,
    target: Option<&str>,
    demographics: &DemographicItems,
) -> Result<AgentProfile> {
    let target_item = match target {
        Some(code) => Some(instrument.get(code).ok_or_else(|| Error::UnknownItems {
            codes: vec![code.to_string()],
        })?),
        None => None,
    };
    let blocked = |item: &SurveyItem| {
        exclusions.contains(&item.code) || target_item.is_some_and(|t| t.code == item.code)
    };

    let context = match condition.demographic_variant() {
        Some(variant) => {
            let blocked_texts: BTreeSet<&str> = instrument
                .items()
                .iter()
                .filter(|i| blocked(i))
                .map(|i| i.question_text.as_str())
                .collect();
            extract_demographics(record, instrument, variant, demographics)?
                .into_iter()
                .filter(|(q, _)| !blocked_texts.contains(q.as_str()))
                .collect()
        }
        None => {
            let mut ctx = vec![
                (COUNTRY_TEXT.to_string(), record.country.clone()),
                (AGE_TEXT.to_string(), record.age.to_string()),
            ];
            for item in instrument.items() {
                if blocked(item) {
                    continue;
                }
                if let Some(answer) = record.answer(&item.code).filter(|a| !a.is_missing()) {
                    ctx.push((item.question_text.clone(), answer.category_label()));
                }
            }
            ctx
        }
    };
    Ok(AgentProfile {
        respondent_id: record.respondent_id.clone(),
        condition,
        context,
        withheld_item: target.map(str::to_string),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResponseMode {
    #[serde(rename = "discrete_options")]
    DiscreteOptions,
    #[serde(rename = "continuous_0_100")]
    Continuous0To100,
}

/// Verbal meaning of the 0 and 100 endpoints in continuous mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleAnchors {
    pub low: String,
    pub high: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetQuestion {
    pub item: SurveyItem,
    pub rendered_text: String,
    pub response_mode: ResponseMode,
    #[serde(default)]
    pub anchors: Option<ScaleAnchors>,
}

impl TargetQuestion {
    pub fn new(item: SurveyItem, mode: ResponseMode) -> Result<Self> {
        if mode == ResponseMode::Continuous0To100 && !item.is_numeric() {
            return Err(Error::Config(format!(
                "item `{}` is categorical and cannot use the continuous 0-100 mode",
                item.code
            )));
        }
        Ok(TargetQuestion {
            rendered_text: item.question_text.clone(),
            item,
            response_mode: mode,
            anchors: None,
        })
    }

    pub fn with_anchors(mut self, low: &str, high: &str) -> Self {
        self.anchors = Some(ScaleAnchors {
            low: low.to_string(),
            high: high.to_string(),
        });
        self
    }

    /// The answer instruction appended after the question text.
    pub fn answer_format(&self) -> String {
        match (&self.item.kind, self.response_mode) {
            (ItemKind::Numeric { .. }, ResponseMode::Continuous0To100) => match &self.anchors {
                Some(a) => format!("[Answer from 0 to 100, 0 ({}) and 100 ({})]", a.low, a.high),
                None => "[Answer from 0 to 100]".to_string(),
            },
            (ItemKind::Numeric { min, max }, ResponseMode::DiscreteOptions) => {
                let grid: Vec<String> = discrete_grid(*min, *max)
                    .into_iter()
                    .map(format_number)
                    .collect();
                format!("[{}]", grid.join(","))
            }
            (ItemKind::Categorical { options }, _) => {
                let quoted: Vec<String> = options.iter().map(|o| format!("\"{o}\"")).collect();
                format!("[{}]", quoted.join(", "))
            }
        }
    }
}

/// Eleven equally spaced values from `min` to `max`.
pub fn discrete_grid(min: f64, max: f64) -> Vec<f64> {
    (0..=10)
        .map(|i| {
            let v = min + (max - min) * i as f64 / 10.0;
            (v * 1e9).round() / 1e9
        })
        .collect()
}

/// Age band (inclusive) mapped to the target age substituted into the question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeRule {
    pub min_age: u32,
    pub max_age: u32,
    pub target_age: u32,
}

/// Substitutes the rule table's target age for [`AGE_PLACEHOLDER`].
pub fn individualize_target(
    template: &TargetQuestion,
    age: u32,
    rules: &[AgeRule],
) -> Result<TargetQuestion> {
    let rule = rules
        .iter()
        .find(|r| (r.min_age..=r.max_age).contains(&age))
        .ok_or(Error::RuleGap { age })?;
    let mut q = template.clone();
    q.rendered_text = template
        .rendered_text
        .replace(AGE_PLACEHOLDER, &rule.target_age.to_string());
    Ok(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub generation: GenerationConfig,
}

impl PromptBundle {
    /// The serialized respondent context, i.e. everything before the bridging sentence.
    pub fn context_section(&self) -> &str {
        match self.user_text.find(BRIDGING_SENTENCE) {
            Some(i) => &self.user_text[..i],
            None => &self.user_text,
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{s}\"")
}

/// Renders the user message: context lines, the bridging sentence, then the target.
pub fn render_prompt(
    profile: &AgentProfile,
    target: &TargetQuestion,
    generation: &GenerationConfig,
) -> PromptBundle {
    let mut user = String::new();
    for (q, a) in &profile.context {
        user.push_str(&quote(q));
        user.push_str(": ");
        user.push_str(&quote(a));
        user.push('\n');
    }
    if !profile.context.is_empty() {
        user.push('\n');
    }
    user.push_str(BRIDGING_SENTENCE);
    user.push_str("\n\n");
    user.push_str(&target.rendered_text);
    user.push('\n');
    user.push_str(&target.answer_format());
    PromptBundle {
        system_text: SYSTEM_PROMPT.to_string(),
        user_text: user,
        generation: generation.clone(),
    }
}

/// Forbidden question texts found in a rendered context section.
pub fn leakage_violations<'a>(context_section: &str, forbidden: &[&'a str]) -> Vec<&'a str> {
    forbidden
        .iter()
        .copied()
        .filter(|t| !t.is_empty() && context_section.contains(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AnswerValue, MissingReason};

    fn instrument(n: usize) -> Instrument {
        let mut items: Vec<SurveyItem> = (0..n)
            .map(|i| SurveyItem::categorical(&format!("Q{i:02}"), &format!("Question number {i:02}?"), &["Yes", "No"]))
            .collect();
        items.push(SurveyItem::categorical("DN042", "Note sex of respondent from observation (ask if unsure)", &["Male", "Female"]));
        Instrument::new(items).unwrap()
    }

    fn record(n: usize) -> RespondentRecord {
        let mut answers: std::collections::BTreeMap<String, AnswerValue> = (0..n)
            .map(|i| (format!("Q{i:02}"), AnswerValue::Categorical("Yes".into())))
            .collect();
        answers.insert("DN042".into(), AnswerValue::Categorical("Female".into()));
        RespondentRecord { respondent_id: "r".into(), country: "France".into(), age: 58, answers }
    }

    #[test]
    fn anchored_context_arithmetic() {
        // 19 items + gender = 20 answers; one excluded, one withheld.
        let inst = instrument(19);
        let ex = ExclusionList::new(["Q03"], "overlap");
        let p = build_profile(&record(19), &inst, Condition::SurveyAnchored, &ex, Some("Q07"), &DemographicItems::default()).unwrap();
        assert_eq!(p.context.len(), 2 + 18);
        assert_eq!(p.context[0], ("Country".into(), "France".into()));
        assert_eq!(p.context[1], ("Age".into(), "58".into()));
        assert!(p.context.iter().all(|(q, _)| q != "Question number 07?" && q != "Question number 03?"));
    }

    #[test]
    fn target_in_exclusions_removed_once() {
        let inst = instrument(5);
        let both = ExclusionList::new(["Q02"], "");
        let a = build_profile(&record(5), &inst, Condition::SurveyAnchored, &both, Some("Q02"), &DemographicItems::default()).unwrap();
        let b = build_profile(&record(5), &inst, Condition::SurveyAnchored, &ExclusionList::default(), Some("Q02"), &DemographicItems::default()).unwrap();
        assert_eq!(a.context, b.context);
    }

    #[test]
    fn missing_answers_omitted() {
        let inst = instrument(3);
        let mut r = record(3);
        r.answers.insert("Q01".into(), AnswerValue::Missing(MissingReason::DontKnow));
        let p = build_profile(&r, &inst, Condition::SurveyAnchored, &ExclusionList::default(), None, &DemographicItems::default()).unwrap();
        assert_eq!(p.context.len(), 2 + 3);
    }

    #[test]
    fn empty_context_prompt() {
        let profile = AgentProfile { respondent_id: "x".into(), condition: Condition::Demo3, context: vec![], withheld_item: None };
        let t = TargetQuestion::new(SurveyItem::numeric("N", "How old?", 0.0, 100.0), ResponseMode::Continuous0To100).unwrap();
        let b = render_prompt(&profile, &t, &GenerationConfig::default());
        assert!(b.user_text.starts_with(BRIDGING_SENTENCE));
        assert_eq!(b.context_section(), "");
    }

    #[test]
    fn grid_and_anchor_formats() {
        let item = SurveyItem::numeric("FTP01", "What are the chances that you will live to age XX or more?", 0.0, 100.0);
        let d = TargetQuestion::new(item.clone(), ResponseMode::DiscreteOptions).unwrap();
        assert_eq!(d.answer_format(), "[0,10,20,30,40,50,60,70,80,90,100]");
        let c = TargetQuestion::new(item, ResponseMode::Continuous0To100)
            .unwrap()
            .with_anchors("you are certain you will not reach that age", "you are certain you will live to that age or more.");
        assert_eq!(
            c.answer_format(),
            "[Answer from 0 to 100, 0 (you are certain you will not reach that age) and 100 (you are certain you will live to that age or more.)]"
        );
    }

    #[test]
    fn continuous_requires_numeric() {
        let item = SurveyItem::categorical("C", "q", &["a", "b"]);
        assert!(TargetQuestion::new(item, ResponseMode::Continuous0To100).is_err());
    }

    #[test]
    fn age_rule_substitution() {
        let item = SurveyItem::numeric("FTP01", "What are the chances that you will live to age XX or more?", 0.0, 100.0);
        let t = TargetQuestion::new(item, ResponseMode::Continuous0To100).unwrap();
        let rules = [AgeRule { min_age: 65, max_age: 69, target_age: 80 }];
        assert!(individualize_target(&t, 67, &rules).unwrap().rendered_text.contains("age 80"));
        assert!(matches!(individualize_target(&t, 50, &rules), Err(Error::RuleGap { age: 50 })));
    }
}

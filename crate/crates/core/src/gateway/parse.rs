//! Extraction of a typed answer from free model text.
//!
//! Rules, applied in order:
//! 1. Remove every `open … close` thinking segment; an unclosed segment runs to the end.
//! 2. Discrete mode, categorical item: the last option label (or missing-answer
//!    label) occurring as a whole-word phrase after lowercasing and replacing
//!    punctuation with spaces. Ties on end position go to the longer label.
//! 3. Discrete mode, numeric item: the last number, clipped to the item range.
//! 4. Continuous mode: the last number, clipped to [0, 100], then mapped linearly
//!    onto the item range.
//!
//! A number written as a scale denominator (`out of 100`, `/100`) is not an
//! answer and is skipped. A leading `-` counts as a sign only when it does not
//! follow a letter or digit, so `5-10` reads as two positive numbers.
//!
//! Anything else yields `Missing(Unparseable)`.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::agent::ResponseMode;
use crate::corpus::{AnswerValue, ItemKind, MissingReason, SurveyItem};

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"-?\d+(?:\.\d+)?").expect("number pattern compiles"));
static DENOMINATOR_PREFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?:\bout\s+of|/)\s*$").expect("prefix pattern compiles"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseConfig {
    pub think_open: String,
    pub think_close: String,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            think_open: "<think>".into(),
            think_close: "</think>".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub value: AnswerValue,
    /// A number was found but fell outside the admissible range.
    pub clipped: bool,
}

pub fn strip_thinking(raw: &str, cfg: &ParseConfig) -> String {
    if cfg.think_open.is_empty() {
        return raw.to_string();
    }
    let mut out = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(start) = rest.find(&cfg.think_open) {
        out.push_str(&rest[..start]);
        let after = &rest[start + cfg.think_open.len()..];
        match after.find(&cfg.think_close) {
            Some(end) if !cfg.think_close.is_empty() => {
                rest = &after[end + cfg.think_close.len()..];
            }
            _ => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Lowercase, punctuation to spaces, single-spaced, padded with one space each side.
fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(' ');
    let mut last_space = true;
    for ch in s.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            out.push(ch);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

fn last_label_match(text: &str, options: &[String]) -> Option<AnswerValue> {
    let hay = normalize(text);
    let mut best: Option<(usize, usize, AnswerValue)> = None;
    let candidates = options
        .iter()
        .map(|o| (o.as_str(), AnswerValue::Categorical(o.clone())))
        .chain(
            MissingReason::ALL
                .iter()
                .map(|r| (r.label(), AnswerValue::Missing(*r))),
        );
    for (label, value) in candidates {
        let needle = normalize(label);
        if needle.trim().is_empty() {
            continue;
        }
        if let Some(pos) = hay.rfind(&needle) {
            let end = pos + needle.len();
            let better = match &best {
                None => true,
                Some((e, l, _)) => end > *e || (end == *e && needle.len() > *l),
            };
            if better {
                best = Some((end, needle.len(), value));
            }
        }
    }
    best.map(|(_, _, v)| v)
}

fn last_number(text: &str) -> Option<f64> {
    NUMBER
        .find_iter(text)
        .filter(|m| !DENOMINATOR_PREFIX.is_match(&text[..m.start()]))
        .last()
        .and_then(|m| {
            let mut s = m.as_str();
            let glued = text[..m.start()]
                .chars()
                .next_back()
                .is_some_and(char::is_alphanumeric);
            if glued {
                s = s.trim_start_matches('-');
            }
            s.parse::<f64>().ok()
        })
        .filter(|v| v.is_finite())
}

pub fn parse_answer_detailed(
    raw: &str,
    item: &SurveyItem,
    mode: ResponseMode,
    cfg: &ParseConfig,
) -> ParseOutcome {
    let text = strip_thinking(raw, cfg);
    let unparseable = ParseOutcome {
        value: AnswerValue::Missing(MissingReason::Unparseable),
        clipped: false,
    };
    match (&item.kind, mode) {
        (ItemKind::Categorical { options }, _) => match last_label_match(&text, options) {
            Some(value) => ParseOutcome { value, clipped: false },
            None => unparseable,
        },
        (ItemKind::Numeric { min, max }, ResponseMode::DiscreteOptions) => {
            if let Some(AnswerValue::Missing(r)) = last_label_match(&text, &[]) {
                if last_number(&text).is_none() {
                    return ParseOutcome { value: AnswerValue::Missing(r), clipped: false };
                }
            }
            match last_number(&text) {
                Some(v) => ParseOutcome {
                    value: AnswerValue::Numeric(v.clamp(*min, *max)),
                    clipped: v < *min || v > *max,
                },
                None => unparseable,
            }
        }
        (ItemKind::Numeric { min, max }, ResponseMode::Continuous0To100) => {
            if let Some(AnswerValue::Missing(r)) = last_label_match(&text, &[]) {
                if last_number(&text).is_none() {
                    return ParseOutcome { value: AnswerValue::Missing(r), clipped: false };
                }
            }
            match last_number(&text) {
                Some(v) => {
                    let c = v.clamp(0.0, 100.0);
                    let mapped = (min + c * (max - min) / 100.0).clamp(*min, *max);
                    ParseOutcome {
                        value: AnswerValue::Numeric(mapped),
                        clipped: c != v,
                    }
                }
                None => unparseable,
            }
        }
    }
}

pub fn parse_answer(raw: &str, item: &SurveyItem, mode: ResponseMode) -> AnswerValue {
    parse_answer_detailed(raw, item, mode, &ParseConfig::default()).value
}

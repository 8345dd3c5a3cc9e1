//! Likert scale scoring and the staged moderated regression built on it.

mod ols;
mod regression;
pub mod tdist;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::SurveyItem;
use crate::error::{Error, Result};

pub use ols::{ols, OlsFit};
pub use regression::{
    hierarchical_regression, simple_slopes, LevelFit, Pole, RegressionResult, RegressionRoles,
    SimpleSlopesResult, SlopeCell, TermEstimate, BETA_CONVENTION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDefinition {
    pub name: String,
    pub item_codes: Vec<String>,
    pub reverse_flags: Vec<bool>,
    pub scale_min: f64,
    pub scale_max: f64,
}

impl ScaleDefinition {
    pub fn new(name: &str, items: &[(&str, bool)], scale_min: f64, scale_max: f64) -> Result<Self> {
        let def = ScaleDefinition {
            name: name.to_string(),
            item_codes: items.iter().map(|(c, _)| c.to_string()).collect(),
            reverse_flags: items.iter().map(|(_, r)| *r).collect(),
            scale_min,
            scale_max,
        };
        def.validate()?;
        Ok(def)
    }

    pub fn validate(&self) -> Result<()> {
        if self.item_codes.len() < 2 {
            return Err(Error::Validation(format!("scale `{}` needs at least 2 items", self.name)));
        }
        if self.item_codes.len() != self.reverse_flags.len() {
            return Err(Error::Validation(format!(
                "scale `{}` has {} items but {} reverse flags",
                self.name,
                self.item_codes.len(),
                self.reverse_flags.len()
            )));
        }
        if !(self.scale_min < self.scale_max) {
            return Err(Error::Validation(format!("scale `{}` has an empty range", self.name)));
        }
        Ok(())
    }

    /// `(min + max) - raw`; an involution on the scale range.
    pub fn reverse(&self, raw: f64) -> f64 {
        self.scale_min + self.scale_max - raw
    }
}

const LIKERT: [&str; 7] = ["1", "2", "3", "4", "5", "6", "7"];

/// `(scale, [(text, reverse_coded)])` for the four retirement-planning scales.
const SCALE_TEXTS: [(&str, &[(&str, bool)]); 4] = [
    (
        "KFP",
        &[
            ("I am very knowledgeable about financial planning for retirement.", false),
            ("I know more than most people about retirement planning.", false),
            ("I am very confident in my ability to do retirement planning.", false),
            ("When I have a need for financial services, I know exactly where to obtain information on what to do.", false),
            ("I am knowledgeable about how Social Security works.", false),
            ("I am knowledgeable about how private investment plans work.", false),
        ],
    ),
    (
        "FTP",
        &[
            ("I follow the advice to save for a rainy day.", false),
            ("I enjoy thinking about how I will live years from now in the future.", false),
            ("The distant future is too uncertain to plan for.", true),
            ("The future seems very vague and uncertain to me.", true),
            ("I pretty much live on a day-to-day basis.", true),
            ("I enjoy living for the moment and not knowing what tomorrow will bring.", true),
        ],
    ),
    (
        "FRT",
        &[
            ("I am willing to risk financial losses.", false),
            ("I prefer investments that have higher returns even though they are riskier.", false),
            ("The overall growth potential of a retirement investment is more important than the level of risk of the investment.", false),
            ("I am very willing to make risky investments to ensure financial stability in retirement.", false),
            ("As a rule, I would never choose the safest investment when planning for retirement.", false),
        ],
    ),
    (
        "RS",
        &[
            ("Made meaningful contributions to a voluntary retirement savings plan.", false),
            ("Relative to my peers, I have saved a great deal for retirement.", false),
            ("Accumulated substantial savings for retirement.", false),
            ("Made a conscious effort to save for retirement.", false),
            ("Based on how I plan to live my life in retirement, I have saved accordingly.", false),
        ],
    ),
];

/// The 22 retirement-planning items, coded `<SCALE><n>`, answered on a 1-7 scale.
pub fn retirement_scale_items() -> Vec<SurveyItem> {
    SCALE_TEXTS
        .iter()
        .flat_map(|(scale, items)| {
            items.iter().enumerate().map(move |(i, (text, reverse))| {
                let mut item = SurveyItem::categorical(&format!("{scale}{}", i + 1), text, &LIKERT)
                    .with_section(scale);
                item.reverse_coded = *reverse;
                item
            })
        })
        .collect()
}

pub fn retirement_scale_definitions() -> Vec<ScaleDefinition> {
    SCALE_TEXTS
        .iter()
        .map(|(scale, items)| {
            let codes: Vec<(String, bool)> = items
                .iter()
                .enumerate()
                .map(|(i, (_, r))| (format!("{scale}{}", i + 1), *r))
                .collect();
            let refs: Vec<(&str, bool)> = codes.iter().map(|(c, r)| (c.as_str(), *r)).collect();
            ScaleDefinition::new(scale, &refs, 1.0, 7.0).expect("built-in scales are valid")
        })
        .collect()
}

/// Raw item answers, agents × items; `None` marks a missing answer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub agents: Vec<String>,
    pub items: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleScores {
    pub scales: Vec<String>,
    pub agents: Vec<String>,
    /// agents × scales; `None` where listwise deletion removed the agent from that scale.
    pub values: Vec<Vec<Option<f64>>>,
    /// Agents removed per scale for an incomplete item set.
    pub deletions: BTreeMap<String, usize>,
}

impl ScaleScores {
    pub fn scale_index(&self, name: &str) -> Option<usize> {
        self.scales.iter().position(|s| s == name)
    }

    /// Scores of every agent with a value on every named scale, one column per name.
    pub fn complete_columns(&self, names: &[&str]) -> Result<Vec<Vec<f64>>> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.scale_index(n)
                    .ok_or_else(|| Error::UnknownItems { codes: vec![n.to_string()] })
            })
            .collect::<Result<_>>()?;
        let mut cols = vec![Vec::new(); names.len()];
        for row in &self.values {
            if idx.iter().all(|&i| row[i].is_some()) {
                for (c, &i) in cols.iter_mut().zip(&idx) {
                    c.push(row[i].expect("checked above"));
                }
            }
        }
        Ok(cols)
    }
}

pub fn score_scales(responses: &ResponseMatrix, defs: &[ScaleDefinition]) -> Result<ScaleScores> {
    let unknown: Vec<String> = defs
        .iter()
        .flat_map(|d| d.item_codes.iter())
        .filter(|c| !responses.items.contains(c))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownItems { codes: unknown });
    }
    if responses.values.len() != responses.agents.len()
        || responses.values.iter().any(|r| r.len() != responses.items.len())
    {
        return Err(Error::Validation("response matrix shape does not match its labels".into()));
    }
    let columns: Vec<Vec<usize>> = defs
        .iter()
        .map(|d| {
            d.validate()?;
            Ok(d.item_codes
                .iter()
                .map(|c| responses.items.iter().position(|i| i == c).expect("checked above"))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut deletions: BTreeMap<String, usize> = defs.iter().map(|d| (d.name.clone(), 0)).collect();
    let mut values = Vec::with_capacity(responses.agents.len());
    for (agent, row) in responses.agents.iter().zip(&responses.values) {
        let mut scored = Vec::with_capacity(defs.len());
        for (def, cols) in defs.iter().zip(&columns) {
            let mut sum = 0.0;
            let mut complete = true;
            for ((&c, &rev), code) in cols.iter().zip(&def.reverse_flags).zip(&def.item_codes) {
                match row[c] {
                    Some(raw) => {
                        if !(def.scale_min..=def.scale_max).contains(&raw) {
                            return Err(Error::Validation(format!(
                                "agent `{agent}` item `{code}` = {raw} outside [{}, {}]",
                                def.scale_min, def.scale_max
                            )));
                        }
                        sum += if rev { def.reverse(raw) } else { raw };
                    }
                    None => complete = false,
                }
            }
            if complete {
                scored.push(Some(sum / cols.len() as f64));
            } else {
                *deletions.get_mut(&def.name).expect("seeded above") += 1;
                scored.push(None);
            }
        }
        values.push(scored);
    }
    Ok(ScaleScores {
        scales: defs.iter().map(|d| d.name.clone()).collect(),
        agents: responses.agents.clone(),
        values,
        deletions,
    })
}

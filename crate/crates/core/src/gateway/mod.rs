//! Elicitation: completion client, simulated respondents, answer parsing and
//! batch orchestration.

pub mod batch;
pub mod client;
pub mod config;
pub mod log;
pub mod mock;
pub mod parse;

use serde::{Deserialize, Serialize};

use crate::agent::Condition;
use crate::corpus::AnswerValue;

pub use batch::{
    majority, run_batch, Aggregation, Backend, BatchDiagnostics, BatchOptions, BatchOutput,
    Elicitation, ElicitationTask, FailurePolicy, LiveBackend, MockBackend, PolicyRule,
};
pub use client::LiveClient;
pub use config::{ApiFlavor, EndpointConfig, GenerationConfig};
pub use log::{parse_prediction_log, read_prediction_log, PredictionLogWriter};
pub use mock::{simulate_mock, MockPolicy};
pub use parse::{parse_answer, parse_answer_detailed, strip_thinking, ParseConfig, ParseOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// The only record of a task elicited under single aggregation.
    #[default]
    Single,
    /// One run feeding a majority vote.
    Constituent,
    /// The majority-vote result; its `run_index` equals the number of runs.
    Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub respondent_id: String,
    pub item_code: String,
    pub condition: Condition,
    pub run_index: u32,
    pub raw_text: String,
    pub parsed: AnswerValue,
    #[serde(default)]
    pub latency_ms: Option<u64>,
    #[serde(default)]
    pub kind: RecordKind,
    #[serde(default)]
    pub clipped: bool,
}

impl PredictionRecord {
    /// Records that carry the final answer of a task.
    pub fn is_final(&self) -> bool {
        matches!(self.kind, RecordKind::Single | RecordKind::Aggregate)
    }
}

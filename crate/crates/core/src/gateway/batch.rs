//! Batch elicitation over a bounded worker pool.
//!
//! Work is processed in chunks; within a chunk all `(task, run)` pairs run in
//! parallel, then records are emitted to the sink in task order. Every run draws
//! its mock randomness from a seed derived from the task seed and run index, so
//! the output never depends on scheduling.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::LiveClient;
use super::mock::{simulate_mock, MockPolicy};
use super::parse::{parse_answer_detailed, ParseConfig};
use super::{PredictionRecord, RecordKind};
use crate::agent::{AgentProfile, Condition, PromptBundle, TargetQuestion};
use crate::corpus::{AnswerValue, MissingReason, SurveyCorpus};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ElicitationTask {
    pub profile: AgentProfile,
    pub target: TargetQuestion,
    pub bundle: PromptBundle,
    /// The respondent's own answer, when the target belongs to their instrument.
    pub truth: Option<AnswerValue>,
    pub seed: u64,
}

impl ElicitationTask {
    pub fn respondent_id(&self) -> &str {
        &self.profile.respondent_id
    }

    pub fn condition(&self) -> Condition {
        self.profile.condition
    }

    pub fn item_code(&self) -> &str {
        &self.target.item.code
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Elicitation {
    pub text: String,
    pub latency_ms: Option<u64>,
}

pub trait Backend: Sync {
    fn elicit(&self, task: &ElicitationTask, run_index: u32) -> Result<Elicitation>;
}

/// Selects a policy by condition and item; the first matching rule wins.
/// An item pattern ending in `*` matches every code with that prefix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    #[serde(default)]
    pub condition: Option<Condition>,
    #[serde(default)]
    pub item: Option<String>,
    #[serde(flatten)]
    pub policy: MockPolicy,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MockBackend {
    pub rules: Vec<PolicyRule>,
}

impl MockBackend {
    pub fn uniform(policy: MockPolicy) -> Self {
        MockBackend {
            rules: vec![PolicyRule { condition: None, item: None, policy }],
        }
    }

    pub fn policy_for(&self, condition: Condition, item: &str) -> Option<&MockPolicy> {
        self.rules
            .iter()
            .find(|r| {
                r.condition.is_none_or(|c| c == condition)
                    && r.item.as_deref().is_none_or(|p| match p.strip_suffix('*') {
                        Some(prefix) => item.starts_with(prefix),
                        None => p == item,
                    })
            })
            .map(|r| &r.policy)
    }
}

impl Backend for MockBackend {
    fn elicit(&self, task: &ElicitationTask, run_index: u32) -> Result<Elicitation> {
        let policy = self
            .policy_for(task.condition(), task.item_code())
            .ok_or_else(|| {
                Error::Config(format!(
                    "no mock policy for item `{}` under {}",
                    task.item_code(),
                    task.condition()
                ))
            })?;
        let seed = derive_seed(task.seed, &[run_index as u64]);
        let text = simulate_mock(&task.profile, &task.target, policy, task.truth.as_ref(), seed)?;
        Ok(Elicitation { text, latency_ms: None })
    }
}

pub struct LiveBackend {
    pub client: LiveClient,
}

impl Backend for LiveBackend {
    fn elicit(&self, task: &ElicitationTask, _run_index: u32) -> Result<Elicitation> {
        let started = Instant::now();
        let text = self.client.complete(&task.bundle)?;
        Ok(Elicitation {
            text,
            latency_ms: Some(started.elapsed().as_millis() as u64),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Single,
    MajorityVote,
}

/// What to do when a task exhausts its transport retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Record `Missing(Unparseable)` and continue.
    #[default]
    RecordMissing,
    /// Stop; records already passed to the sink are kept.
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchOptions {
    pub runs: u32,
    pub aggregation: Aggregation,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub failure: FailurePolicy,
    pub parse: ParseConfig,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            runs: 1,
            aggregation: Aggregation::Single,
            workers: 0,
            failure: FailurePolicy::RecordMissing,
            parse: ParseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchDiagnostics {
    pub tasks: usize,
    pub elicitations: usize,
    /// Runs whose text could not be parsed (transport failures excluded).
    pub parse_failures: usize,
    pub clip_count: usize,
    pub failed_elicitations: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutput {
    pub records: Vec<PredictionRecord>,
    pub diagnostics: BatchDiagnostics,
}

impl BatchOutput {
    pub fn final_records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.records.iter().filter(|r| r.is_final())
    }
}

/// Modal value with ties resolved to the earliest first occurrence; numeric
/// items use the median of the numeric values.
pub fn majority(values: &[AnswerValue], numeric: bool) -> AnswerValue {
    if numeric {
        let mut xs: Vec<f64> = values.iter().filter_map(AnswerValue::as_numeric).collect();
        if xs.is_empty() {
            return values
                .first()
                .cloned()
                .unwrap_or(AnswerValue::Missing(MissingReason::Unparseable));
        }
        xs.sort_by(f64::total_cmp);
        let m = xs.len() / 2;
        let med = if xs.len() % 2 == 1 { xs[m] } else { (xs[m - 1] + xs[m]) / 2.0 };
        return AnswerValue::Numeric(med);
    }
    let mut tally: Vec<(&AnswerValue, usize)> = Vec::new();
    for v in values {
        match tally.iter_mut().find(|(u, _)| *u == v) {
            Some((_, c)) => *c += 1,
            None => tally.push((v, 1)),
        }
    }
    let mut best: Option<(&AnswerValue, usize)> = None;
    for (v, c) in tally {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v.clone())
        .unwrap_or(AnswerValue::Missing(MissingReason::Unparseable))
}

fn validate(corpus: &SurveyCorpus, tasks: &[ElicitationTask], opts: &BatchOptions) -> Result<()> {
    if opts.runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    if opts.aggregation == Aggregation::MajorityVote && opts.runs.is_multiple_of(2) {
        if let Some(t) = tasks.iter().find(|t| !t.target.item.is_numeric()) {
            return Err(Error::Config(format!(
                "majority vote over categorical item `{}` needs an odd number of runs, got {}",
                t.item_code(),
                opts.runs
            )));
        }
    }
    let known: HashSet<&str> = corpus
        .respondents()
        .iter()
        .map(|r| r.respondent_id.as_str())
        .collect();
    if let Some(t) = tasks.iter().find(|t| !known.contains(t.respondent_id())) {
        return Err(Error::Integrity(format!(
            "work list references unknown respondent `{}`",
            t.respondent_id()
        )));
    }
    Ok(())
}

/// Elicits every task `opts.runs` times. Records reach `sink` in task order as
/// soon as their chunk completes; the same records are returned.
pub fn run_batch(
    corpus: &SurveyCorpus,
    tasks: &[ElicitationTask],
    backend: &dyn Backend,
    opts: &BatchOptions,
    sink: &mut dyn FnMut(&PredictionRecord) -> Result<()>,
) -> Result<BatchOutput> {
    validate(corpus, tasks, opts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let runs = opts.runs;
    let chunk = pool.current_num_threads().max(1) * 16;
    let mut out = BatchOutput::default();
    out.diagnostics.tasks = tasks.len();

    for (chunk_idx, block) in tasks.chunks(chunk).enumerate() {
        let results: Vec<Result<Elicitation>> = pool.install(|| {
            (0..block.len() * runs as usize)
                .into_par_iter()
                .map(|k| backend.elicit(&block[k / runs as usize], (k % runs as usize) as u32))
                .collect()
        });
        let mut results = results.into_iter();
        for (i, task) in block.iter().enumerate() {
            let mut parsed_runs = Vec::with_capacity(runs as usize);
            let mut task_records = Vec::with_capacity(runs as usize + 1);
            for run in 0..runs {
                let result = results.next().expect("one result per run");
                out.diagnostics.elicitations += 1;
                let (raw_text, latency_ms, outcome) = match result {
                    Ok(el) => {
                        let o = parse_answer_detailed(
                            &el.text,
                            &task.target.item,
                            task.target.response_mode,
                            &opts.parse,
                        );
                        if o.value == AnswerValue::Missing(MissingReason::Unparseable) {
                            out.diagnostics.parse_failures += 1;
                        }
                        if o.clipped {
                            out.diagnostics.clip_count += 1;
                        }
                        (el.text, el.latency_ms, o)
                    }
                    Err(e) if e.is_retryable() || matches!(e, Error::ElicitationTimeout { .. }) => {
                        if opts.failure == FailurePolicy::Abort {
                            log::error!(
                                "aborting at task {} ({}/{}/{}): {e}",
                                chunk_idx * chunk + i,
                                task.respondent_id(),
                                task.item_code(),
                                task.condition()
                            );
                            return Err(e);
                        }
                        out.diagnostics.failed_elicitations += 1;
                        log::warn!("elicitation failed, recorded as unparseable: {e}");
                        (
                            String::new(),
                            None,
                            super::ParseOutcome {
                                value: AnswerValue::Missing(MissingReason::Unparseable),
                                clipped: false,
                            },
                        )
                    }
                    Err(e) => return Err(e),
                };
                parsed_runs.push(outcome.value.clone());
                task_records.push(PredictionRecord {
                    respondent_id: task.respondent_id().to_string(),
                    item_code: task.item_code().to_string(),
                    condition: task.condition(),
                    run_index: run,
                    raw_text,
                    parsed: outcome.value,
                    latency_ms,
                    kind: match opts.aggregation {
                        Aggregation::Single => RecordKind::Single,
                        Aggregation::MajorityVote => RecordKind::Constituent,
                    },
                    clipped: outcome.clipped,
                });
            }
            if opts.aggregation == Aggregation::MajorityVote {
                let value = majority(&parsed_runs, task.target.item.is_numeric());
                task_records.push(PredictionRecord {
                    respondent_id: task.respondent_id().to_string(),
                    item_code: task.item_code().to_string(),
                    condition: task.condition(),
                    run_index: runs,
                    raw_text: value.category_label(),
                    parsed: value,
                    latency_ms: None,
                    kind: RecordKind::Aggregate,
                    clipped: false,
                });
            }
            for r in &task_records {
                sink(r)?;
            }
            out.records.extend(task_records);
        }
    }
    Ok(out)
}

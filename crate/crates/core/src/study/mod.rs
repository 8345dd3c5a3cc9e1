//! End-to-end study orchestration: preparation, elicitation, evaluation and
//! report emission for the individual, country and regression studies.
//!
//! Elicitation order is respondent-major, then target, then condition. Every
//! task's seed is derived from the study seed and the task's identity only, so
//! adding a condition or a respondent never changes another task's output.
//! Evaluation reads only prediction records, which makes a report computed
//! from a live run equal to one computed from that run's prediction log.

pub mod config;
mod country;
mod individual;
mod regression;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{
    build_profile, individualize_target, leakage_violations, render_prompt, Condition, ExclusionList,
    TargetQuestion,
};
use crate::corpus::{
    extract_demographics, filter_population, load_corpus, load_references, stratified_match, AnswerValue,
    DemographicVariant, MissingReason, ReferenceDistribution, SurveyCorpus, SurveyItem,
};
use crate::error::{Error, Result};
use crate::gateway::{
    read_prediction_log, run_batch, Backend, BatchOptions, BatchOutput, ElicitationTask, LiveBackend, LiveClient,
    MockBackend, PredictionLogWriter, PredictionRecord, RecordKind,
};
use crate::psychometrics::retirement_scale_items;
use crate::seed::{derive_seed, stable_hash};

pub use config::{
    BackendConfig, BackendKind, CorpusConfig, EvaluationConfig, ExternalItem, ForestConfig, RegressionConfig,
    SampleConfig, StudyConfig, StudyKind, TargetConfig,
};
pub use country::{CountryOption, CountryReport, CountryRow};
pub use individual::{
    AgeGroupRow, BootstrapRow, ConditionResult, Density, DiversityRow, ForestRow, Frequencies, IndividualReport,
    PctChangeRow, QuestionResult,
};
pub use regression::{
    original_study_targets, RegressionConditionReport, RegressionReport, ScaleSummary, TargetValue,
};
pub use report::{emit_report, ReportFormat, PREDICTION_LOG};

/// A respondent removed before elicitation, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub respondent_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageViolation {
    pub respondent_id: String,
    pub item_code: String,
    pub condition: Condition,
    pub text: String,
}

/// Counts gathered before and after elicitation. Latency is deliberately absent
/// so reports stay byte-stable across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub respondents: usize,
    pub excluded_respondents: Vec<Exclusion>,
    pub tasks: usize,
    pub prompts_audited: usize,
    pub leakage_violations: Vec<LeakageViolation>,
    /// Per-run records (constituents or singles).
    pub elicitations: usize,
    pub parse_failures: usize,
    pub parse_failure_rate: f64,
    pub clip_count: usize,
    /// Records whose elicitation failed outright (empty raw text).
    pub failed_elicitations: usize,
    /// Tasks without any final record, e.g. after an aborted run.
    pub missing_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "snake_case")]
pub enum StudyReport {
    Individual(IndividualReport),
    Country(CountryReport),
    Regression(RegressionReport),
}

impl StudyReport {
    pub fn diagnostics(&self) -> &Diagnostics {
        match self {
            StudyReport::Individual(r) => &r.diagnostics,
            StudyReport::Country(r) => &r.diagnostics,
            StudyReport::Regression(r) => &r.diagnostics,
        }
    }
}

/// A target as configured: the item, its prompt template and the optional age rules.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTarget {
    pub template: TargetQuestion,
    /// True when the item belongs to the corpus instrument (withheld, with ground truth).
    pub internal: bool,
    pub age_rules: Vec<crate::agent::AgeRule>,
}

/// A loaded corpus with its full, ordered elicitation work list.
pub struct Study {
    pub config: StudyConfig,
    pub corpus: SurveyCorpus,
    pub targets: Vec<PreparedTarget>,
    pub tasks: Vec<ElicitationTask>,
    pub references: Vec<ReferenceDistribution>,
    preparation: Diagnostics,
}

type TaskKey = (String, String, Condition);

fn task_key(rid: &str, item: &str, c: Condition) -> TaskKey {
    (rid.to_string(), item.to_string(), c)
}

impl Study {
    /// Loads inputs from disk and builds every task.
    pub fn prepare(config: StudyConfig) -> Result<Study> {
        config.validate()?;
        let opts = config.corpus.ingest_options();
        let corpus = load_corpus(&config.corpus.instrument, &config.corpus.respondents, config.corpus.format, &opts)?;
        let references = match &config.corpus.references {
            Some(p) if config.kind == StudyKind::Country => load_references(p)?,
            _ => Vec::new(),
        };
        Self::from_parts(config, corpus, references)
    }

    /// Builds the work list from an in-memory corpus.
    pub fn from_parts(config: StudyConfig, corpus: SurveyCorpus, references: Vec<ReferenceDistribution>) -> Result<Study> {
        config.validate()?;
        let filtered = filter_population(&corpus, &config.corpus.countries, config.corpus.age_range);
        let variants: Vec<DemographicVariant> = config
            .conditions
            .iter()
            .filter_map(|c| match c {
                Condition::Demo7 => Some(DemographicVariant::Demo7),
                Condition::Demo3 => Some(DemographicVariant::Demo3),
                Condition::SurveyAnchored => None,
            })
            .collect();
        // Every participant needs a complete profile under each configured
        // demographic condition, so condition comparisons stay paired. The check
        // precedes matching so matched strata keep their exact counts.
        let mut diag = Diagnostics::default();
        let complete: Vec<_> = filtered
            .respondents()
            .iter()
            .filter(|record| {
                match variants
                    .iter()
                    .find_map(|v| extract_demographics(record, filtered.instrument(), *v, &config.demographics).err())
                {
                    Some(err) => {
                        diag.excluded_respondents.push(Exclusion {
                            respondent_id: record.respondent_id.clone(),
                            reason: err.to_string(),
                        });
                        false
                    }
                    None => true,
                }
            })
            .cloned()
            .collect();
        let mut population = filtered.with_respondents(complete);
        if let Some(sample) = &config.sample {
            population = stratified_match(&population, &sample.strata, sample.n, config.seed)?;
        }
        diag.respondents = population.respondents().len();
        let instrument = population.instrument();

        let mut exclusion_codes = config.exclusion_codes();
        let configured: BTreeSet<String> = config.exclusions.iter().cloned().collect();
        ExclusionList::new(configured.iter(), "configured").validate(instrument)?;
        exclusion_codes.retain(|c| instrument.contains(c));
        let exclusions = ExclusionList::new(exclusion_codes.iter(), "leakage");

        let targets = prepare_targets(&config, &population)?;

        let forbidden_base: Vec<String> = exclusions
            .item_codes
            .iter()
            .filter_map(|c| instrument.get(c))
            .map(|i| i.question_text.clone())
            .collect();

        let mut tasks = Vec::new();
        for record in population.respondents() {
            for target in &targets {
                let code = target.template.item.code.clone();
                let truth = if target.internal {
                    match record.answer(&code) {
                        Some(a) => Some(a.clone()),
                        None => continue,
                    }
                } else {
                    None
                };
                let question = if target.age_rules.is_empty() {
                    target.template.clone()
                } else {
                    individualize_target(&target.template, record.age, &target.age_rules)?
                };
                let mut forbidden = forbidden_base.clone();
                forbidden.push(target.template.item.question_text.clone());
                forbidden.push(question.rendered_text.clone());
                for &condition in &config.conditions {
                    let profile = build_profile(
                        record,
                        instrument,
                        condition,
                        &exclusions,
                        target.internal.then_some(code.as_str()),
                        &config.demographics,
                    )?;
                    let bundle = render_prompt(&profile, &question, &config.generation);
                    let refs: Vec<&str> = forbidden.iter().map(String::as_str).collect();
                    diag.prompts_audited += 1;
                    for text in leakage_violations(bundle.context_section(), &refs) {
                        diag.leakage_violations.push(LeakageViolation {
                            respondent_id: record.respondent_id.clone(),
                            item_code: code.clone(),
                            condition,
                            text: text.to_string(),
                        });
                    }
                    let seed = derive_seed(
                        config.seed,
                        &[stable_hash(&record.respondent_id), stable_hash(&code), stable_hash(condition.as_str())],
                    );
                    tasks.push(ElicitationTask { profile, target: question.clone(), bundle, truth: truth.clone(), seed });
                }
            }
        }
        diag.tasks = tasks.len();
        let study = Study { config, corpus: population, targets, tasks, references, preparation: diag };
        study.check_backend_coverage()?;
        Ok(study)
    }

    fn check_backend_coverage(&self) -> Result<()> {
        if self.config.backend.kind != BackendKind::Mock {
            return Ok(());
        }
        let mock = MockBackend { rules: self.config.backend.rules.clone() };
        let mut checked = BTreeSet::new();
        for t in &self.tasks {
            let key = (t.item_code().to_string(), t.condition());
            if !checked.insert(key) {
                continue;
            }
            let policy = mock.policy_for(t.condition(), t.item_code()).ok_or_else(|| {
                Error::Config(format!("mock policy map does not cover `{}` under {}", t.item_code(), t.condition()))
            })?;
            if policy.needs_truth() && t.truth.is_none() {
                return Err(Error::Config(format!(
                    "`{}` has no ground truth, so an echo policy cannot answer it",
                    t.item_code()
                )));
            }
        }
        Ok(())
    }

    pub fn preparation(&self) -> &Diagnostics {
        &self.preparation
    }

    pub fn backend(&self) -> Result<Box<dyn Backend>> {
        Ok(match self.config.backend.kind {
            BackendKind::Mock => Box::new(MockBackend { rules: self.config.backend.rules.clone() }),
            BackendKind::Live => Box::new(LiveBackend { client: LiveClient::new(self.config.backend.endpoint.clone())? }),
        })
    }

    pub fn log_path(&self) -> PathBuf {
        self.config.output_dir.join(PREDICTION_LOG)
    }

    /// Elicits every task, streaming records to the log when a path is given.
    pub fn elicit(&self, backend: &dyn Backend, log: Option<&Path>) -> Result<BatchOutput> {
        let opts: &BatchOptions = &self.config.batch;
        match log {
            Some(path) => {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                }
                let mut writer = PredictionLogWriter::create(path)?;
                run_batch(&self.corpus, &self.tasks, backend, opts, &mut |r| writer.write(r))
            }
            None => run_batch(&self.corpus, &self.tasks, backend, opts, &mut |_| Ok(())),
        }
    }

    /// Elicits with the configured backend, logs to the output directory and evaluates.
    pub fn run(&self) -> Result<StudyReport> {
        let backend = self.backend()?;
        let out = self.elicit(backend.as_ref(), Some(&self.log_path()))?;
        self.evaluate(&out.records)
    }

    /// Evaluates a previously written prediction log without eliciting anything.
    pub fn replay(&self, log: &Path) -> Result<StudyReport> {
        self.evaluate(&read_prediction_log(log)?)
    }

    pub fn evaluate(&self, records: &[PredictionRecord]) -> Result<StudyReport> {
        let (predictions, diag) = self.collect(records)?;
        match self.config.kind {
            StudyKind::Individual => individual::evaluate(self, &predictions, diag).map(StudyReport::Individual),
            StudyKind::Country => country::evaluate(self, &predictions, diag).map(StudyReport::Country),
            StudyKind::Regression => regression::evaluate(self, &predictions, diag).map(StudyReport::Regression),
        }
    }

    /// One final prediction per task plus record-level diagnostics. Aggregates
    /// take precedence; otherwise the lowest run index is used.
    fn collect(&self, records: &[PredictionRecord]) -> Result<(Predictions, Diagnostics)> {
        let mut diag = self.preparation.clone();
        let known: BTreeSet<TaskKey> = self
            .tasks
            .iter()
            .map(|t| task_key(t.respondent_id(), t.item_code(), t.condition()))
            .collect();
        let mut chosen: BTreeMap<TaskKey, (bool, u32, AnswerValue)> = BTreeMap::new();
        for r in records {
            let key = task_key(&r.respondent_id, &r.item_code, r.condition);
            if !known.contains(&key) {
                return Err(Error::Integrity(format!(
                    "prediction for `{}`/`{}`/{} does not match any task of this study",
                    r.respondent_id, r.item_code, r.condition
                )));
            }
            if r.kind != RecordKind::Aggregate {
                diag.elicitations += 1;
                if r.clipped {
                    diag.clip_count += 1;
                }
                if r.parsed == AnswerValue::Missing(MissingReason::Unparseable) {
                    if r.raw_text.is_empty() {
                        diag.failed_elicitations += 1;
                    } else {
                        diag.parse_failures += 1;
                    }
                }
            }
            if !r.is_final() {
                continue;
            }
            let aggregate = r.kind == RecordKind::Aggregate;
            let replace = match chosen.get(&key) {
                None => true,
                Some((agg, run, _)) => (aggregate && !agg) || (aggregate == *agg && r.run_index < *run),
            };
            if replace {
                chosen.insert(key, (aggregate, r.run_index, r.parsed.clone()));
            }
        }
        diag.parse_failure_rate = if diag.elicitations == 0 {
            0.0
        } else {
            diag.parse_failures as f64 / diag.elicitations as f64
        };
        let mut map = BTreeMap::new();
        for key in known {
            match chosen.remove(&key) {
                Some((_, _, v)) => {
                    map.insert(key, v);
                }
                None => {
                    diag.missing_records += 1;
                    map.insert(key, AnswerValue::Missing(MissingReason::Unparseable));
                }
            }
        }
        Ok((Predictions { map }, diag))
    }

    /// Respondent ids in work-list order, without repeats.
    fn participants(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.tasks
            .iter()
            .map(|t| t.respondent_id())
            .filter(|r| seen.insert(*r))
            .collect()
    }
}

/// Final parsed prediction per (respondent, item, condition).
pub(crate) struct Predictions {
    map: BTreeMap<TaskKey, AnswerValue>,
}

impl Predictions {
    fn get(&self, rid: &str, item: &str, c: Condition) -> Option<&AnswerValue> {
        self.map.get(&task_key(rid, item, c))
    }
}

fn prepare_targets(config: &StudyConfig, corpus: &SurveyCorpus) -> Result<Vec<PreparedTarget>> {
    let instrument = corpus.instrument();
    if config.kind == StudyKind::Regression {
        return retirement_scale_items()
            .into_iter()
            .map(|item| {
                Ok(PreparedTarget {
                    template: TargetQuestion::new(item, crate::agent::ResponseMode::DiscreteOptions)?,
                    internal: false,
                    age_rules: Vec::new(),
                })
            })
            .collect();
    }
    config
        .targets
        .iter()
        .map(|t| {
            let (item, internal): (SurveyItem, bool) = match (instrument.get(&t.code), t.external_item()?) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config(format!(
                        "`{}` is in the instrument and must not redefine its item",
                        t.code
                    )))
                }
                (Some(item), None) => (item.clone(), true),
                (None, Some(item)) => (item, false),
                (None, None) => return Err(Error::UnknownItems { codes: vec![t.code.clone()] }),
            };
            if config.kind == StudyKind::Individual && !internal {
                return Err(Error::Config(format!(
                    "individual-study target `{}` must belong to the instrument",
                    t.code
                )));
            }
            let mut template = TargetQuestion::new(item, t.mode)?;
            if let Some(text) = &t.text {
                template.rendered_text = text.clone();
            }
            if let Some(a) = &t.anchors {
                template = template.with_anchors(&a.low, &a.high);
            }
            Ok(PreparedTarget { template, internal, age_rules: t.age_rules.clone() })
        })
        .collect()
}

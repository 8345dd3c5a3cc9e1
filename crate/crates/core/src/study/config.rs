//! Declarative study configuration, read from a single TOML document.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgeRule, Condition, ResponseMode, ScaleAnchors, LEAKAGE_CODES};
use crate::corpus::{CorpusFormat, DemographicItems, IngestOptions, ItemKind, StratumTargets, SurveyItem};
use crate::error::{Error, Result};
use crate::forest::ForestGrid;
use crate::gateway::{BatchOptions, EndpointConfig, GenerationConfig, PolicyRule};
use crate::inference::BootstrapConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Individual,
    Country,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub instrument: PathBuf,
    pub respondents: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    /// Reference distributions (country studies only).
    #[serde(default)]
    pub references: Option<PathBuf>,
    #[serde(default)]
    pub countries: BTreeSet<String>,
    #[serde(default)]
    pub age_range: Option<(u32, u32)>,
    #[serde(default = "default_reference_year")]
    pub reference_year: i32,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::DelimitedTable
}

fn default_reference_year() -> i32 {
    IngestOptions::default().reference_year
}

impl CorpusConfig {
    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions { reference_year: self.reference_year, ..IngestOptions::default() }
    }
}

/// Optional demographic-matched subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub strata: StratumTargets,
}

/// Item definition for targets outside the corpus instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalItem {
    pub text: String,
    #[serde(default)]
    pub options: Vec<String>,
    #[serde(default)]
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub code: String,
    #[serde(default = "default_mode")]
    pub mode: ResponseMode,
    /// Replaces the item's question text in the prompt; may contain the age placeholder.
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub anchors: Option<ScaleAnchors>,
    #[serde(default)]
    pub age_rules: Vec<AgeRule>,
    /// Required when the target is not part of the corpus instrument.
    #[serde(default)]
    pub item: Option<ExternalItem>,
}

fn default_mode() -> ResponseMode {
    ResponseMode::DiscreteOptions
}

impl TargetConfig {
    pub fn external_item(&self) -> Result<Option<SurveyItem>> {
        let Some(ext) = &self.item else {
            return Ok(None);
        };
        let item = match (ext.options.is_empty(), ext.range) {
            (false, None) => {
                let opts: Vec<&str> = ext.options.iter().map(String::as_str).collect();
                SurveyItem::categorical(&self.code, &ext.text, &opts)
            }
            (true, Some((min, max))) => SurveyItem::numeric(&self.code, &ext.text, min, max),
            _ => {
                return Err(Error::Config(format!(
                    "external item `{}` needs exactly one of `options` or `range`",
                    self.code
                )))
            }
        };
        item.validate()?;
        Ok(Some(item))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default)]
    pub rules: Vec<PolicyRule>,
    #[serde(default)]
    pub endpoint: EndpointConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig { kind: BackendKind::Mock, rules: Vec::new(), endpoint: EndpointConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Non-substantive answers form their own categories in categorical TVD.
    pub missing_as_category: bool,
    pub k_bins: usize,
    /// Inclusive age bands for age-group mean tables.
    pub age_bands: Vec<(u32, u32)>,
    /// Condition pairs `(a, b)` for the participant bootstrap of `TVD_a - TVD_b`.
    pub bootstrap_pairs: Vec<(Condition, Condition)>,
    /// Condition pairs `(demo, anchored)` for percent-change rows.
    pub pct_change_pairs: Vec<(Condition, Condition)>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            missing_as_category: true,
            k_bins: crate::metrics::DEFAULT_K_BINS,
            age_bands: Vec::new(),
            bootstrap_pairs: Vec::new(),
            pct_change_pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub enabled: bool,
    pub grid: ForestGrid,
    pub min_rows: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { enabled: false, grid: ForestGrid::default(), min_rows: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    /// SD multiples defining high and low in simple slopes.
    pub band: f64,
    /// Grouping for the intraclass correlation of scale scores.
    pub icc_groups: Option<crate::corpus::StratumKey>,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig { band: 1.0, icc_groups: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub sample: Option<SampleConfig>,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    /// Individual and country studies; regression studies use the built-in scale items.
    #[serde(default)]
    pub targets: Vec<TargetConfig>,
    /// Item codes never shown in any context.
    #[serde(default)]
    pub exclusions: Vec<String>,
    #[serde(default)]
    pub demographics: DemographicItems,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub batch: BatchOptions,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.instrument);
        fix(&mut self.corpus.respondents);
        if let Some(r) = self.corpus.references.as_mut() {
            fix(r);
        }
        fix(&mut self.output_dir);
    }

    /// Leakage codes are added for country studies, whose targets come from another survey.
    pub fn exclusion_codes(&self) -> BTreeSet<String> {
        let mut codes: BTreeSet<String> = self.exclusions.iter().cloned().collect();
        if self.kind == StudyKind::Country {
            codes.extend(LEAKAGE_CODES.iter().map(|c| c.to_string()));
        }
        codes
    }

    /// Checks that do not need the corpus on disk.
    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::Config("no conditions configured".into()));
        }
        let unique: BTreeSet<Condition> = self.conditions.iter().copied().collect();
        if unique.len() != self.conditions.len() {
            return Err(Error::Config("conditions are listed more than once".into()));
        }
        match self.kind {
            StudyKind::Regression => {
                if !self.targets.is_empty() {
                    return Err(Error::Config("regression studies use the built-in scale items; remove `targets`".into()));
                }
            }
            _ if self.targets.is_empty() => {
                return Err(Error::Config("no target items configured".into()));
            }
            StudyKind::Country if self.corpus.references.is_none() => {
                return Err(Error::Config("country studies need `corpus.references`".into()));
            }
            _ => {}
        }
        let codes: BTreeSet<&str> = self.targets.iter().map(|t| t.code.as_str()).collect();
        if codes.len() != self.targets.len() {
            return Err(Error::Config("target items are listed more than once".into()));
        }
        for t in &self.targets {
            if let Some(item) = t.external_item()? {
                if t.mode == ResponseMode::Continuous0To100 && !matches!(item.kind, ItemKind::Numeric { .. }) {
                    return Err(Error::Config(format!("`{}` is categorical; continuous mode needs a numeric item", t.code)));
                }
            }
        }
        for (a, b) in self.evaluation.bootstrap_pairs.iter().chain(&self.evaluation.pct_change_pairs) {
            if !unique.contains(a) || !unique.contains(b) || a == b {
                return Err(Error::Config(format!("condition pair ({a}, {b}) must name two configured conditions")));
            }
        }
        if self.regression.band <= 0.0 || !self.regression.band.is_finite() {
            return Err(Error::Config("regression.band must be positive".into()));
        }
        self.generation.validate()?;
        self.bootstrap.validate()?;
        if self.batch.runs == 0 {
            return Err(Error::Config("batch.runs must be at least 1".into()));
        }
        if self.backend.kind == BackendKind::Live {
            self.backend.endpoint.validate()?;
        }
        for r in &self.backend.rules {
            r.policy.validate()?;
        }
        Ok(())
    }
}

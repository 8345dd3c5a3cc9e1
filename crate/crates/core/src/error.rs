use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input, positioned by line (1-based) or record number.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown item codes: {}", codes.join(", "))]
    UnknownItems { codes: Vec<String> },

    #[error("duplicate respondent id `{0}`")]
    DuplicateRespondent(String),

    #[error("respondent `{respondent_id}` has an incomplete profile: missing `{item}`")]
    IncompleteProfile { respondent_id: String, item: String },

    #[error("stratum `{stratum}` needs {needed} respondents but only {available} are available")]
    StratumShortage {
        stratum: String,
        needed: usize,
        available: usize,
    },

    #[error("no age rule covers age {age}")]
    RuleGap { age: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("elicitation timed out after {after_ms} ms")]
    ElicitationTimeout { after_ms: u64 },

    #[error("completion service returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("invalid grouping: {0}")]
    Grouping(String),

    #[error("correlation undefined for constant item `{item}`")]
    CorrelationUndefined { item: String },

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("design matrix is rank deficient: column `{column}` is collinear with earlier columns")]
    Collinearity { column: String },

    #[error("predictor `{column}` is constant")]
    ConstantPredictor { column: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("unmapped option labels: {}", unmatched.join(", "))]
    LabelMapping { unmatched: Vec<String> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// Transport-level failures that are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            Error::Transport { .. } => true,
            Error::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

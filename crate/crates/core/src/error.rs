use std::fmt;

use thiserror::Error;

/// One itemized configuration problem, addressed by section and key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub section: String,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.section, self.key, self.message)
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("ill-posed netlist: {0}")]
    IllPosedNetlist(String),
    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("mismatched transducer mode frequencies: {0}")]
    MismatchedTransducers(String),
    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),
    #[error("insufficient span: grid reaches {available:.3} bandwidths from the pulse center, need {required}")]
    InsufficientSpan { available: f64, required: f64 },
    #[error("missing bath descriptor for noise port {0}")]
    MissingBath(String),
    #[error("inconsistent channel: {0}")]
    InconsistentChannel(String),
    #[error("singular port connection between {0} and {1}")]
    SingularConnection(String, String),
    #[error("unknown port {0}")]
    UnknownPort(String),
    #[error("invalid configuration: {}", join_issues(.0))]
    InvalidConfig(Vec<ConfigIssue>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = LinkError> = std::result::Result<T, E>;

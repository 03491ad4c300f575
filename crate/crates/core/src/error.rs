use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error in {} at line {line}, column {column} (field `{field}`): {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },

    /// An instance invariant does not hold; `field` names the offending field.
    #[error("invalid instance: `{field}`: {message}")]
    Validation { field: String, message: String },

    /// A plan breaks a constraint family (`capacity`, `fleet-limit`, ...).
    #[error("infeasible plan: constraint family `{family}`: {message}")]
    InfeasiblePlan { family: String, message: String },

    #[error("plan does not match model: {0}")]
    PlanMismatch(String),

    /// An assignment violates a model constraint; `tag` is the constraint family.
    #[error("audit failed: constraint `{tag}` violated: {message}")]
    Audit { tag: String, message: String },

    #[error("unsupported model structure: {0}")]
    UnsupportedModel(String),

    #[error("objective coefficients cannot be scaled to a common integer denominator")]
    CoefficientOverflow,

    #[error("solution file line {line}: {message}")]
    SolutionParse { line: usize, message: String },

    #[error("unknown {kind} `{name}` (available: {available})")]
    Unknown { kind: &'static str, name: String, available: String },

    #[error("reports come from different instances: {0}")]
    InstanceMismatch(String),

    /// No assignment satisfies the model.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    pub(crate) fn infeasible_plan(family: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InfeasiblePlan { family: family.into(), message: message.into() }
    }

    /// True for errors caused by malformed or inconsistent user input.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation { .. }
                | Error::InfeasiblePlan { .. }
                | Error::PlanMismatch(_)
                | Error::SolutionParse { .. }
                | Error::Unknown { .. }
                | Error::InstanceMismatch(_)
                | Error::Config(_)
        )
    }
}

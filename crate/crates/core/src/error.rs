use std::path::PathBuf;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error{}: {message}", location(.key, .line))]
    Config {
        key: Option<String>,
        line: Option<usize>,
        message: String,
    },

    #[error("numerical overflow at point {index}: {what}")]
    NumericalOverflow { index: usize, what: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: total loss {total:e} (initial {initial:e})")]
    Diverged { epoch: usize, total: f64, initial: f64 },

    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("field backing does not provide a Hessian")]
    UnsupportedBacking,

    #[error("point ({x}, {y}) is outside the interpolation support")]
    OutOfSupport { x: f64, y: f64 },

    #[error("degenerate domain: acceptance rate {rate:e} after {trials} trials")]
    DegenerateDomain { rate: f64, trials: usize },

    #[error("degenerate reference field: {0}")]
    DegenerateReference(String),

    #[error("boundary data error: {0}")]
    Data(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown case or phantom id `{0}`")]
    UnknownCase(String),

    #[error("checkpoint {}: {kind}", .path.display())]
    Checkpoint { path: PathBuf, kind: CheckpointError },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("missing file")]
    Missing,
    #[error("unsupported format version `{0}`")]
    Version(String),
    #[error("truncated ({0})")]
    Truncated(String),
    #[error("malformed line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("config digest mismatch (expected {expected}, found {found})")]
    DigestMismatch { expected: String, found: String },
}

fn location(key: &Option<String>, line: &Option<usize>) -> String {
    match (key, line) {
        (Some(k), Some(l)) => format!(" at key `{k}` (line {l})"),
        (Some(k), None) => format!(" at key `{k}`"),
        (None, Some(l)) => format!(" at line {l}"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config {
            key: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn config_key(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: Some(key.to_string()),
            line: None,
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalOverflow { .. }
                | Error::NonFinite(_)
                | Error::Diverged { .. }
                | Error::SolverDiverged { .. }
                | Error::DegenerateDomain { .. }
                | Error::DegenerateReference(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

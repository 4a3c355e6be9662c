use std::path::PathBuf;

/// Errors raised by the simulation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid film state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported mobility exponent m = {m}: {reason}")]
    UnsupportedExponent { m: f64, reason: &'static str },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("attempt budget of {budget} exceeded after {accepted} accepted samples (n = {n}, beta = {beta})")]
    AttemptBudget {
        budget: u64,
        accepted: usize,
        n: usize,
        beta: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("mismatched binning: {0}")]
    MismatchedBinning(String),

    #[error("rate bound diverges: condition {condition} violated ({detail})")]
    Divergent {
        condition: &'static str,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable short name of the variant, used in machine-readable exit lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidState(_) => "invalid-state",
            Error::Domain(_) => "domain",
            Error::UnsupportedExponent { .. } => "unsupported-exponent",
            Error::Solver(_) => "solver",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::AttemptBudget { .. } => "attempt-budget",
            Error::EmptyInput(_) => "empty-input",
            Error::MismatchedBinning(_) => "mismatched-binning",
            Error::Divergent { .. } => "divergent",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside its mathematical or physical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that is not allowed for the current branch status.
    #[error("state error: {0}")]
    State(String),

    /// Merge attempted while a branch is projected or absorbed.
    #[error("recoherence impossible: {0}")]
    RecoherenceImpossible(String),

    #[error("empty trial: no clicks to pair")]
    EmptyTrial,

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error(
        "unclassifiable phase: od_phi = {od_phi} is within {tolerance} of neither 0 nor {expected}"
    )]
    UnclassifiablePhase {
        od_phi: f64,
        expected: f64,
        tolerance: f64,
    },

    /// Configuration error, located by line (1-based, 0 when unknown) and key.
    #[error("{}", format_parse(*line, key, message))]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

fn format_parse(line: usize, key: &str, message: &str) -> String {
    match (line, key.is_empty()) {
        (0, true) => format!("config error: {message}"),
        (0, false) => format!("config error at `{key}`: {message}"),
        (l, true) => format!("config error at line {l}: {message}"),
        (l, false) => format!("config error at line {l}, `{key}`: {message}"),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

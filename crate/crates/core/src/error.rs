use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cycle detected through edge {from} -> {to}")]
    Cycle { from: String, to: String },

    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown noise variable `{0}`")]
    UnknownNoise(String),

    #[error("invalid noise spec `{id}`: {reason}")]
    InvalidNoise { id: String, reason: String },

    #[error("invalid mechanism for `{node}`: {reason}")]
    InvalidMechanism { node: String, reason: String },

    #[error("value `{value}` is not in the domain of `{var}`")]
    ValueOutOfDomain { var: String, value: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("enumeration of {size} joint assignments exceeds the cap of {cap}")]
    Capacity { size: u128, cap: u128 },

    #[error("observation is inconsistent with every noise assignment")]
    Contradiction,

    #[error("conditional row {row} sums to {sum}, expected 1")]
    InvalidConditional { row: usize, sum: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("level generation failed after {attempts} attempts")]
    Generation { attempts: usize },

    #[error("importance weights collapsed: the target assigns zero probability to every logged episode")]
    SupportCollapse,

    #[error("policy improvement failed: {0}")]
    Improvement(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(format!("json: {e}"))
    }
}

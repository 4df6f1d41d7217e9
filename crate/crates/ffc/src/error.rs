use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Input data violates a dataset invariant (shape, finiteness, classes).
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    /// A caller-supplied parameter is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A decoded program selects no features; the caller treats it as a
    /// degenerate program with fitness zero.
    #[error("empty feature mask")]
    EmptyMask,

    /// Two gene strings (or a gene string and its shape) disagree in length.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// A population step was requested while an agent still has stale fitness.
    #[error("agent {0} has no fitness value; evaluate before stepping")]
    UnevaluatedAgent(usize),

    /// The server did not receive a report from every client.
    #[error("missing champion report for client {0}")]
    MissingReport(usize),

    #[error("client {client} reported {got} champions, expected {expected}")]
    ChampionCountMismatch {
        client: usize,
        expected: usize,
        got: usize,
    },

    /// A global update referenced a population index a client does not have.
    #[error("client {client}: incoming update index {index} out of range (population size {size})")]
    UpdateIndexOutOfRange {
        client: usize,
        index: usize,
        size: usize,
    },

    #[error("client {0} has no local training samples")]
    EmptyLocalData(usize),

    /// A constructed-feature expression string failed to parse.
    #[error("expression parse error: {0}")]
    ExprParse(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// CLI exit code classification: `2` for bad user input, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Json(_) => 1,
            _ => 2,
        }
    }
}

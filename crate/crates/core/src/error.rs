use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row} of arm {arm} sums to {sum}")]
    RowSum { arm: usize, row: usize, sum: f64 },
    #[error("negative entry {value} at arm {arm}, ({row}, {col})")]
    NegativeEntry {
        arm: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("arm {arm} is not ergodic: {reason}")]
    Ergodicity { arm: usize, reason: String },
    #[error("no convergence after {iterations} iterations (last span {last_span:e})")]
    Convergence { iterations: usize, last_span: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("observation {state} on arm {arm} has zero probability")]
    ImpossibleObservation { arm: usize, state: usize },
    #[error("grid has {size} points, cap is {cap}")]
    GridTooLarge { size: usize, cap: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("oracle needs {needed} nodes, cap is {cap}")]
    OracleTooLarge { needed: usize, cap: usize },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("no data: {0}")]
    NoData(String),
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
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

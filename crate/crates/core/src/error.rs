use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("input error: {0}")]
    Input(String),
    #[error("divisibility error: vertex {vertex} has odd degree {degree}")]
    Divisibility { vertex: u32, degree: usize },
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),
    #[error("feasibility error: {0}")]
    Feasibility(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("unimplemented dependency: {0}")]
    UnimplementedDependency(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}

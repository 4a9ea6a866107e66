use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("scenario mismatch: {0} vs {1}")]
    ScenarioMismatch(String, String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-uniform input marginal: {0}")]
    NonUniformInputs(String),
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("program enumeration exceeded the cap of {0}")]
    TooManyPrograms(usize),
    #[error("bisection did not converge within {0} iterations")]
    BisectionDiverged(usize),
    #[error("json: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

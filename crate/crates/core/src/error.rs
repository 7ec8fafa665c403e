use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("not implemented: {0}")]
    Unimplemented(String),
    #[error("non-finite state after step {step}")]
    BlowUp { step: usize },
    #[error("CFL constraint `{constraint}` violated: {value:.6} > {limit}")]
    Cfl {
        constraint: &'static str,
        value: f64,
        limit: f64,
    },
    #[error("solver fault at t = {time}: {msg}")]
    Fault { time: f64, msg: String },
    #[error("characteristic crossing at t = {time} (markers {index} and {next})")]
    Crossing { time: f64, index: usize, next: usize },
    #[error("total masses differ: {mu} vs {nu}")]
    MassMismatch { mu: f64, nu: f64 },
    #[error("transport instance has {atoms} atoms, cap is {max}; coarsen the measures")]
    TooLarge { atoms: usize, max: usize },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("initial data not well prepared: W1 = {w1} >= epsilon = {epsilon}")]
    NotWellPrepared { w1: f64, epsilon: f64 },
    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("config key `{key}`: {msg}")]
    ConfigValue { key: String, msg: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

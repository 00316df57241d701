use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value}, achieved error {achieved:e}, requested {requested:e}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("run diverged at step {step} (node {node}, value {value})")]
    Diverged { step: usize, node: usize, value: f64 },

    #[error("noise tape needs {needed} bytes but the in-memory budget is {budget}; use regenerable storage")]
    MemoryBudget { needed: usize, budget: usize },

    #[error("tape mismatch: {0}")]
    TapeMismatch(String),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("too few samples: have {have}, need at least {need}")]
    TooFewSamples { have: usize, need: usize },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("estimated cost {estimate} exceeds budget {budget}")]
    Budget { estimate: f64, budget: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

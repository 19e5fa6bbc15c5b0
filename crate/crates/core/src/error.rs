use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("m = {m} is not an admissible magnetization density for N = {n}; nearest admissible value is {nearest}")]
    Inadmissible { m: f64, n: u64, nearest: f64 },

    #[error("degenerate ensemble: {0}")]
    Degenerate(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not reach tolerance {requested:e}: estimate {estimate}, error estimate {achieved:e}")]
    Quadrature {
        estimate: f64,
        achieved: f64,
        requested: f64,
    },

    #[error("non-finite value at draw {index}")]
    NonFinite { index: u64 },

    #[error("transport solver: {0}")]
    Solver(String),

    #[error("rate fit needs at least 3 usable rows, got {0}")]
    TooFewRows(usize),

    #[error("output: {0}")]
    Output(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

use thiserror::Error;

/// Errors raised by the numerical kernels, the optimizers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("SVD did not converge after {0} sweeps")]
    SvdNotConverged(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("linear program for branch {branch} failed: {detail}")]
    Lp { branch: usize, detail: String },

    #[error("enumeration over {bs_count} base stations exceeds the limit of {limit}")]
    EnumerationTooLarge { bs_count: usize, limit: usize },

    #[error("scenario parse error: {0}")]
    Scenario(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

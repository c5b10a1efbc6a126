use thiserror::Error;

/// Error type shared across the pipeline. Variants map onto the CLI exit
/// codes: specification/config problems exit 2, data problems exit 3,
/// numerical problems exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("specification error: {0}")]
    Spec(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capability error: {0}")]
    Capability(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("fitting error: {0}")]
    Fitting(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_) | Error::Domain(_) | Error::Capability(_) => 2,
            Error::Consistency(_)
            | Error::Data(_)
            | Error::Format(_)
            | Error::Io(_) => 3,
            Error::Fitting(_)
            | Error::Training(_)
            | Error::Metric(_)
            | Error::Numerical(_) => 4,
        }
    }

    /// Short machine-readable kind tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Spec(_) => "spec",
            Error::Domain(_) => "domain",
            Error::Capability(_) => "capability",
            Error::Consistency(_) => "consistency",
            Error::Data(_) => "data",
            Error::Format(_) => "format",
            Error::Fitting(_) => "fitting",
            Error::Training(_) => "training",
            Error::Metric(_) => "metric",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is out of range. `field` names the offending
    /// field using its dotted config path.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("invalid probe: {0}")]
    Probe(String),

    #[error("dispersion series is empty: {0}")]
    EmptySeries(String),

    #[error("malformed measurement data: {0}")]
    Data(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("router time estimation failed: {0}")]
    RouterEstimation(String),

    #[error("probe planning failed, missing inputs: {}", .0.join(", "))]
    Planning(Vec<String>),

    #[error("ground-truth search failed: {0}")]
    GroundTruth(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

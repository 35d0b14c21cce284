use thiserror::Error;

/// Errors raised by model evaluation, configuration checks and experiment runs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain of the function evaluated on it.
    #[error("domain violation: {what} = {value} ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A configuration or parameter field failed validation.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("index out of range: {what} = {index} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// The requested analysis does not apply to the given input.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// A simulation inside a tax search failed.
    #[error("run failed at tau = {tau}, seed = {seed}: {source}")]
    TaxRun {
        tau: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    /// A simulation inside a sweep cell failed.
    #[error("sweep cell {cell:?} (seed {seed}) failed: {source}")]
    SweepCell {
        cell: Vec<(String, f64)>,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad configuration rather than a failed computation.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidParameter { .. } => true,
            Error::TaxRun { source, .. } | Error::SweepCell { source, .. } => {
                source.is_config_error()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Crate-wide error type. Variants that indicate bad user input (parse,
/// validation) are distinguished from numerical failures so callers such as
/// the CLI can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion must be unit length, norm deviates by {defect:.3e}")]
    NonUnitQuaternion { defect: f64 },

    #[error("axis must be unit length, norm deviates by {defect:.3e}")]
    NonUnitAxis { defect: f64 },

    #[error("dual quaternion is not a unit pose, defect {defect:.3e}")]
    NonUnitDualQuaternion { defect: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error: {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("sampling exhausted after {attempts} consecutive rejections, range-of-motion table may be inconsistent")]
    SamplingExhausted { attempts: usize },

    #[error("training diverged: {0}")]
    DivergedTraining(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("too few samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("duration must be positive and finite, got {0}")]
    InvalidDuration(f64),

    #[error("sample count must be at least {need}, got {got}")]
    InvalidSampleCount { got: usize, need: usize },

    #[error("link frames do not match the model: {0}")]
    FrameMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), reason: reason.into() }
    }

    /// True for errors caused by malformed input rather than numerical trouble.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Validation { .. }
                | Error::InvalidDuration(_)
                | Error::InvalidSampleCount { .. }
                | Error::TooFewSamples { .. }
                | Error::EmptyDataset
                | Error::MissingArtifact(_)
                | Error::NonUnitAxis { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

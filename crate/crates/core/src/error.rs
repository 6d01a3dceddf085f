//! Crate-wide error type.

use crate::data::SubsetMask;

#[derive(Debug, thiserror::Error)]
pub enum ShapError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// A smoother could not be evaluated at a query point (e.g. no kernel
    /// mass, singular weighted design). Carries the offending point so the
    /// caller can skip or abort.
    #[error("estimation failed at {point:?}: {reason}")]
    Estimation { point: Vec<f64>, reason: String },

    #[error("bandwidth selection failed for subset {subset}: {reason}")]
    BandwidthSelection { subset: SubsetMask, reason: String },

    #[error("integration failed for subset {subset}: {reason}")]
    Integration { subset: SubsetMask, reason: String },

    #[error("invalid covariate law: {0}")]
    Law(String),

    /// Requested a method that is not available for the given inputs
    /// (e.g. a closed-form population curve for an unsupported model).
    #[error("not supported: {0}")]
    Capability(String),
}

impl ShapError {
    pub fn estimation(point: &[f64], reason: impl Into<String>) -> Self {
        ShapError::Estimation {
            point: point.to_vec(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ShapError>;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("unstable discretization: spectral radius of F is {spectral_radius:.6} (must be < 1)")]
    UnstableDiscretization { spectral_radius: f64 },

    #[error("stationary covariance fixed-point residual {residual:.3e} exceeds tolerance")]
    StationaryResidual { residual: f64 },

    #[error("point {point:?} lies within {radius:e} of the polar origin")]
    NearOrigin { point: Vec<f64>, radius: f64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("a gradient recording is already active on this thread")]
    TapeBusy,

    #[error("point {index}: {source}")]
    AtPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch { op, detail: detail.into() }
    }

    pub(crate) fn at_point(index: usize, source: Error) -> Self {
        Error::AtPoint { index, source: Box::new(source) }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NotPositiveDefinite
                | Error::NonFinite(_)
                | Error::UnstableDiscretization { .. }
                | Error::StationaryResidual { .. }
        ) || matches!(self, Error::AtPoint { source, .. } if source.is_numerical())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

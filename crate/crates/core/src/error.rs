use thiserror::Error;

/// Failures surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty-image: the image carries no positive gray mass")]
    EmptyImage,

    #[error("empty-band: no gray mass left inside the band mask")]
    EmptyBand,

    #[error("degenerate-polynomial: all coefficients are zero")]
    DegeneratePolynomial,

    #[error("collapsed-component: component {0} has vanishing proportion")]
    CollapsedComponent(usize),

    #[error("no-structure-detected: no orientation peak survived thresholding")]
    NoStructureDetected,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at pixel ({x}, {y}), component {component}: {what}")]
    NonFinite {
        x: usize,
        y: usize,
        component: usize,
        what: &'static str,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Stable machine-readable tag for this error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyImage => "empty-image",
            Error::EmptyBand => "empty-band",
            Error::DegeneratePolynomial => "degenerate-polynomial",
            Error::CollapsedComponent(_) => "collapsed-component",
            Error::NoStructureDetected => "no-structure-detected",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NonFinite { .. } => "non-finite",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

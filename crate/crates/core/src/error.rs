use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("matrix is rank deficient (pivot {pivot:.3e} below 1e-10)")]
    RankDeficient { pivot: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("policy graph is disconnected ({components} components); split it with connected_components or use TransformPair::for_policy")]
    Disconnected { components: usize },

    #[error("vertices {0} and {1} are not connected")]
    Unreachable(String, String),

    #[error("{what} exceeds the size limit ({size} > {limit}); {hint}")]
    TooLarge { what: &'static str, size: usize, limit: usize, hint: &'static str },

    #[error("{source_name}:{line}: {msg}")]
    Parse { source_name: String, line: usize, msg: String },

    #[error("unknown mechanism `{0}` (expected one of laplace, mm-hier, mm-wavelet, bf-line, bf-line-iso, bf-grid, bf-theta1d, bf-thetamd)")]
    UnknownMechanism(String),

    #[error("workload is not a range workload: {0}")]
    NotRangeWorkload(String),

    #[error("reconstruction check failed: |W A+ A - W| = {0:.3e}")]
    Reconstruction(f64),

    #[error("privacy accounting violated: edge {edge} consumed {spent} > {limit}")]
    Budget { edge: usize, spent: f64, limit: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::RankDeficient { .. } | Error::Reconstruction(_) | Error::Budget { .. } | Error::Io(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

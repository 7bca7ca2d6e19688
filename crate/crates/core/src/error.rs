use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}; only n = 2 and n = 3 are supported")]
    UnsupportedDimension(usize),

    #[error("resolution {0} must be a power of two and at least 8")]
    BadResolution(usize),

    #[error("axis {axis} out of range for a {n}-dimensional grid")]
    AxisOutOfRange { axis: usize, n: usize },

    #[error("fields live on different grids or have incompatible shapes")]
    GridMismatch,

    #[error("metric is not positive definite at grid point {point} (minimum eigenvalue {min_eig:e})")]
    NotPositiveDefinite { point: usize, min_eig: f64 },

    #[error("band limit kmax = {kmax} must be below res/2 = {half}")]
    BandLimitTooLarge { kmax: usize, half: usize },

    #[error("amplitude {amp} too large for a positive definite perturbation in dimension {n}")]
    AmplitudeTooLarge { amp: f64, n: usize },

    #[error("|psi|^2 = {value:e} at grid point {point} is below the floor {floor:e}")]
    SpinorTooSmall { point: usize, value: f64, floor: f64 },

    #[error("{0}")]
    Regime(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

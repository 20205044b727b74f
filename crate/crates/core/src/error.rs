use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// One or more scene or plan invariants were violated.
    #[error("invalid scene: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("target at {range_m:.2} m has a round-trip delay beyond one symbol (max range {max_range_m:.2} m)")]
    RangeAliased { range_m: f64, max_range_m: f64 },

    #[error("GTRI base (grazing + C) = {base} is negative and exponent B = {exponent} is not an integer")]
    NegativeBase { base: f64, exponent: f64 },

    #[error("only {found} peaks available, {wanted} requested")]
    NotEnoughPeaks { found: usize, wanted: usize },

    #[error("covariance rank {rank} is below the required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("temporal steering is collinear with static clutter: {0}")]
    CollinearTemporal(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("cube format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

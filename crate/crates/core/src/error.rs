use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("numerical overflow: {0}")]
    NumericalOverflow(String),

    #[error("degenerate pivot: {0}")]
    DegeneratePivot(String),

    #[error("dense size {size} exceeds cap {cap}")]
    SizeCap { size: u128, cap: usize },

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("oracle returned non-finite value {value} at index {index:?}")]
    NonFinite { index: Vec<usize>, value: f64 },

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("density is not a two-spike comb: {0}")]
    NotDegenerate(String),

    #[error("no spectral gap: eigenvalue ratio {0} must exceed 1")]
    NoGap(f64),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

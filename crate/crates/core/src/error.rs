use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("divergent kernel: alpha = {alpha} must be smaller than d = {d}")]
    DivergentKernel { alpha: f64, d: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis violated at m = {m}: denominator {denominator} vanishes")]
    Hypothesis { m: usize, denominator: String },

    #[error("no positivity threshold for k = {k} within n <= {n_max}")]
    SearchRange { k: usize, n_max: usize },

    #[error("size guard: {0}")]
    SizeGuard(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by a numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

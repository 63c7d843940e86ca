use thiserror::Error;

/// Errors produced by the kernel algebra, the solvers and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// `f'(r)/r` would leave a `1/r` term: the derivative order asked for
    /// exceeds what the kernel's smoothness supports.
    #[error("division by r leaves a non-polynomial remainder (derivative constant term {constant_term})")]
    NonPolynomialDivision { constant_term: String },

    #[error("the integral form of the Wendland function needs k >= 1 (got k = {k})")]
    UnsupportedSmoothness { k: u32 },

    #[error("invalid dimension d = {d}")]
    UnsupportedDimension { d: u32 },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("separation distance needs at least two distinct points")]
    SinglePoint,

    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPolynomialDivision { .. } => "non_polynomial_division",
            Error::UnsupportedSmoothness { .. } => "unsupported_smoothness",
            Error::UnsupportedDimension { .. } => "unsupported_dimension",
            Error::EmptyPointSet => "empty_point_set",
            Error::SinglePoint => "single_point",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::AtLevel { source, .. } => source.code(),
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config { .. } => "config",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }

    /// The level an error was raised at, if any.
    pub fn level(&self) -> Option<usize> {
        match self {
            Error::AtLevel { level, .. } => Some(*level),
            _ => None,
        }
    }

    pub(crate) fn at_level(self, level: usize) -> Error {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

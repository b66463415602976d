use thiserror::Error;

/// Errors raised by the simulator and its analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error(
        "aliasing: walk-off {walk_off:.4e} m over {distance} m exceeds guard band {limit:.4e} m \
         (occupied bandwidth {bandwidth:.4e} 1/m; need lambda*z*B <= span/2)"
    )]
    Aliasing {
        distance: f64,
        bandwidth: f64,
        walk_off: f64,
        limit: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("insufficient baseline: {0}")]
    InsufficientBaseline(String),

    #[error("no significant peak: {0}")]
    NoPeak(String),

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Geometry(_) => "geometry",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::Aliasing { .. } => "aliasing",
            Error::Contract(_) => "contract",
            Error::DegenerateData(_) => "degenerate-data",
            Error::InsufficientBaseline(_) => "insufficient-baseline",
            Error::NoPeak(_) => "no-peak",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Io(_) => 2,
            Error::InsufficientBaseline(_) | Error::NoPeak(_) | Error::DegenerateData(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

use std::path::PathBuf;

/// Errors produced by the registration toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A radicand or discriminant fell outside its domain by more than the
    /// roundoff tolerance.
    #[error("numeric domain error in {what}: value {value:e}")]
    NumericDomain { what: &'static str, value: f64 },

    #[error("no usable eigenvector: every cofactor candidate is below {threshold:e}")]
    DegenerateEigenvector { threshold: f64 },

    #[error("{method} did not converge after {sweeps} sweeps")]
    Convergence { method: &'static str, sweeps: usize },

    #[error("ICP iteration {iteration}: {source}")]
    Icp {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures rooted in numerical trouble rather than bad input or I/O.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NumericDomain { .. }
            | Error::DegenerateEigenvector { .. }
            | Error::Convergence { .. } => true,
            Error::Icp { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// True for failures that came from the filesystem or from malformed files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. }
        )
    }
}

use std::io;
use std::path::PathBuf;

/// Errors produced while parsing a Portable Float Map stream.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PfmError {
    #[error("bad magic: expected \"Pf\" or \"PF\"")]
    BadMagic,
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("scale must be non-zero")]
    ZeroScale,
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Pfm(#[from] PfmError),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid scene spec: {0}")]
    Scene(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("memory is empty")]
    EmptyMemory,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all `Context` wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) => 1,
            Error::NonFinite(_) | Error::Pfm(PfmError::NonFinite { .. }) => 3,
            _ => 2,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with(self, f: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}

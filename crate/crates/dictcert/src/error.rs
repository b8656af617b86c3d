use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad input: wrong shapes, out-of-range parameters, malformed files.
    #[error("{module}: {msg}")]
    Validation { module: &'static str, msg: String },

    /// A Gram matrix that must be inverted is singular.
    #[error("{module}: singular Gram matrix ({what})")]
    Singular { module: &'static str, what: String },

    /// A matrix that must be well conditioned is not.
    #[error("{module}: ill-conditioned {what}")]
    Conditioning { module: &'static str, what: String },

    #[error("{module}: infeasible ({what})")]
    Infeasible { module: &'static str, what: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Validation { module, msg: msg.into() }
    }

    pub fn singular(module: &'static str, what: impl Into<String>) -> Self {
        Error::Singular { module, what: what.into() }
    }

    pub fn conditioning(module: &'static str, what: impl Into<String>) -> Self {
        Error::Conditioning { module, what: what.into() }
    }

    /// Singularity, conditioning and infeasibility are numerical failures;
    /// everything else is a user or I/O error.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Conditioning { .. } | Error::Infeasible { .. }
        )
    }
}

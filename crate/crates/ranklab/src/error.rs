//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors surfaced by the library. CLI exit codes map `Config` to 2,
/// `Dependency` to 3 and oracle/acceptance failures to 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dependency error: missing upstream artifact, run `{0}` first")]
    Dependency(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("missing predictor head for objective `{0}`")]
    MissingHead(String),

    #[error("permutation space {requested} exceeds cap {cap}; use beam search instead")]
    PermutationCap { requested: u128, cap: u128 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI front-end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::TomlParse(_) => 2,
            Error::Dependency(_) => 3,
            _ => 1,
        }
    }
}

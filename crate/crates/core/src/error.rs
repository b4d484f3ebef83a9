use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Counts that make a derived quantity undefined (e.g. zero registered voters).
    #[error("station {station_id}: {message}")]
    Domain { station_id: String, message: String },

    /// Invalid analysis parameter (window, bin width, iteration budget, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input file does not match the column mapping.
    #[error("schema error for field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("duplicate station id `{0}`")]
    DuplicateStation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("profile: {0}")]
    Profile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

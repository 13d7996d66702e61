use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the pipeline.
///
/// Everything except [`Error::Invariant`] is an input problem: a bad file,
/// a bad config value, or data too thin for the requested statistic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate out of range: lat {lat}, lon {lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("cannot read or write '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header mismatch, expected `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{path}:{line}: negative count in column `{column}`")]
    NegativeCount {
        path: PathBuf,
        line: u64,
        column: &'static str,
    },
    #[error("{path}:{line}: unknown station_id `{station_id}`")]
    UnknownStation {
        path: PathBuf,
        line: u64,
        station_id: String,
    },
    #[error("station `{0}` is not in the station registry")]
    StationNotInRegistry(String),
    #[error("station `{0}` has trace flows but no counter boardings")]
    MissingApcStation(String),
    #[error("duplicate station_id `{0}` in registry")]
    DuplicateStation(String),
    #[error("overlapping legs within device-day `{0}`")]
    OverlappingLegs(String),
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("regression is singular: predictor has zero variance")]
    SingularFit,
    #[error("insufficient data: need at least {needed}, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("invalid value: {0}")]
    InvalidValue(&'static str),
    #[error("undefined for empty input: {0}")]
    EmptyInput(&'static str),
    #[error("dimension mismatch: expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// `true` for everything caused by inputs rather than by a bug.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad error category, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate output: {0}")]
    DegenerateOutput(String),

    #[error("window {col_off},{row_off} {width}x{height} is outside raster {raster_width}x{raster_height}")]
    OutOfBounds {
        col_off: usize,
        row_off: usize,
        width: usize,
        height: usize,
        raster_width: usize,
        raster_height: usize,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("format error in field `{field}`: {message}")]
    Format { field: &'static str, message: String },

    #[error("length error: expected {expected} bytes, found {actual}")]
    Length { expected: u64, actual: u64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("footprint `{0}` has no truth label")]
    MissingLabel(String),

    #[error("missing scores for tile ({tile_col}, {tile_row})")]
    MissingScores { tile_col: usize, tile_row: usize },

    #[error("no sampleable tiles: every tile weight is zero")]
    NoSampleableTiles,

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("manifest invariant violated: {0}")]
    ManifestInvariant(String),

    #[error("no footprint overlaps the raster at any searched offset")]
    NoSignal,

    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::Internal(_) => ErrorKind::Internal,
            _ => ErrorKind::Data,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Non-fatal condition surfaced in run reports.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        let w = Warning {
            code: code.to_string(),
            message: message.into(),
        };
        log::warn!("{}: {}", w.code, w.message);
        w
    }
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

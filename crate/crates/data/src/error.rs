use thiserror::Error;

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("pixel ({row}, {col}) is covered by no mesh cell")]
    UncoveredPixel { row: usize, col: usize },
    #[error("degenerate polygon at cell {index}: {reason}")]
    DegeneratePolygon { index: usize, reason: String },
    #[error("mesh has no field {0:?}")]
    UnknownField(String),
    #[error("field {field:?} has {got} values for {cells} cells")]
    FieldLength {
        field: String,
        got: usize,
        cells: usize,
    },
    #[error("raster grid needs n_x >= 2, got {0}")]
    GridTooSmall(usize),
    #[error("degenerate scaler statistics: {0}")]
    DegenerateScaler(String),
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions((f64, f64, f64)),
    #[error("need at least 3 samples to split, got {0}")]
    TooFewSamples(usize),
    #[error("split {0:?} has fraction > 0 but would be empty")]
    EmptySplit(&'static str),
    #[error("manifest validation: {0}")]
    InvalidManifest(String),
    #[error("dataset version {got} unsupported (expected {expected})")]
    VersionMismatch { got: u32, expected: u32 },
    #[error("checksum mismatch for sample {sample:?} field {field:?}")]
    ChecksumMismatch { sample: String, field: String },
    #[error("missing file for sample {sample:?} field {field:?}: {path}")]
    MissingFile {
        sample: String,
        field: String,
        path: String,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

//! Crate-wide error type.

/// Errors produced anywhere in the metric pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // File handling and PLY parsing
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY format: {0}")]
    UnsupportedFormat(String),
    #[error("PLY data ends before the declared element count")]
    TruncatedData,
    #[error("malformed PLY body: {0}")]
    MalformedBody(String),
    #[error("non-finite coordinate encountered")]
    NonFiniteCoordinate,
    #[error("operation requires a non-empty point cloud")]
    EmptyCloud,

    // Projection
    #[error("cannot project a cloud whose bounding box has zero diagonal")]
    DegenerateCloud,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    // Saliency
    #[error("downsampling scale {scale} exceeds image dimensions {rows}x{cols}")]
    ScaleTooLarge {
        rows: usize,
        cols: usize,
        scale: usize,
    },

    // Payload codec
    #[error("bad payload magic")]
    BadMagic,
    #[error("unsupported payload version {0}")]
    UnsupportedVersion(u16),
    #[error("payload checksum mismatch")]
    ChecksumMismatch,
    #[error("payload truncated")]
    Truncated,

    // Quality computation
    #[error("grid dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("map {rows}x{cols} is smaller than the {window}x{window} SSIM window")]
    MapSmallerThanWindow {
        rows: usize,
        cols: usize,
        window: usize,
    },
    #[error("image must be at least 3x3 for Sobel filtering")]
    ImageTooSmall,
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("the two inputs were produced with different parameters")]
    ParamMismatch,

    // Benchmark statistics
    #[error("constant input has no rank variance")]
    ConstantInput,
    #[error("degenerate fit input: {0}")]
    DegenerateInput(String),
    #[error("logistic fit diverged to a non-finite objective")]
    FitDiverged,

    // Manifest-driven evaluation
    #[error("manifest error: {0}")]
    Manifest(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("signal too short: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("empty codebook")]
    EmptyCodebook,

    #[error("stream count {requested} out of range 1..={available}")]
    StreamsOutOfRange { requested: usize, available: usize },

    #[error("empty dropout level list")]
    EmptyLevels,

    #[error("oracle wiener enhancement requires a clean reference")]
    MissingReference,

    #[error("smoothing width {width} exceeds sequence length {frames}")]
    WidthExceedsFrames { width: usize, frames: usize },

    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("reference signal has zero energy")]
    ZeroReference,

    #[error("perceptual entropy of the noisy signal is zero")]
    ZeroEntropy,

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated payload: need {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },

    #[error("trailing bytes after payload: {0}")]
    TrailingBytes(usize),

    #[error("index {index} out of range for codebook size {size}")]
    IndexOutOfRange { index: u32, size: usize },

    #[error("geometry field {field} = {value} does not fit the wire format")]
    GeometryOverflow { field: &'static str, value: u64 },

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

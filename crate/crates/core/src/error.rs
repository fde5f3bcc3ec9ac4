use thiserror::Error;

/// Errors reported by the quantization, framing, simulation, and pipeline
/// layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("shape {shape:?} does not match {len} elements")]
    ShapeMismatch { shape: Vec<usize>, len: usize },
    #[error("unsupported bitwidth {0}")]
    UnsupportedBitwidth(u8),
    #[error("bitwidth {0} cannot be clipped")]
    UnclippableBitwidth(u8),
    #[error("code overflow: code {code} does not fit in {bits} bits")]
    CodeOverflow { code: u32, bits: u8 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate distribution")]
    DegenerateDistribution,
    #[error("empty histogram")]
    EmptyHistogram,
    #[error("invalid histogram: {0}")]
    InvalidHistogram(String),
    #[error("not a frame")]
    NotAFrame,
    #[error("unsupported frame version {0}")]
    BadVersion(u8),
    #[error("corrupt payload")]
    CorruptPayload,
    #[error("short read: need {need} bytes, have {have}")]
    ShortRead { need: usize, have: usize },
    #[error("link down")]
    LinkDown,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

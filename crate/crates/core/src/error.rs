use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedText { line: usize, reason: String },

    #[error("byte offset {offset}: {reason}")]
    MalformedBinary { offset: usize, reason: String },

    #[error("line {line}: timestamp does not fit in 64 bits")]
    TimestampOverflow { line: usize },

    #[error("event {index} at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds {
        index: usize,
        x: u32,
        y: u32,
        width: u16,
        height: u16,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("wrist and middle-finger MCP coincide; palm length is zero")]
    DegeneratePalm,

    #[error("point {joint} has non-positive depth {depth} after the camera transform")]
    NonPositiveDepth { joint: usize, depth: f64 },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

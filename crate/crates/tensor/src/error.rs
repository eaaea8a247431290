use thiserror::Error;

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch: {context}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("channel mismatch: {context}: expected {expected}, got {got}")]
    ChannelMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-positive output extent for input {input} with kernel {kernel}, stride {stride}, padding {padding}")]
    EmptyOutput {
        input: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    #[error("output_padding {output_padding} must be < stride {stride}")]
    OutputPaddingTooLarge {
        output_padding: usize,
        stride: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("batch variance is exactly zero with eps = 0 (channel {channel})")]
    ZeroVariance { channel: usize },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("backward on a tensor with no recorded tape")]
    NoTape,
    #[error("tape already consumed: one backward pass per forward pass")]
    TapeConsumed,
    #[error("parameter store: {0}")]
    Param(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint metadata: {0}")]
    Json(#[from] serde_json::Error),
}

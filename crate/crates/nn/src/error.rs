use thiserror::Error;

pub type Result<T> = std::result::Result<T, NnError>;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] cht_tensor::TensorError),
    #[error("L_dense must have odd length >= 1, got {0}")]
    EvenDepth(usize),
    #[error("resolution {resolution:?} too small for {n_enc} encode stages (needs extents >= {min})")]
    ResolutionTooSmall {
        resolution: (usize, usize),
        n_enc: usize,
        min: usize,
    },
    #[error("transition input must have >= 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("decode target {target} unreachable from extent {from} (reachable: {lo} or {hi})")]
    UnreachableTarget {
        target: usize,
        from: usize,
        lo: usize,
        hi: usize,
    },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("input shape {got:?} does not match model ({expected:?})")]
    InputShape {
        got: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("code dimension extent reached zero")]
    ZeroExtent,
    #[error("model config i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model config: {0}")]
    Json(#[from] serde_json::Error),
}

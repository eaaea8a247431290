//! Encoder-decoder building blocks and the assembled field-prediction
//! network.
//!
//! The architecture is built from dense blocks (bn -> relu -> conv k3s1p1,
//! each layer appending `K` feature maps), channel-halving transition layers
//! (encode: strided conv, decode: transpose conv with recorded output
//! padding), an initial k7s2p3 convolution, and a final decoding layer that
//! emits the single-channel full-resolution field. Networks optionally apply
//! an output geometry mask and can be chained so a temperature model
//! consumes a velocity model's prediction as a second input channel.

mod blocks;
mod error;
mod model;

pub use blocks::{
    BatchNorm, Conv2d, ConvTranspose2d, DecodeTransition, DenseBlock, DenseBlockSpec,
    EncodeTransition, FinalDecode, FwdCtx,
};
pub use error::{NnError, Result};
pub use model::{
    build_model, code_dimension, two_stage_predict, FieldModel, FieldRole, ModelConfig,
    ModelSpec, TrainStep,
};

/// Spatial extent after one stride-2 k3p1 convolution (or the k7s2p3 initial
/// convolution): ceil(h / 2).
pub fn ceil_half(h: usize) -> usize {
    h.div_ceil(2)
}

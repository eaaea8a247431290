//! Dense-tensor numeric core with reverse-mode automatic differentiation.
//!
//! Provides exactly the operator set a dense-block encoder-decoder network
//! needs: 2-D convolution and transpose convolution, batch normalization,
//! ReLU, dropout, channel concatenation, broadcast multiply/add, and scalar
//! reductions. Forward passes optionally record onto a [`Tape`]; a single
//! [`backward`] call per tape populates gradients on every leaf that was
//! registered with `requires_grad`.
//!
//! Training runs in `f32`; gradient-check tests instantiate the same code at
//! `f64`, where central finite differences are reliable.

mod element;
mod error;
mod param;
mod tape;
mod tensor;

pub mod gradcheck;
pub mod init;
pub mod ops;

pub use element::Element;
pub use error::{Result, TensorError};
pub use param::{ParamId, ParamRole, ParamStore, Parameter};
pub use tape::{backward, Tape};
pub use tensor::Tensor;

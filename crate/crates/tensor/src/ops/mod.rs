//! Differentiable tensor operations.
//!
//! Every op validates shapes, computes the forward value, and — when an
//! input is tracked on a tape — records a backward rule capturing whatever
//! forward data it needs. Debug builds assert finiteness of every op output;
//! release builds propagate non-finite values.

mod basic;
mod conv;
mod linalg;
mod norm;

pub use basic::{
    add, concat_channels, dropout, elementwise_mul, mean_all, relu, scale, sub, sum_all,
};
pub use conv::{conv2d, conv_out_extent, conv_transpose2d, conv_transpose_out_extent};
pub use norm::{batch_norm, BnUpdate};

use crate::tape::NodeRef;
use crate::{Element, Tensor};

#[inline]
pub(crate) fn debug_check_finite<T: Element>(op: &str, data: &[T]) {
    if cfg!(debug_assertions) {
        for (i, v) in data.iter().enumerate() {
            assert!(v.is_finite(), "{op}: non-finite output {v} at flat index {i}");
        }
    }
}

/// The tape shared by a set of op inputs (ops never bridge two tapes).
pub(crate) fn joint_node<'a, T: Element>(
    inputs: &[&'a Tensor<T>],
) -> Option<&'a NodeRef<T>> {
    let mut found: Option<&NodeRef<T>> = None;
    for t in inputs {
        if let Some(node) = t.node.as_ref() {
            if let Some(prev) = found {
                assert!(
                    prev.tape.same_tape(&node.tape),
                    "op inputs recorded on different tapes"
                );
            } else {
                found = Some(node);
            }
        }
    }
    found
}

pub(crate) fn node_id<T: Element>(t: &Tensor<T>) -> Option<usize> {
    t.node.as_ref().map(|n| n.id)
}

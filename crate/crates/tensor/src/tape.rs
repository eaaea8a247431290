use std::cell::RefCell;
use std::rc::Rc;

use crate::{Element, Result, Tensor, TensorError};

/// Backward rule of a recorded operation: receives the output gradient and
/// accumulates contributions into the parents' buffers.
pub(crate) type BackFn<T> = Box<dyn FnOnce(&[T], &mut GradSink<'_, T>)>;

struct TapeNode<T> {
    len: usize,
    grad: Option<Vec<T>>,
    back: Option<BackFn<T>>,
}

struct TapeInner<T> {
    nodes: Vec<TapeNode<T>>,
    consumed: bool,
}

/// Gradient tape: ordered record of a forward pass. Nodes appear in
/// topological order by construction (an op's inputs are recorded before its
/// output). One backward pass per tape; re-running without a fresh forward
/// is an error.
///
/// Cloning the handle shares the tape. Not `Send`: a tape is confined to the
/// worker that runs the forward pass.
pub struct Tape<T: Element> {
    inner: Rc<RefCell<TapeInner<T>>>,
}

impl<T: Element> Clone for Tape<T> {
    fn clone(&self) -> Self {
        Tape {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                consumed: false,
            })),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn push_leaf(&self, len: usize) -> usize {
        self.push_node(len, None)
    }

    pub(crate) fn push_node(&self, len: usize, back: Option<BackFn<T>>) -> usize {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(TapeNode {
            len,
            grad: None,
            back,
        });
        inner.nodes.len() - 1
    }

    pub(crate) fn grad_of(&self, id: usize) -> Option<Vec<T>> {
        self.inner.borrow().nodes[id].grad.clone()
    }

    pub(crate) fn same_tape(&self, other: &Tape<T>) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    fn run_backward(&self, root: usize) -> Result<()> {
        let mut inner = self.inner.borrow_mut();
        if inner.consumed {
            return Err(TensorError::TapeConsumed);
        }
        inner.consumed = true;

        let lens: Vec<usize> = inner.nodes.iter().map(|n| n.len).collect();
        let mut grads: Vec<Option<Vec<T>>> = (0..lens.len()).map(|_| None).collect();
        grads[root] = Some(vec![T::one(); 1]);

        for id in (0..=root).rev() {
            let grad = match grads[id].take() {
                Some(g) => g,
                None => continue, // no gradient flows through this node
            };
            if let Some(back) = inner.nodes[id].back.take() {
                let mut sink = GradSink {
                    grads: &mut grads,
                    lens: &lens,
                };
                back(&grad, &mut sink);
            }
            inner.nodes[id].grad = Some(grad);
        }
        Ok(())
    }
}

/// Accumulator the backward rules write into.
pub(crate) struct GradSink<'a, T> {
    grads: &'a mut [Option<Vec<T>>],
    lens: &'a [usize],
}

impl<T: Element> GradSink<'_, T> {
    /// Runs `f` on the (lazily zero-initialized) gradient buffer of node `id`.
    /// Contributions are additive across multiple uses of a node.
    pub(crate) fn accumulate(&mut self, id: usize, f: impl FnOnce(&mut [T])) {
        let buf = self.grads[id].get_or_insert_with(|| vec![T::zero(); self.lens[id]]);
        f(buf);
    }
}

/// Propagates gradients from a scalar loss back to every tracked leaf of its
/// tape. Accumulation across multiple uses of a node is additive.
pub fn backward<T: Element>(loss: &Tensor<T>) -> Result<()> {
    let node = loss.node.as_ref().ok_or(TensorError::NoTape)?;
    if loss.len() != 1 {
        return Err(TensorError::NonScalarLoss(loss.shape().to_vec()));
    }
    node.tape.run_backward(node.id)
}

/// Tape linkage carried by tracked tensors.
pub(crate) struct NodeRef<T: Element> {
    pub(crate) tape: Tape<T>,
    pub(crate) id: usize,
}

impl<T: Element> Clone for NodeRef<T> {
    fn clone(&self) -> Self {
        NodeRef {
            tape: self.tape.clone(),
            id: self.id,
        }
    }
}

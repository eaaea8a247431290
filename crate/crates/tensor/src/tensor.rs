use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tape::{NodeRef, Tape};
use crate::{Element, Result, TensorError};

/// Dense row-major N-D array. Immutable after creation; an optional tape
/// linkage makes it participate in reverse-mode differentiation.
#[derive(Clone)]
pub struct Tensor<T: Element> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
    pub(crate) node: Option<NodeRef<T>>,
}

impl<T: Element> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Self {
        let len: usize = shape.iter().product();
        assert_eq!(
            len,
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Self {
            shape,
            data: Arc::new(data),
            node: None,
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![T::zero(); len])
    }

    pub fn full(shape: Vec<usize>, value: T) -> Self {
        let len = shape.iter().product();
        Self::new(shape, vec![value; len])
    }

    pub fn scalar(value: T) -> Self {
        Self::new(vec![1], vec![value])
    }

    /// Standard-normal samples, deterministic for a given rng state.
    pub fn randn(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| {
                // Box-Muller on two uniforms keeps the element type generic.
                let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                T::from_f64((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
            })
            .collect();
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_arc(&self) -> Arc<Vec<T>> {
        Arc::clone(&self.data)
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> T {
        assert_eq!(self.len(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    /// Element by (n, c, y, x) index of a 4-D tensor.
    pub fn at4(&self, n: usize, c: usize, y: usize, x: usize) -> T {
        assert_eq!(self.shape.len(), 4);
        let (cs, ys, xs) = (self.shape[1], self.shape[2], self.shape[3]);
        self.data[((n * cs + c) * ys + y) * xs + x]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data.to_vec()
    }

    /// Registers this tensor on `tape` as a differentiable leaf and returns
    /// the tracked handle. Gradients accumulate on the tape and are read back
    /// through [`Tensor::grad`] after `backward`.
    pub fn requires_grad(&self, tape: &Tape<T>) -> Tensor<T> {
        let id = tape.push_leaf(self.len());
        Tensor {
            shape: self.shape.clone(),
            data: Arc::clone(&self.data),
            node: Some(NodeRef {
                tape: tape.clone(),
                id,
            }),
        }
    }

    pub fn is_tracked(&self) -> bool {
        self.node.is_some()
    }

    /// Gradient accumulated by the last `backward`, if this tensor is tracked
    /// and the pass reached it.
    pub fn grad(&self) -> Option<Vec<T>> {
        let node = self.node.as_ref()?;
        node.tape.grad_of(node.id)
    }

    /// Same values, no tape linkage: gradients do not flow past this point.
    pub fn detach(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: Arc::clone(&self.data),
            node: None,
        }
    }

    /// View with a new shape of identical length (row-major order preserved).
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Tensor<T>> {
        let len: usize = shape.iter().product();
        if len != self.len() {
            return Err(TensorError::ShapeMismatch {
                context: "reshape",
                lhs: self.shape.clone(),
                rhs: shape,
            });
        }
        Ok(Tensor {
            shape,
            data: Arc::clone(&self.data),
            node: self.node.clone(),
        })
    }

    pub(crate) fn with_node(shape: Vec<usize>, data: Vec<T>, node: Option<NodeRef<T>>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data: Arc::new(data),
            node,
        }
    }
}

impl<T: Element> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("dtype", &T::DTYPE)
            .field("tracked", &self.node.is_some())
            .finish()
    }
}

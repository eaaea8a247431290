use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use crate::ops::{debug_check_finite, joint_node, node_id};
use crate::tape::NodeRef;
use crate::{Element, Result, Tensor, TensorError};

/// How two operand shapes line up: identical, or one side broadcasting a
/// single channel across the other's channel axis (N,1,H,W vs N,C,H,W).
#[derive(Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Equal,
    LhsChan,
    RhsChan,
}

fn broadcast_kind(context: &'static str, a: &[usize], b: &[usize]) -> Result<Bcast> {
    if a == b {
        return Ok(Bcast::Equal);
    }
    if a.len() == 4
        && b.len() == 4
        && a[0] == b[0]
        && a[2] == b[2]
        && a[3] == b[3]
        && (a[1] == 1 || b[1] == 1)
    {
        return Ok(if a[1] == 1 {
            Bcast::LhsChan
        } else {
            Bcast::RhsChan
        });
    }
    Err(TensorError::ShapeMismatch {
        context,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    })
}

fn record1<T: Element>(
    parent: Option<&NodeRef<T>>,
    shape: Vec<usize>,
    data: Vec<T>,
    back: impl FnOnce(usize) -> crate::tape::BackFn<T>,
) -> Tensor<T> {
    let node = parent.map(|p| {
        let id = p.tape.push_node(data.len(), Some(back(p.id)));
        NodeRef {
            tape: p.tape.clone(),
            id,
        }
    });
    Tensor::with_node(shape, data, node)
}

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let out: Vec<T> = x
        .data()
        .iter()
        .map(|&v| if v > T::zero() { v } else { T::zero() })
        .collect();
    debug_check_finite("relu", &out);
    let xd = x.data_arc();
    record1(x.node.as_ref(), x.shape().to_vec(), out, move |pid| {
        Box::new(move |g, sink| {
            sink.accumulate(pid, |acc| {
                for i in 0..g.len() {
                    if xd[i] > T::zero() {
                        acc[i] += g[i];
                    }
                }
            })
        })
    })
}

/// Inverted dropout: in training mode each element is zeroed with
/// probability `p` and survivors are scaled by 1/(1-p); in eval mode (or at
/// p = 0) the op is the identity. Draws one `f64` per element so the mask is
/// identical across element types for a given rng state.
pub fn dropout<T: Element>(
    x: &Tensor<T>,
    p: f64,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&p) {
        return Err(TensorError::InvalidArg(format!(
            "dropout rate must satisfy 0 <= p < 1, got {p}"
        )));
    }
    if !training || p == 0.0 {
        return Ok(x.clone());
    }
    let keep_scale = T::from_f64(1.0 / (1.0 - p));
    let mask: Arc<Vec<T>> = Arc::new(
        (0..x.len())
            .map(|_| {
                if rng.gen::<f64>() >= p {
                    keep_scale
                } else {
                    T::zero()
                }
            })
            .collect(),
    );
    let out: Vec<T> = x
        .data()
        .iter()
        .zip(mask.iter())
        .map(|(&v, &m)| v * m)
        .collect();
    debug_check_finite("dropout", &out);
    let mask_b = Arc::clone(&mask);
    Ok(record1(
        x.node.as_ref(),
        x.shape().to_vec(),
        out,
        move |pid| {
            Box::new(move |g, sink| {
                sink.accumulate(pid, |acc| {
                    for i in 0..g.len() {
                        acc[i] += g[i] * mask_b[i];
                    }
                })
            })
        },
    ))
}

/// Concatenates two 4-D tensors along the channel axis.
pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 4
        || sb.len() != 4
        || sa[0] != sb[0]
        || sa[2] != sb[2]
        || sa[3] != sb[3]
    {
        return Err(TensorError::ShapeMismatch {
            context: "concat_channels",
            lhs: sa.to_vec(),
            rhs: sb.to_vec(),
        });
    }
    let (n, ca, cb, hw) = (sa[0], sa[1], sb[1], sa[2] * sa[3]);
    let mut out = Vec::with_capacity(n * (ca + cb) * hw);
    for i in 0..n {
        out.extend_from_slice(&a.data()[i * ca * hw..(i + 1) * ca * hw]);
        out.extend_from_slice(&b.data()[i * cb * hw..(i + 1) * cb * hw]);
    }
    let shape = vec![n, ca + cb, sa[2], sa[3]];
    let node = joint_node(&[a, b]).map(|nr| {
        let (pa, pb) = (node_id(a), node_id(b));
        let id = nr.tape.push_node(
            out.len(),
            Some(Box::new(move |g: &[T], sink: &mut crate::tape::GradSink<'_, T>| {
                let block = (ca + cb) * hw;
                if let Some(pa) = pa {
                    sink.accumulate(pa, |acc| {
                        for i in 0..n {
                            let src = &g[i * block..i * block + ca * hw];
                            let dst = &mut acc[i * ca * hw..(i + 1) * ca * hw];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    });
                }
                if let Some(pb) = pb {
                    sink.accumulate(pb, |acc| {
                        for i in 0..n {
                            let src = &g[i * block + ca * hw..(i + 1) * block];
                            let dst = &mut acc[i * cb * hw..(i + 1) * cb * hw];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    });
                }
            })),
        );
        NodeRef {
            tape: nr.tape.clone(),
            id,
        }
    });
    Ok(Tensor::with_node(shape, out, node))
}

macro_rules! binary_op {
    ($name:ident, $ctx:literal, $fwd:expr, $back_lhs:expr, $back_rhs:expr) => {
        pub fn $name<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
            let kind = broadcast_kind($ctx, a.shape(), b.shape())?;
            let out_shape = match kind {
                Bcast::Equal | Bcast::RhsChan => a.shape().to_vec(),
                Bcast::LhsChan => b.shape().to_vec(),
            };
            let (ad, bd) = (a.data(), b.data());
            let f = $fwd;
            let out: Vec<T> = match kind {
                Bcast::Equal => ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
                Bcast::LhsChan | Bcast::RhsChan => {
                    let (n, c, hw) = (out_shape[0], out_shape[1], out_shape[2] * out_shape[3]);
                    let mut v = Vec::with_capacity(n * c * hw);
                    for i in 0..n {
                        for ci in 0..c {
                            for p in 0..hw {
                                let (x, y) = match kind {
                                    Bcast::LhsChan => (ad[i * hw + p], bd[(i * c + ci) * hw + p]),
                                    _ => (ad[(i * c + ci) * hw + p], bd[i * hw + p]),
                                };
                                v.push(f(x, y));
                            }
                        }
                    }
                    v
                }
            };
            debug_check_finite($ctx, &out);
            let node = joint_node(&[a, b]).map(|nr| {
                let (pa, pb) = (node_id(a), node_id(b));
                let (ad, bd) = (a.data_arc(), b.data_arc());
                let (n, c, hw) = if out_shape.len() == 4 {
                    (out_shape[0], out_shape[1], out_shape[2] * out_shape[3])
                } else {
                    (1, 1, out_shape.iter().product())
                };
                let id = nr.tape.push_node(
                    out.len(),
                    Some(Box::new(
                        move |g: &[T], sink: &mut crate::tape::GradSink<'_, T>| {
                            let gl = $back_lhs;
                            let gr = $back_rhs;
                            if let Some(pa) = pa {
                                sink.accumulate(pa, |acc| match kind {
                                    Bcast::Equal | Bcast::RhsChan => {
                                        for i in 0..g.len() {
                                            let other = match kind {
                                                Bcast::Equal => bd[i],
                                                _ => {
                                                    let p = i % hw;
                                                    let ni = i / (c * hw);
                                                    bd[ni * hw + p]
                                                }
                                            };
                                            acc[i] += gl(g[i], ad[i], other);
                                        }
                                    }
                                    Bcast::LhsChan => {
                                        for i in 0..n {
                                            for ci in 0..c {
                                                for p in 0..hw {
                                                    let gi = (i * c + ci) * hw + p;
                                                    acc[i * hw + p] += gl(
                                                        g[gi],
                                                        ad[i * hw + p],
                                                        bd[gi],
                                                    );
                                                }
                                            }
                                        }
                                    }
                                });
                            }
                            if let Some(pb) = pb {
                                sink.accumulate(pb, |acc| match kind {
                                    Bcast::Equal | Bcast::LhsChan => {
                                        for i in 0..g.len() {
                                            let other = match kind {
                                                Bcast::Equal => ad[i],
                                                _ => {
                                                    let p = i % hw;
                                                    let ni = i / (c * hw);
                                                    ad[ni * hw + p]
                                                }
                                            };
                                            acc[i] += gr(g[i], other, bd[i]);
                                        }
                                    }
                                    Bcast::RhsChan => {
                                        for i in 0..n {
                                            for ci in 0..c {
                                                for p in 0..hw {
                                                    let gi = (i * c + ci) * hw + p;
                                                    acc[i * hw + p] += gr(
                                                        g[gi],
                                                        ad[gi],
                                                        bd[i * hw + p],
                                                    );
                                                }
                                            }
                                        }
                                    }
                                });
                            }
                        },
                    )),
                );
                NodeRef {
                    tape: nr.tape.clone(),
                    id,
                }
            });
            Ok(Tensor::with_node(out_shape, out, node))
        }
    };
}

// grad closures receive (g, lhs_value, rhs_value) at the *output* position.
binary_op!(
    elementwise_mul,
    "elementwise_mul",
    |x: T, y: T| x * y,
    |g: T, _x: T, y: T| g * y,
    |g: T, x: T, _y: T| g * x
);
binary_op!(
    add,
    "add",
    |x: T, y: T| x + y,
    |g: T, _x: T, _y: T| g,
    |g: T, _x: T, _y: T| g
);
binary_op!(
    sub,
    "sub",
    |x: T, y: T| x - y,
    |g: T, _x: T, _y: T| g,
    |g: T, _x: T, _y: T| -g
);

/// Multiplies every element by a constant.
pub fn scale<T: Element>(x: &Tensor<T>, factor: T) -> Tensor<T> {
    let out: Vec<T> = x.data().iter().map(|&v| v * factor).collect();
    debug_check_finite("scale", &out);
    record1(x.node.as_ref(), x.shape().to_vec(), out, move |pid| {
        Box::new(move |g, sink| {
            sink.accumulate(pid, |acc| {
                for i in 0..g.len() {
                    acc[i] += g[i] * factor;
                }
            })
        })
    })
}

pub fn sum_all<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let mut s = T::zero();
    for &v in x.data() {
        s += v;
    }
    debug_check_finite("sum_all", &[s]);
    record1(x.node.as_ref(), vec![1], vec![s], move |pid| {
        Box::new(move |g, sink| {
            let gv = g[0];
            sink.accumulate(pid, |acc| {
                for a in acc.iter_mut() {
                    *a += gv;
                }
            })
        })
    })
}

pub fn mean_all<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let len = x.len();
    let inv = T::from_usize(len).recip();
    let mut s = T::zero();
    for &v in x.data() {
        s += v;
    }
    let m = s * inv;
    debug_check_finite("mean_all", &[m]);
    record1(x.node.as_ref(), vec![1], vec![m], move |pid| {
        Box::new(move |g, sink| {
            let gv = g[0] * inv;
            sink.accumulate(pid, |acc| {
                for a in acc.iter_mut() {
                    *a += gv;
                }
            })
        })
    })
}

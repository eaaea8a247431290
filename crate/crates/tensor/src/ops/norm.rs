use std::sync::Arc;

use crate::ops::{debug_check_finite, joint_node, node_id};
use crate::tape::NodeRef;
use crate::{Element, Result, Tensor, TensorError};

/// Running-statistic values produced by a training-mode batch norm; the
/// caller owns the buffers and decides when to store them.
pub struct BnUpdate<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

fn check_channel_param<T: Element>(
    context: &'static str,
    c: usize,
    param: &[T],
) -> Result<()> {
    if param.len() != c {
        return Err(TensorError::ChannelMismatch {
            context,
            expected: c,
            got: param.len(),
        });
    }
    Ok(())
}

/// Batch normalization over (N, H, W) per channel.
///
/// Training mode normalizes by batch statistics (population variance) and
/// returns the exponentially averaged running statistics as a [`BnUpdate`];
/// eval mode normalizes by the supplied running statistics and returns no
/// update. Differentiable w.r.t. input, scale, and shift in both modes.
#[allow(clippy::too_many_arguments)]
pub fn batch_norm<T: Element>(
    input: &Tensor<T>,
    scale: &Tensor<T>,
    shift: &Tensor<T>,
    running_mean: &[T],
    running_var: &[T],
    training: bool,
    eps: T,
    momentum: T,
) -> Result<(Tensor<T>, Option<BnUpdate<T>>)> {
    if input.shape().len() != 4 {
        return Err(TensorError::ShapeMismatch {
            context: "batch_norm",
            lhs: input.shape().to_vec(),
            rhs: vec![0, 0, 0, 0],
        });
    }
    let (n, c, hh, ww) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    check_channel_param("batch_norm scale", c, scale.data())?;
    check_channel_param("batch_norm shift", c, shift.data())?;
    check_channel_param("batch_norm running_mean", c, running_mean)?;
    check_channel_param("batch_norm running_var", c, running_var)?;

    let hw = hh * ww;
    let m = n * hw;
    let xd = input.data();

    let (mean, var, update) = if training {
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        let inv_m = T::from_usize(m).recip();
        for ci in 0..c {
            let mut s = T::zero();
            for ni in 0..n {
                for &v in &xd[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    s += v;
                }
            }
            mean[ci] = s * inv_m;
            let mut sq = T::zero();
            for ni in 0..n {
                for &v in &xd[(ni * c + ci) * hw..(ni * c + ci + 1) * hw] {
                    let d = v - mean[ci];
                    sq += d * d;
                }
            }
            var[ci] = sq * inv_m;
            if eps == T::zero() && var[ci] == T::zero() {
                return Err(TensorError::ZeroVariance { channel: ci });
            }
        }
        let one_minus = T::one() - momentum;
        let update = BnUpdate {
            mean: (0..c)
                .map(|ci| one_minus * running_mean[ci] + momentum * mean[ci])
                .collect(),
            var: (0..c)
                .map(|ci| one_minus * running_var[ci] + momentum * var[ci])
                .collect(),
        };
        (mean, var, Some(update))
    } else {
        (running_mean.to_vec(), running_var.to_vec(), None)
    };

    let inv_std: Vec<T> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
    let mut xhat = vec![T::zero(); xd.len()];
    let mut out = vec![T::zero(); xd.len()];
    let (sd, bd) = (scale.data(), shift.data());
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * hw;
            let (mu, inv, sc, sh) = (mean[ci], inv_std[ci], sd[ci], bd[ci]);
            for p in 0..hw {
                let h = (xd[base + p] - mu) * inv;
                xhat[base + p] = h;
                out[base + p] = sc * h + sh;
            }
        }
    }
    debug_check_finite("batch_norm", &out);

    let node = joint_node(&[input, scale, shift]).map(|nr| {
        let (pi, ps, pb) = (node_id(input), node_id(scale), node_id(shift));
        let xhat = Arc::new(xhat);
        let inv_std = inv_std.clone();
        let scale_v = sd.to_vec();
        let id = nr.tape.push_node(
            out.len(),
            Some(Box::new(
                move |g: &[T], sink: &mut crate::tape::GradSink<'_, T>| {
                    let inv_m = T::from_usize(m).recip();
                    if let Some(pi) = pi {
                        sink.accumulate(pi, |acc| {
                            for ci in 0..c {
                                let (inv, sc) = (inv_std[ci], scale_v[ci]);
                                if training {
                                    // d/dx of normalization by batch statistics
                                    let mut sum_g = T::zero();
                                    let mut sum_gh = T::zero();
                                    for ni in 0..n {
                                        let base = (ni * c + ci) * hw;
                                        for p in 0..hw {
                                            sum_g += g[base + p];
                                            sum_gh += g[base + p] * xhat[base + p];
                                        }
                                    }
                                    let mg = sum_g * inv_m;
                                    let mgh = sum_gh * inv_m;
                                    for ni in 0..n {
                                        let base = (ni * c + ci) * hw;
                                        for p in 0..hw {
                                            acc[base + p] += sc
                                                * inv
                                                * (g[base + p] - mg - xhat[base + p] * mgh);
                                        }
                                    }
                                } else {
                                    for ni in 0..n {
                                        let base = (ni * c + ci) * hw;
                                        for p in 0..hw {
                                            acc[base + p] += g[base + p] * sc * inv;
                                        }
                                    }
                                }
                            }
                        });
                    }
                    if let Some(ps) = ps {
                        sink.accumulate(ps, |acc| {
                            for ci in 0..c {
                                let mut s = T::zero();
                                for ni in 0..n {
                                    let base = (ni * c + ci) * hw;
                                    for p in 0..hw {
                                        s += g[base + p] * xhat[base + p];
                                    }
                                }
                                acc[ci] += s;
                            }
                        });
                    }
                    if let Some(pb) = pb {
                        sink.accumulate(pb, |acc| {
                            for ci in 0..c {
                                let mut s = T::zero();
                                for ni in 0..n {
                                    let base = (ni * c + ci) * hw;
                                    for p in 0..hw {
                                        s += g[base + p];
                                    }
                                }
                                acc[ci] += s;
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
    Ok((
        Tensor::with_node(vec![n, c, hh, ww], out, node),
        update,
    ))
}

use rayon::prelude::*;

use crate::ops::linalg::{col2im_acc, im2col, matmul_acc, matmul_nt_acc, matmul_tn_acc};
use crate::ops::{debug_check_finite, joint_node, node_id};
use crate::tape::NodeRef;
use crate::{Element, Result, Tensor, TensorError};

/// Output extent of a convolution: floor((h + 2*pad - k)/stride) + 1.
pub fn conv_out_extent(h: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let num = h + 2 * pad;
    if num < k {
        return None;
    }
    Some((num - k) / stride + 1)
}

/// Output extent of a transpose convolution:
/// (h - 1)*stride - 2*pad + k + output_padding.
pub fn conv_transpose_out_extent(
    h: usize,
    k: usize,
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Option<usize> {
    let v = ((h - 1) * stride + k + output_padding) as isize - 2 * pad as isize;
    (v > 0).then_some(v as usize)
}

struct ConvDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    f: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

fn check_conv_args<T: Element>(
    context: &'static str,
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    kernel_in_axis: usize,
    bias_len: usize,
    bias: Option<&Tensor<T>>,
    stride: usize,
) -> Result<()> {
    if input.shape().len() != 4 || kernel.shape().len() != 4 {
        return Err(TensorError::ShapeMismatch {
            context,
            lhs: input.shape().to_vec(),
            rhs: kernel.shape().to_vec(),
        });
    }
    let ks = kernel.shape();
    if ks[2] != ks[3] || ks[2] < 1 {
        return Err(TensorError::InvalidArg(format!(
            "{context}: kernel must be square and non-empty, got {ks:?}"
        )));
    }
    if stride < 1 {
        return Err(TensorError::InvalidArg(format!(
            "{context}: stride must be >= 1"
        )));
    }
    if ks[kernel_in_axis] != input.shape()[1] {
        return Err(TensorError::ChannelMismatch {
            context,
            expected: ks[kernel_in_axis],
            got: input.shape()[1],
        });
    }
    if let Some(b) = bias {
        if b.shape() != [bias_len] {
            return Err(TensorError::ShapeMismatch {
                context,
                lhs: b.shape().to_vec(),
                rhs: vec![bias_len],
            });
        }
    }
    Ok(())
}

/// 2-D convolution with zero padding. Input [N,C,H,W], kernel [F,C,k,k],
/// optional bias [F]. Differentiable w.r.t. input, kernel, and bias.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let f = kernel.shape()[0];
    check_conv_args("conv2d", input, kernel, 1, f, bias, stride)?;
    let (n, c, h, w) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let k = kernel.shape()[2];
    let oh = conv_out_extent(h, k, stride, padding).ok_or(TensorError::EmptyOutput {
        input: h,
        kernel: k,
        stride,
        padding,
    })?;
    let ow = conv_out_extent(w, k, stride, padding).ok_or(TensorError::EmptyOutput {
        input: w,
        kernel: k,
        stride,
        padding,
    })?;
    let dims = ConvDims {
        n,
        c,
        h,
        w,
        f,
        k,
        stride,
        pad: padding,
        oh,
        ow,
    };

    let ckk = c * k * k;
    let out_plane = f * oh * ow;
    let mut out = vec![T::zero(); n * out_plane];
    let xd = input.data();
    let kd = kernel.data();
    let bd = bias.map(|b| b.data().to_vec());
    out.par_chunks_mut(out_plane).enumerate().for_each(|(i, dst)| {
        let mut cols = vec![T::zero(); ckk * oh * ow];
        im2col(
            &xd[i * c * h * w..(i + 1) * c * h * w],
            c,
            h,
            w,
            k,
            stride,
            padding,
            oh,
            ow,
            &mut cols,
        );
        matmul_acc(kd, &cols, f, ckk, oh * ow, dst);
        if let Some(b) = &bd {
            for fi in 0..f {
                let bv = b[fi];
                for o in dst[fi * oh * ow..(fi + 1) * oh * ow].iter_mut() {
                    *o += bv;
                }
            }
        }
    });
    debug_check_finite("conv2d", &out);

    let mut inputs: Vec<&Tensor<T>> = vec![input, kernel];
    if let Some(b) = bias {
        inputs.push(b);
    }
    let node = joint_node(&inputs).map(|nr| {
        let (pi, pk, pb) = (node_id(input), node_id(kernel), bias.and_then(node_id));
        let xd = input.data_arc();
        let kd = kernel.data_arc();
        let id = nr.tape.push_node(
            out.len(),
            Some(Box::new(
                move |g: &[T], sink: &mut crate::tape::GradSink<'_, T>| {
                    conv2d_backward(g, &xd, &kd, &dims, pi, pk, pb, sink);
                },
            )),
        );
        NodeRef {
            tape: nr.tape.clone(),
            id,
        }
    });
    Ok(Tensor::with_node(vec![n, f, oh, ow], out, node))
}

#[allow(clippy::too_many_arguments)]
fn conv2d_backward<T: Element>(
    g: &[T],
    xd: &[T],
    kd: &[T],
    dims: &ConvDims,
    pi: Option<usize>,
    pk: Option<usize>,
    pb: Option<usize>,
    sink: &mut crate::tape::GradSink<'_, T>,
) {
    let ConvDims {
        n,
        c,
        h,
        w,
        f,
        k,
        stride,
        pad,
        oh,
        ow,
    } = *dims;
    let ckk = c * k * k;
    let ohw = oh * ow;

    if pk.is_some() || pi.is_some() {
        // Per-sample partials computed in parallel, reduced in index order so
        // the result does not depend on scheduling.
        let parts: Vec<(Option<Vec<T>>, Option<Vec<T>>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let gi = &g[i * f * ohw..(i + 1) * f * ohw];
                let mut gw = None;
                let mut gx = None;
                if pk.is_some() {
                    let mut cols = vec![T::zero(); ckk * ohw];
                    im2col(
                        &xd[i * c * h * w..(i + 1) * c * h * w],
                        c,
                        h,
                        w,
                        k,
                        stride,
                        pad,
                        oh,
                        ow,
                        &mut cols,
                    );
                    let mut buf = vec![T::zero(); f * ckk];
                    matmul_nt_acc(gi, &cols, f, ohw, ckk, &mut buf);
                    gw = Some(buf);
                }
                if pi.is_some() {
                    let mut cols_g = vec![T::zero(); ckk * ohw];
                    matmul_tn_acc(kd, gi, ckk, f, ohw, &mut cols_g);
                    let mut buf = vec![T::zero(); c * h * w];
                    col2im_acc(&cols_g, c, h, w, k, stride, pad, oh, ow, &mut buf);
                    gx = Some(buf);
                }
                (gw, gx)
            })
            .collect();
        if let Some(pk) = pk {
            sink.accumulate(pk, |acc| {
                for (gw, _) in &parts {
                    if let Some(gw) = gw {
                        for (a, &v) in acc.iter_mut().zip(gw) {
                            *a += v;
                        }
                    }
                }
            });
        }
        if let Some(pi) = pi {
            sink.accumulate(pi, |acc| {
                for (i, (_, gx)) in parts.iter().enumerate() {
                    if let Some(gx) = gx {
                        let dst = &mut acc[i * c * h * w..(i + 1) * c * h * w];
                        for (a, &v) in dst.iter_mut().zip(gx) {
                            *a += v;
                        }
                    }
                }
            });
        }
    }
    if let Some(pb) = pb {
        sink.accumulate(pb, |acc| {
            for i in 0..n {
                for fi in 0..f {
                    let mut s = T::zero();
                    for &v in &g[(i * f + fi) * ohw..(i * f + fi + 1) * ohw] {
                        s += v;
                    }
                    acc[fi] += s;
                }
            }
        });
    }
}

/// 2-D transpose convolution (adjoint of [`conv2d`] for matching geometry).
/// Input [N,C,H,W], kernel [C,F,k,k], optional bias [F]. `output_padding`
/// components (h, w) must be < stride and resolve the ambiguity of the
/// strided size map.
pub fn conv_transpose2d<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: usize,
    output_padding: (usize, usize),
) -> Result<Tensor<T>> {
    let f = kernel.shape()[1];
    check_conv_args("conv_transpose2d", input, kernel, 0, f, bias, stride)?;
    for op in [output_padding.0, output_padding.1] {
        if op >= stride {
            return Err(TensorError::OutputPaddingTooLarge {
                output_padding: op,
                stride,
            });
        }
    }
    let (n, c, h, w) = (
        input.shape()[0],
        input.shape()[1],
        input.shape()[2],
        input.shape()[3],
    );
    let k = kernel.shape()[2];
    let oh = conv_transpose_out_extent(h, k, stride, padding, output_padding.0).ok_or(
        TensorError::EmptyOutput {
            input: h,
            kernel: k,
            stride,
            padding,
        },
    )?;
    let ow = conv_transpose_out_extent(w, k, stride, padding, output_padding.1).ok_or(
        TensorError::EmptyOutput {
            input: w,
            kernel: k,
            stride,
            padding,
        },
    )?;
    // Positions of the adjoint convolution that maps the [oh, ow] grid back
    // onto [h, w]; exact by the output_padding < stride precondition.
    debug_assert_eq!(conv_out_extent(oh, k, stride, padding), Some(h));
    debug_assert_eq!(conv_out_extent(ow, k, stride, padding), Some(w));

    let dims = ConvDims {
        n,
        c,
        h,
        w,
        f,
        k,
        stride,
        pad: padding,
        oh,
        ow,
    };
    let fkk = f * k * k;
    let out_plane = f * oh * ow;
    let mut out = vec![T::zero(); n * out_plane];
    let xd = input.data();
    let kd = kernel.data();
    let bd = bias.map(|b| b.data().to_vec());
    out.par_chunks_mut(out_plane).enumerate().for_each(|(i, dst)| {
        let mut cols = vec![T::zero(); fkk * h * w];
        matmul_tn_acc(
            kd,
            &xd[i * c * h * w..(i + 1) * c * h * w],
            fkk,
            c,
            h * w,
            &mut cols,
        );
        col2im_acc(&cols, f, oh, ow, k, stride, padding, h, w, dst);
        if let Some(b) = &bd {
            for fi in 0..f {
                let bv = b[fi];
                for o in dst[fi * oh * ow..(fi + 1) * oh * ow].iter_mut() {
                    *o += bv;
                }
            }
        }
    });
    debug_check_finite("conv_transpose2d", &out);

    let mut inputs: Vec<&Tensor<T>> = vec![input, kernel];
    if let Some(b) = bias {
        inputs.push(b);
    }
    let node = joint_node(&inputs).map(|nr| {
        let (pi, pk, pb) = (node_id(input), node_id(kernel), bias.and_then(node_id));
        let xd = input.data_arc();
        let kd = kernel.data_arc();
        let id = nr.tape.push_node(
            out.len(),
            Some(Box::new(
                move |g: &[T], sink: &mut crate::tape::GradSink<'_, T>| {
                    conv_transpose2d_backward(g, &xd, &kd, &dims, pi, pk, pb, sink);
                },
            )),
        );
        NodeRef {
            tape: nr.tape.clone(),
            id,
        }
    });
    Ok(Tensor::with_node(vec![n, f, oh, ow], out, node))
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose2d_backward<T: Element>(
    g: &[T],
    xd: &[T],
    kd: &[T],
    dims: &ConvDims,
    pi: Option<usize>,
    pk: Option<usize>,
    pb: Option<usize>,
    sink: &mut crate::tape::GradSink<'_, T>,
) {
    let ConvDims {
        n,
        c,
        h,
        w,
        f,
        k,
        stride,
        pad,
        oh,
        ow,
    } = *dims;
    let fkk = f * k * k;
    let hw = h * w;

    if pk.is_some() || pi.is_some() {
        let parts: Vec<(Option<Vec<T>>, Option<Vec<T>>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let gi = &g[i * f * oh * ow..(i + 1) * f * oh * ow];
                let mut cols = vec![T::zero(); fkk * hw];
                im2col(gi, f, oh, ow, k, stride, pad, h, w, &mut cols);
                let mut gw = None;
                let mut gx = None;
                if pk.is_some() {
                    let mut buf = vec![T::zero(); c * fkk];
                    matmul_nt_acc(
                        &xd[i * c * hw..(i + 1) * c * hw],
                        &cols,
                        c,
                        hw,
                        fkk,
                        &mut buf,
                    );
                    gw = Some(buf);
                }
                if pi.is_some() {
                    let mut buf = vec![T::zero(); c * hw];
                    matmul_acc(kd, &cols, c, fkk, hw, &mut buf);
                    gx = Some(buf);
                }
                (gw, gx)
            })
            .collect();
        if let Some(pk) = pk {
            sink.accumulate(pk, |acc| {
                for (gw, _) in &parts {
                    if let Some(gw) = gw {
                        for (a, &v) in acc.iter_mut().zip(gw) {
                            *a += v;
                        }
                    }
                }
            });
        }
        if let Some(pi) = pi {
            sink.accumulate(pi, |acc| {
                for (i, (_, gx)) in parts.iter().enumerate() {
                    if let Some(gx) = gx {
                        let dst = &mut acc[i * c * hw..(i + 1) * c * hw];
                        for (a, &v) in dst.iter_mut().zip(gx) {
                            *a += v;
                        }
                    }
                }
            });
        }
    }
    if let Some(pb) = pb {
        sink.accumulate(pb, |acc| {
            for i in 0..n {
                for fi in 0..f {
                    let mut s = T::zero();
                    for &v in &g[(i * f + fi) * oh * ow..(i * f + fi + 1) * oh * ow] {
                        s += v;
                    }
                    acc[fi] += s;
                }
            }
        });
    }
}

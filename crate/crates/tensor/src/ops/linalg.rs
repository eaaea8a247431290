//! Flat matrix kernels backing the convolution ops.
//!
//! All kernels accumulate into `out` (callers zero-fill when needed) and are
//! sequential per output row, so results are bitwise reproducible regardless
//! of thread scheduling.

use crate::Element;

/// out[m,n] += a[m,p] * b[p,n]
///
/// Four output rows advance together so each row of `b` is streamed once per
/// row quad instead of once per row.
pub(crate) fn matmul_acc<T: Element>(a: &[T], b: &[T], m: usize, p: usize, n: usize, out: &mut [T]) {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), p * n);
    debug_assert_eq!(out.len(), m * n);
    let mut i = 0;
    while i + 4 <= m {
        let (head, tail) = out[i * n..].split_at_mut(n);
        let (r1, tail) = tail.split_at_mut(n);
        let (r2, r3) = tail.split_at_mut(n);
        let r0 = head;
        let r3 = &mut r3[..n];
        for l in 0..p {
            let (a0, a1, a2, a3) = (
                a[i * p + l],
                a[(i + 1) * p + l],
                a[(i + 2) * p + l],
                a[(i + 3) * p + l],
            );
            let b_row = &b[l * n..(l + 1) * n];
            for j in 0..n {
                let bv = b_row[j];
                r0[j] += a0 * bv;
                r1[j] += a1 * bv;
                r2[j] += a2 * bv;
                r3[j] += a3 * bv;
            }
        }
        i += 4;
    }
    for i in i..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        let a_row = &a[i * p..(i + 1) * p];
        for (l, &alv) in a_row.iter().enumerate() {
            let b_row = &b[l * n..(l + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += alv * bv;
            }
        }
    }
}

/// out[m,n] += a^T[m,p] * b[p,n], with `a` stored as [p,m]
pub(crate) fn matmul_tn_acc<T: Element>(
    a: &[T],
    b: &[T],
    m: usize,
    p: usize,
    n: usize,
    out: &mut [T],
) {
    debug_assert_eq!(a.len(), p * m);
    debug_assert_eq!(b.len(), p * n);
    debug_assert_eq!(out.len(), m * n);
    let mut i = 0;
    while i + 4 <= m {
        let (head, tail) = out[i * n..].split_at_mut(n);
        let (r1, tail) = tail.split_at_mut(n);
        let (r2, r3) = tail.split_at_mut(n);
        let r0 = head;
        let r3 = &mut r3[..n];
        for l in 0..p {
            let (a0, a1, a2, a3) = (
                a[l * m + i],
                a[l * m + i + 1],
                a[l * m + i + 2],
                a[l * m + i + 3],
            );
            let b_row = &b[l * n..(l + 1) * n];
            for j in 0..n {
                let bv = b_row[j];
                r0[j] += a0 * bv;
                r1[j] += a1 * bv;
                r2[j] += a2 * bv;
                r3[j] += a3 * bv;
            }
        }
        i += 4;
    }
    for i in i..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for l in 0..p {
            let alv = a[l * m + i];
            let b_row = &b[l * n..(l + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += alv * bv;
            }
        }
    }
}

/// out[m,n] += a[m,p] * b^T[p,n], with `b` stored as [n,p]
pub(crate) fn matmul_nt_acc<T: Element>(
    a: &[T],
    b: &[T],
    m: usize,
    p: usize,
    n: usize,
    out: &mut [T],
) {
    debug_assert_eq!(a.len(), m * p);
    debug_assert_eq!(b.len(), n * p);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * p..(i + 1) * p];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * p..(j + 1) * p];
            let mut acc = T::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
}

/// Unpacks one [C,H,W] image into convolution columns of shape
/// [C*k*k, oh*ow] for kernel size `k`, given stride and zero padding.
#[allow(clippy::too_many_arguments)]
pub(crate) fn im2col<T: Element>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    cols: &mut [T],
) {
    debug_assert_eq!(x.len(), c * h * w);
    debug_assert_eq!(cols.len(), c * k * k * oh * ow);
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        *d = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-accumulates columns back into a [C,H,W]
/// image.
#[allow(clippy::too_many_arguments)]
pub(crate) fn col2im_acc<T: Element>(
    cols: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
    x: &mut [T],
) {
    debug_assert_eq!(x.len(), c * h * w);
    debug_assert_eq!(cols.len(), c * k * k * oh * ow);
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let row = ((ci * k + ki) * k + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ki) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &cols[row + oy * ow..row + (oy + 1) * ow];
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = (ox * stride + kj) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst_row[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

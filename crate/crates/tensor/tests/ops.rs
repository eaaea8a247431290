//! Forward-op contracts: shapes, hand-derived values, error paths, and the
//! documented trivial identities.

use cht_tensor::ops::*;
use cht_tensor::{backward, Tape, Tensor, TensorError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn conv2d_identity_kernel_is_identity() {
    let mut r = rng(1);
    let x = Tensor::<f64>::randn(vec![2, 3, 6, 5], &mut r);
    // 1x1 kernels mapping each channel to itself with weight 1.
    let mut k = vec![0.0; 3 * 3];
    for c in 0..3 {
        k[c * 3 + c] = 1.0;
    }
    let kernel = Tensor::new(vec![3, 3, 1, 1], k);
    let y = conv2d(&x, &kernel, None, 1, 0).unwrap();
    assert_eq!(y.shape(), x.shape());
    for (a, b) in x.data().iter().zip(y.data()) {
        assert_eq!(a, b);
    }
}

#[test]
fn conv2d_all_ones_hand_summation() {
    let x = Tensor::<f64>::full(vec![1, 1, 3, 3], 1.0);
    let k = Tensor::<f64>::full(vec![1, 1, 3, 3], 1.0);
    let y = conv2d(&x, &k, None, 1, 1).unwrap();
    let expected = [4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0];
    assert_eq!(y.data(), &expected);
}

#[test]
fn conv2d_k7s2p3_shape_chain() {
    let x = Tensor::<f32>::zeros(vec![1, 1, 190, 100]);
    let mut r = rng(2);
    let k = Tensor::<f32>::randn(vec![16, 1, 7, 7], &mut r);
    let y = conv2d(&x, &k, None, 2, 3).unwrap();
    assert_eq!(y.shape(), &[1, 16, 95, 50]);
}

#[test]
fn conv2d_rejects_channel_mismatch_and_empty_output() {
    let x = Tensor::<f32>::zeros(vec![1, 2, 8, 8]);
    let k = Tensor::<f32>::zeros(vec![4, 3, 3, 3]);
    assert!(matches!(
        conv2d(&x, &k, None, 1, 1),
        Err(TensorError::ChannelMismatch { .. })
    ));
    let k = Tensor::<f32>::zeros(vec![4, 2, 9, 9]);
    assert!(matches!(
        conv2d(&x, &k, None, 1, 0),
        Err(TensorError::EmptyOutput { .. })
    ));
}

#[test]
fn conv_transpose_size_formula() {
    // 13 -> 25 with no output padding, 24 -> 48 with output padding 1.
    let mut r = rng(3);
    let k = Tensor::<f64>::randn(vec![2, 2, 3, 3], &mut r);
    let x = Tensor::<f64>::randn(vec![1, 2, 13, 13], &mut r);
    let y = conv_transpose2d(&x, &k, None, 2, 1, (0, 0)).unwrap();
    assert_eq!(y.shape(), &[1, 2, 25, 25]);

    let x = Tensor::<f64>::randn(vec![1, 2, 24, 24], &mut r);
    let y = conv_transpose2d(&x, &k, None, 2, 1, (1, 1)).unwrap();
    assert_eq!(y.shape(), &[1, 2, 48, 48]);
}

#[test]
fn conv_transpose_rejects_output_padding_ge_stride() {
    let k = Tensor::<f32>::zeros(vec![1, 1, 3, 3]);
    let x = Tensor::<f32>::zeros(vec![1, 1, 4, 4]);
    assert!(matches!(
        conv_transpose2d(&x, &k, None, 2, 1, (2, 0)),
        Err(TensorError::OutputPaddingTooLarge { .. })
    ));
}

#[test]
fn relu_values() {
    let x = Tensor::<f64>::new(vec![2], vec![-1.0, 2.0]);
    let y = relu(&x);
    assert_eq!(y.data(), &[0.0, 2.0]);
}

#[test]
fn dropout_zero_rate_is_identity_in_both_modes() {
    let mut r = rng(4);
    let x = Tensor::<f32>::randn(vec![1, 2, 4, 4], &mut r);
    for training in [false, true] {
        let y = dropout(&x, 0.0, training, &mut r).unwrap();
        assert_eq!(y.data(), x.data());
    }
}

#[test]
fn dropout_eval_mode_is_identity() {
    let mut r = rng(5);
    let x = Tensor::<f32>::randn(vec![8], &mut r);
    let y = dropout(&x, 0.7, false, &mut r).unwrap();
    assert_eq!(y.data(), x.data());
}

#[test]
fn dropout_rejects_bad_rate() {
    let x = Tensor::<f32>::zeros(vec![4]);
    let mut r = rng(6);
    assert!(dropout(&x, 1.0, true, &mut r).is_err());
    assert!(dropout(&x, -0.1, true, &mut r).is_err());
}

/// With p = 0.5 the inverted-dropout mean over many draws returns the input
/// within 5% per element.
#[test]
fn dropout_expectation_recovers_input() {
    let x = Tensor::<f64>::new(vec![6], vec![1.0, 1.5, 2.0, -1.0, -2.0, 3.0]);
    let mut r = rng(7);
    let n = 10_000;
    let mut mean = vec![0.0; 6];
    for _ in 0..n {
        let y = dropout(&x, 0.5, true, &mut r).unwrap();
        for (m, &v) in mean.iter_mut().zip(y.data()) {
            *m += v / n as f64;
        }
    }
    for (m, &v) in mean.iter().zip(x.data()) {
        assert!(
            (m - v).abs() <= 0.05 * v.abs(),
            "mean {m} vs input {v}"
        );
    }
}

#[test]
fn concat_channel_arithmetic() {
    let a = Tensor::<f32>::zeros(vec![1, 4, 8, 8]);
    let b = Tensor::<f32>::zeros(vec![1, 6, 8, 8]);
    let y = concat_channels(&a, &b).unwrap();
    assert_eq!(y.shape(), &[1, 10, 8, 8]);

    let c = Tensor::<f32>::zeros(vec![1, 6, 8, 7]);
    assert!(concat_channels(&a, &c).is_err());
}

#[test]
fn broadcast_mul_mask_semantics() {
    let mask = Tensor::<f64>::new(vec![1, 1, 1, 3], vec![0.0, 1.0, 0.5]);
    let x = Tensor::<f64>::new(vec![1, 2, 1, 3], vec![2.0, 2.0, 2.0, 4.0, 4.0, 4.0]);
    let y = elementwise_mul(&mask, &x).unwrap();
    assert_eq!(y.shape(), &[1, 2, 1, 3]);
    assert_eq!(y.data(), &[0.0, 2.0, 1.0, 0.0, 4.0, 2.0]);
    // same result with operands swapped
    let y2 = elementwise_mul(&x, &mask).unwrap();
    assert_eq!(y2.data(), y.data());
}

#[test]
fn add_rejects_incompatible_shapes() {
    let a = Tensor::<f32>::zeros(vec![1, 2, 3, 3]);
    let b = Tensor::<f32>::zeros(vec![1, 3, 3, 3]);
    assert!(matches!(
        add(&a, &b),
        Err(TensorError::ShapeMismatch { .. })
    ));
}

#[test]
fn backward_sum_gives_ones() {
    let tape = Tape::new();
    let mut r = rng(8);
    let x = Tensor::<f64>::randn(vec![3, 4], &mut r).requires_grad(&tape);
    let loss = sum_all(&x);
    backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![1.0; 12]);
}

#[test]
fn backward_quadratic_gives_two_x() {
    let tape = Tape::new();
    let mut r = rng(9);
    let x = Tensor::<f64>::randn(vec![2, 1, 2, 2], &mut r).requires_grad(&tape);
    let sq = elementwise_mul(&x, &x).unwrap();
    let loss = sum_all(&sq);
    backward(&loss).unwrap();
    let g = x.grad().unwrap();
    for (gv, xv) in g.iter().zip(x.data()) {
        assert!((gv - 2.0 * xv).abs() < 1e-12);
    }
}

#[test]
fn backward_errors() {
    // non-scalar loss
    let tape = Tape::new();
    let x = Tensor::<f64>::zeros(vec![3]).requires_grad(&tape);
    assert!(matches!(
        backward(&x),
        Err(TensorError::NonScalarLoss(_))
    ));

    // no tape
    let y = Tensor::<f64>::scalar(1.0);
    assert!(matches!(backward(&y), Err(TensorError::NoTape)));

    // second backward on the same tape
    let tape = Tape::new();
    let x = Tensor::<f64>::new(vec![2], vec![1.0, 2.0]).requires_grad(&tape);
    let loss = sum_all(&x);
    backward(&loss).unwrap();
    assert!(matches!(backward(&loss), Err(TensorError::TapeConsumed)));
}

#[test]
fn grad_accumulates_across_multiple_uses() {
    let tape = Tape::new();
    let x = Tensor::<f64>::new(vec![2], vec![3.0, -1.0]).requires_grad(&tape);
    let doubled = add(&x, &x).unwrap();
    let loss = sum_all(&doubled);
    backward(&loss).unwrap();
    assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
}

#[test]
fn detach_blocks_gradients() {
    let tape = Tape::new();
    let x = Tensor::<f64>::new(vec![2], vec![1.0, 2.0]).requires_grad(&tape);
    let d = x.detach();
    let y = elementwise_mul(&d, &d).unwrap();
    assert!(!y.is_tracked());
}

#[test]
fn batch_norm_fixed_point_and_zero_scale() {
    // per-channel zero-mean unit-variance input stays (almost) unchanged
    let data = vec![-1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0];
    let x = Tensor::<f64>::new(vec![1, 2, 2, 2], data.clone());
    let scale = Tensor::new(vec![2], vec![1.0, 1.0]);
    let shift = Tensor::new(vec![2], vec![0.0, 0.0]);
    let (y, update) = batch_norm(
        &x,
        &scale,
        &shift,
        &[0.0, 0.0],
        &[1.0, 1.0],
        true,
        1e-12,
        0.1,
    )
    .unwrap();
    assert!(update.is_some());
    for (a, b) in y.data().iter().zip(&data) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    // zero scale collapses the output onto the shift
    let scale0 = Tensor::new(vec![2], vec![0.0, 0.0]);
    let shift5 = Tensor::new(vec![2], vec![5.0, -3.0]);
    let (y, _) = batch_norm(&x, &scale0, &shift5, &[0.0, 0.0], &[1.0, 1.0], true, 1e-5, 0.1)
        .unwrap();
    for (i, &v) in y.data().iter().enumerate() {
        let expect = if i < 4 { 5.0 } else { -3.0 };
        assert_eq!(v, expect);
    }
}

#[test]
fn batch_norm_running_stats_ema() {
    let data = vec![1.0, 3.0, 1.0, 3.0];
    let x = Tensor::<f64>::new(vec![1, 1, 2, 2], data);
    let scale = Tensor::new(vec![1], vec![1.0]);
    let shift = Tensor::new(vec![1], vec![0.0]);
    let (_, update) = batch_norm(&x, &scale, &shift, &[0.0], &[1.0], true, 1e-5, 0.1).unwrap();
    let up = update.unwrap();
    // batch mean 2, population variance 1
    assert!((up.mean[0] - 0.2).abs() < 1e-12);
    assert!((up.var[0] - (0.9 + 0.1)).abs() < 1e-12);
}

#[test]
fn batch_norm_error_paths() {
    let x = Tensor::<f64>::full(vec![1, 1, 2, 2], 7.0);
    let scale = Tensor::new(vec![1], vec![1.0]);
    let shift = Tensor::new(vec![1], vec![0.0]);
    assert!(matches!(
        batch_norm(&x, &scale, &shift, &[0.0], &[1.0], true, 0.0, 0.1),
        Err(TensorError::ZeroVariance { channel: 0 })
    ));

    let bad_scale = Tensor::new(vec![2], vec![1.0, 1.0]);
    assert!(matches!(
        batch_norm(&x, &bad_scale, &shift, &[0.0], &[1.0], true, 1e-5, 0.1),
        Err(TensorError::ChannelMismatch { .. })
    ));
}

#[test]
fn batch_norm_eval_uses_running_stats() {
    let x = Tensor::<f64>::new(vec![1, 1, 1, 2], vec![10.0, 14.0]);
    let scale = Tensor::new(vec![1], vec![1.0]);
    let shift = Tensor::new(vec![1], vec![0.0]);
    let (y, update) =
        batch_norm(&x, &scale, &shift, &[12.0], &[4.0], false, 0.0, 0.1).unwrap();
    assert!(update.is_none());
    assert_eq!(y.data(), &[-1.0, 1.0]);
}

/// Identical seeds and inputs give bit-identical outputs.
#[test]
fn forward_determinism() {
    let run = || {
        let mut r = rng(42);
        let x = Tensor::<f32>::randn(vec![4, 3, 16, 16], &mut r);
        let k = Tensor::<f32>::randn(vec![8, 3, 3, 3], &mut r);
        let b = Tensor::<f32>::randn(vec![8], &mut r);
        let y = conv2d(&x, &k, Some(&b), 2, 1).unwrap();
        let y = relu(&y);
        let y = dropout(&y, 0.3, true, &mut r).unwrap();
        y.to_vec()
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
}

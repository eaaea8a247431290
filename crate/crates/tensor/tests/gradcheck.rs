//! Central finite-difference checks of every differentiable op at f64,
//! max relative error < 1e-4, over 20 random seeds.

use cht_tensor::gradcheck::assert_grad_matches;
use cht_tensor::ops::*;
use cht_tensor::{backward, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

/// Splits a flat parameter vector into tensors of the given shapes.
fn split_params(theta: &[f64], shapes: &[Vec<usize>]) -> Vec<Tensor<f64>> {
    let mut out = Vec::new();
    let mut off = 0;
    for s in shapes {
        let len: usize = s.iter().product();
        out.push(Tensor::new(s.clone(), theta[off..off + len].to_vec()));
        off += len;
    }
    assert_eq!(off, theta.len());
    out
}

/// Runs `fwd` once on tracked leaves to get analytic gradients, then checks
/// every component against central differences of the untracked evaluation.
fn check<F>(seed: u64, shapes: &[Vec<usize>], fwd: F)
where
    F: Fn(&[Tensor<f64>]) -> Tensor<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = Vec::new();
    for s in shapes {
        let len: usize = s.iter().product();
        let t = Tensor::<f64>::randn(vec![len], &mut rng);
        theta.extend_from_slice(t.data());
    }

    let tape = Tape::new();
    let leaves: Vec<Tensor<f64>> = split_params(&theta, shapes)
        .into_iter()
        .map(|t| t.requires_grad(&tape))
        .collect();
    let loss = fwd(&leaves);
    backward(&loss).unwrap();
    let mut analytic = Vec::with_capacity(theta.len());
    for leaf in &leaves {
        analytic.extend(leaf.grad().unwrap_or_else(|| vec![0.0; leaf.len()]));
    }

    let mut f = |t: &[f64]| fwd(&split_params(t, shapes)).item();
    let indices: Vec<usize> = (0..theta.len()).collect();
    assert_grad_matches(&mut f, &theta, &analytic, &indices, TOL);
}

/// Square the output and reduce so gradients are non-trivial everywhere.
fn sq_loss(y: &Tensor<f64>) -> Tensor<f64> {
    mean_all(&elementwise_mul(y, y).unwrap())
}

#[test]
fn conv2d_gradients() {
    for seed in 0..20 {
        check(
            seed,
            &[vec![2, 3, 5, 5], vec![4, 3, 3, 3], vec![4]],
            |p| sq_loss(&conv2d(&p[0], &p[1], Some(&p[2]), 1, 1).unwrap()),
        );
        check(
            seed + 100,
            &[vec![1, 2, 6, 5], vec![3, 2, 3, 3], vec![3]],
            |p| sq_loss(&conv2d(&p[0], &p[1], Some(&p[2]), 2, 1).unwrap()),
        );
    }
}

#[test]
fn conv_transpose2d_gradients() {
    for seed in 0..20 {
        check(
            seed,
            &[vec![2, 3, 4, 4], vec![3, 2, 3, 3], vec![2]],
            |p| sq_loss(&conv_transpose2d(&p[0], &p[1], Some(&p[2]), 2, 1, (1, 1)).unwrap()),
        );
        check(
            seed + 100,
            &[vec![1, 2, 5, 4], vec![2, 3, 3, 3], vec![3]],
            |p| sq_loss(&conv_transpose2d(&p[0], &p[1], Some(&p[2]), 1, 1, (0, 0)).unwrap()),
        );
    }
}

#[test]
fn batch_norm_gradients_training_and_eval() {
    for seed in 0..20 {
        for training in [true, false] {
            check(
                seed,
                &[vec![2, 3, 4, 4], vec![3], vec![3]],
                move |p| {
                    let (y, _) = batch_norm(
                        &p[0],
                        &p[1],
                        &p[2],
                        &[0.1, -0.2, 0.3],
                        &[1.1, 0.9, 1.3],
                        training,
                        1e-5,
                        0.1,
                    )
                    .unwrap();
                    sq_loss(&y)
                },
            );
        }
    }
}

#[test]
fn elementwise_and_concat_gradients() {
    for seed in 0..20 {
        check(
            seed,
            &[vec![2, 1, 3, 3], vec![2, 4, 3, 3]],
            |p| {
                let m = elementwise_mul(&p[0], &p[1]).unwrap();
                let s = add(&m, &p[1]).unwrap();
                let d = sub(&s, &p[1]).unwrap();
                sq_loss(&d)
            },
        );
        check(
            seed + 100,
            &[vec![1, 2, 3, 3], vec![1, 3, 3, 3]],
            |p| sq_loss(&concat_channels(&p[0], &p[1]).unwrap()),
        );
    }
}

#[test]
fn relu_chain_gradients() {
    for seed in 0..20 {
        check(
            seed,
            &[vec![2, 2, 4, 4], vec![3, 2, 3, 3], vec![3]],
            |p| {
                let y = conv2d(&p[0], &p[1], Some(&p[2]), 1, 1).unwrap();
                let y = relu(&y);
                sq_loss(&scale(&y, 1.7))
            },
        );
    }
}

#[test]
fn dropout_backward_matches_mask() {
    let tape = Tape::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Tensor::<f64>::randn(vec![1, 2, 4, 4], &mut rng).requires_grad(&tape);
    let y = dropout(&x, 0.4, true, &mut rng).unwrap();
    let loss = sum_all(&y);
    backward(&loss).unwrap();
    let g = x.grad().unwrap();
    // gradient equals the applied mask: 0 where dropped, 1/(1-p) where kept
    for (gv, (&xv, &yv)) in g.iter().zip(x.data().iter().zip(y.data())) {
        if yv == 0.0 && xv != 0.0 {
            assert_eq!(*gv, 0.0);
        } else {
            assert!((gv - 1.0 / 0.6).abs() < 1e-12);
        }
    }
}

//! Inner-product adjoint identity between conv2d and conv_transpose2d:
//! <conv2d(x, K), y> = <x, conv_transpose2d(y, K)> to 1e-10 at f64.

use cht_tensor::ops::{conv2d, conv_out_extent, conv_transpose2d};
use cht_tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_adjoint(n: usize, c: usize, f: usize, h: usize, w: usize, k: usize, s: usize, p: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64((h * 31 + w * 7 + k + s + p) as u64);
    let x = Tensor::<f64>::randn(vec![n, c, h, w], &mut rng);
    let kernel = Tensor::<f64>::randn(vec![f, c, k, k], &mut rng);
    let oh = conv_out_extent(h, k, s, p).unwrap();
    let ow = conv_out_extent(w, k, s, p).unwrap();
    let y = Tensor::<f64>::randn(vec![n, f, oh, ow], &mut rng);

    let fwd = conv2d(&x, &kernel, None, s, p).unwrap();
    // output padding recovering the exact input extent
    let opad_h = h - ((oh - 1) * s + k - 2 * p);
    let opad_w = w - ((ow - 1) * s + k - 2 * p);
    let adj = conv_transpose2d(&y, &kernel, None, s, p, (opad_h, opad_w)).unwrap();
    assert_eq!(adj.shape(), x.shape());

    let lhs = dot(fwd.data(), y.data());
    let rhs = dot(x.data(), adj.data());
    let scale = lhs.abs().max(rhs.abs()).max(1.0);
    assert!(
        (lhs - rhs).abs() <= 1e-10 * scale,
        "adjoint identity violated: {lhs} vs {rhs} (h={h} w={w} k={k} s={s} p={p})"
    );
}

#[test]
fn adjoint_identity_unit_stride() {
    check_adjoint(2, 3, 4, 5, 5, 3, 1, 0);
    check_adjoint(1, 2, 2, 5, 5, 3, 1, 1);
    check_adjoint(1, 1, 1, 5, 5, 1, 1, 0);
}

#[test]
fn adjoint_identity_strided() {
    // zero output padding cases (exact inversion of the size map)
    check_adjoint(1, 2, 3, 5, 5, 3, 2, 1);
    check_adjoint(2, 1, 2, 9, 9, 7, 2, 3);
    // cases where floor drops rows and output padding restores them
    check_adjoint(1, 2, 2, 6, 7, 3, 2, 1);
    check_adjoint(1, 3, 2, 10, 13, 3, 3, 1);
}

#[test]
fn adjoint_identity_random_geometries() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..20 {
        let h = rng.gen_range(4..12);
        let w = rng.gen_range(4..12);
        let k = *[1usize, 3, 5].iter().filter(|&&k| k <= h && k <= w).collect::<Vec<_>>()
            [rng.gen_range(0..2)];
        let s = rng.gen_range(1..=2);
        let p = rng.gen_range(0..=1);
        if conv_out_extent(h, k, s, p).is_none() || conv_out_extent(w, k, s, p).is_none() {
            continue;
        }
        check_adjoint(1, 2, 3, h, w, k, s, p);
    }
}

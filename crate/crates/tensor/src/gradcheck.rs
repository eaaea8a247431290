//! Central finite-difference oracle for gradient checks.
//!
//! Independent of the tape: it only evaluates a loss closure at perturbed
//! parameter vectors. Used by the test suites of this crate and the network
//! crates; run it at `f64`, where the default step of 1e-5 is reliable.

/// Central difference d f / d theta_i at the given indices with step `h`.
pub fn numeric_grad_at(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    h: f64,
    indices: &[usize],
) -> Vec<f64> {
    let mut work = theta.to_vec();
    indices
        .iter()
        .map(|&i| {
            let orig = work[i];
            work[i] = orig + h;
            let fp = f(&work);
            work[i] = orig - h;
            let fm = f(&work);
            work[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Full central-difference gradient with step `h`.
pub fn numeric_grad(f: &mut dyn FnMut(&[f64]) -> f64, theta: &[f64], h: f64) -> Vec<f64> {
    let indices: Vec<usize> = (0..theta.len()).collect();
    numeric_grad_at(f, theta, h, &indices)
}

/// Relative error with an absolute floor so near-zero pairs compare sanely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Checks `analytic` against central differences of `f` at the given
/// indices: |analytic - numeric| <= atol + tol * max(|analytic|, |numeric|),
/// where `atol` sits at the finite-difference noise floor scaled by the
/// gradient magnitude of the whole vector (components at that floor carry no
/// signal a central difference could confirm). The primary step is 1e-5; an
/// index that misses is retried at 1e-6 (resolves a perturbation stepping
/// across a ReLU kink) and at 1e-4 (reduces roundoff on small gradients),
/// keeping the best agreement. Returns the worst relative error on success.
pub fn assert_grad_matches(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    indices: &[usize],
    tol: f64,
) -> f64 {
    assert_eq!(theta.len(), analytic.len());
    let gscale = indices
        .iter()
        .map(|&i| analytic[i].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let atol = 1e-7 * gscale;
    let numeric = numeric_grad_at(f, theta, 1e-5, indices);
    let mut worst = 0.0f64;
    for (&i, &num) in indices.iter().zip(&numeric) {
        let gap = |n: f64| (analytic[i] - n).abs() - tol * analytic[i].abs().max(n.abs());
        let mut excess = gap(num);
        for h in [1e-6, 1e-4] {
            if excess <= atol {
                break;
            }
            let retry = numeric_grad_at(f, theta, h, &[i])[0];
            excess = excess.min(gap(retry));
        }
        assert!(
            excess <= atol,
            "gradient mismatch at index {i}: analytic {} vs numeric {num} (rel err {:.3e})",
            analytic[i],
            rel_err(analytic[i], num)
        );
        worst = worst.max(rel_err(analytic[i], num));
    }
    worst
}

//! Parameter initialization: He-style normal for conv kernels (standard
//! deviation sqrt(2 / fan_in)), zeros for biases and bn shifts, ones for bn
//! scales.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::Element;

/// Zero-mean normal samples with standard deviation sqrt(2 / fan_in).
pub fn he_normal<T: Element>(rng: &mut ChaCha8Rng, len: usize, fan_in: usize) -> Vec<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..len)
        .map(|_| {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            T::from_f64(z * std)
        })
        .collect()
}

pub fn zeros<T: Element>(len: usize) -> Vec<T> {
    vec![T::zero(); len]
}

pub fn ones<T: Element>(len: usize) -> Vec<T> {
    vec![T::one(); len]
}

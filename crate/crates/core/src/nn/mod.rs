//! Small deterministic convolutional-network engine.
//!
//! Everything is f64 and CPU-only. Layers expose explicit `forward` /
//! `backward` pairs instead of a tape: the networks in this crate are small
//! fixed DAGs (U-Net encoder/decoder plus a patch discriminator) and writing
//! the wiring out keeps gradient flow auditable and bit-reproducible.
//! Gradients accumulate into per-parameter buffers so one optimizer step can
//! cover many translation paths.

pub mod act;
pub mod adam;
pub mod conv;
pub mod norm;

use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

pub use act::{leaky_relu_backward, leaky_relu_forward, relu_backward, relu_forward, tanh_backward, tanh_forward};
pub use adam::AdamState;
pub use conv::{Conv2d, ConvTranspose2d};
pub use norm::{InstanceNorm2d, NormCache};

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: ArrayD<f64>,
    pub grad: ArrayD<f64>,
}

impl Param {
    pub fn new(value: ArrayD<f64>) -> Param {
        let grad = ArrayD::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Derives an independent, reproducible RNG from a run seed and a role tag
/// (e.g. `encoder/siemens_b30f`). Components get identical parameters no
/// matter in which order they are built.
pub fn derive_rng(seed: u64, tag: &str) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha20Rng::from_seed(digest)
}

/// Gaussian-initialized tensor.
pub fn normal_init(shape: &[usize], mean: f64, std: f64, rng: &mut ChaCha20Rng) -> ArrayD<f64> {
    let dist = Normal::new(mean, std).expect("std must be finite and nonnegative");
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    ArrayD::from_shape_vec(ndarray::IxDyn(shape), data).expect("shape matches data length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_rngs_are_stable_and_tag_separated() {
        let a: Vec<u8> = {
            use rand::RngCore;
            let mut rng = derive_rng(7, "encoder/x");
            let mut buf = vec![0u8; 16];
            rng.fill_bytes(&mut buf);
            buf
        };
        let b: Vec<u8> = {
            use rand::RngCore;
            let mut rng = derive_rng(7, "encoder/x");
            let mut buf = vec![0u8; 16];
            rng.fill_bytes(&mut buf);
            buf
        };
        let c: Vec<u8> = {
            use rand::RngCore;
            let mut rng = derive_rng(7, "decoder/x");
            let mut buf = vec![0u8; 16];
            rng.fill_bytes(&mut buf);
            buf
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn normal_init_matches_requested_moments_roughly() {
        let mut rng = derive_rng(1, "init");
        let t = normal_init(&[64, 64], 0.0, 0.02, &mut rng);
        let mean = t.sum() / t.len() as f64;
        let var = t.mapv(|v| (v - mean) * (v - mean)).sum() / t.len() as f64;
        assert!(mean.abs() < 2e-3, "mean {mean}");
        assert!((var.sqrt() - 0.02).abs() < 2e-3, "std {}", var.sqrt());
    }
}

//! Instance normalization: per-sample, per-channel standardization over the
//! spatial axes with a learned affine.

use ndarray::{Array4, ArrayD, Ix1};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{normal_init, Param};

/// Values cached by the forward pass and consumed by backward.
#[derive(Debug, Clone)]
pub struct NormCache {
    /// Standardized input (before the affine).
    pub xhat: Array4<f64>,
    /// 1 / sqrt(var + eps) per (sample, channel).
    pub inv_std: ndarray::Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct InstanceNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub eps: f64,
}

impl InstanceNorm2d {
    pub fn new(channels: usize, init_std: f64, rng: &mut ChaCha20Rng) -> InstanceNorm2d {
        // Scale initialized around 1, shift at 0.
        let gamma = normal_init(&[channels], 1.0, init_std, rng);
        let beta = ArrayD::zeros(ndarray::IxDyn(&[channels]));
        InstanceNorm2d {
            gamma: Param::new(gamma),
            beta: Param::new(beta),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Array4<f64>) -> (Array4<f64>, NormCache) {
        let (n, c, h, w) = x.dim();
        let m = (h * w) as f64;
        let gamma = self.gamma.value.view().into_dimensionality::<Ix1>().unwrap();
        let beta = self.beta.value.view().into_dimensionality::<Ix1>().unwrap();
        let mut xhat = Array4::<f64>::zeros((n, c, h, w));
        let mut inv_std = ndarray::Array2::<f64>::zeros((n, c));
        let mut y = Array4::<f64>::zeros((n, c, h, w));

        let plane = h * w;
        let xs = x.as_slice().expect("norm input is standard layout");
        let eps = self.eps;
        // Planes are disjoint; parallelize over (sample, channel).
        let xh = xhat.as_slice_mut().unwrap();
        let ys = y.as_slice_mut().unwrap();
        let istds: Vec<f64> = xh
            .par_chunks_mut(plane)
            .zip(ys.par_chunks_mut(plane))
            .enumerate()
            .map(|(pi, (xh_plane, y_plane))| {
                let ci = pi % c;
                let src = &xs[pi * plane..(pi + 1) * plane];
                let mean = src.iter().sum::<f64>() / m;
                let var = src.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / m;
                let istd = 1.0 / (var + eps).sqrt();
                let (g, b) = (gamma[ci], beta[ci]);
                for ((xv, xo), yo) in src.iter().zip(xh_plane.iter_mut()).zip(y_plane.iter_mut()) {
                    let v = (xv - mean) * istd;
                    *xo = v;
                    *yo = g * v + b;
                }
                istd
            })
            .collect();
        for (pi, istd) in istds.into_iter().enumerate() {
            inv_std[[pi / c, pi % c]] = istd;
        }
        let _ = n;
        (y, NormCache { xhat, inv_std })
    }

    /// Backward pass. `with_params` controls whether gamma/beta gradients are
    /// accumulated (skipped when the layer is frozen).
    pub fn backward(&mut self, cache: &NormCache, gy: &Array4<f64>, with_params: bool) -> Array4<f64> {
        let (n, c, h, w) = gy.dim();
        let m = (h * w) as f64;
        let plane = h * w;
        let gamma = self.gamma.value.view().into_dimensionality::<Ix1>().unwrap();
        let mut gx = Array4::<f64>::zeros((n, c, h, w));

        let gys = gy.as_slice().expect("gradient is standard layout");
        let xhs = cache.xhat.as_slice().expect("cache is standard layout");
        let inv_std = &cache.inv_std;
        let gxs = gx.as_slice_mut().unwrap();
        // (sum gy, sum gy*xhat) per plane, reused for the affine gradients.
        let sums: Vec<(f64, f64)> = gxs
            .par_chunks_mut(plane)
            .enumerate()
            .map(|(pi, gx_plane)| {
                let ci = pi % c;
                let g = &gys[pi * plane..(pi + 1) * plane];
                let xh = &xhs[pi * plane..(pi + 1) * plane];
                let mut sum_gy = 0.0;
                let mut sum_gy_xhat = 0.0;
                for (&gv, &xv) in g.iter().zip(xh.iter()) {
                    sum_gy += gv;
                    sum_gy_xhat += gv * xv;
                }
                let mean_gy = sum_gy / m;
                let mean_gy_xhat = sum_gy_xhat / m;
                let coeff = gamma[ci] * inv_std[[pi / c, ci]];
                for ((go, &gv), &xv) in gx_plane.iter_mut().zip(g.iter()).zip(xh.iter()) {
                    *go = coeff * (gv - mean_gy - xv * mean_gy_xhat);
                }
                (sum_gy, sum_gy_xhat)
            })
            .collect();
        if with_params {
            for (pi, (sum_gy, sum_gy_xhat)) in sums.into_iter().enumerate() {
                let ci = pi % c;
                self.gamma.grad[ci] += sum_gy_xhat;
                self.beta.grad[ci] += sum_gy;
            }
        }
        gx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
}

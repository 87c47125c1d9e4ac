//! Strided 2-D convolution and transposed convolution via im2col + GEMM.
//!
//! Patch matrices are laid out `(C*K*K, N*OH*OW)` so the GEMM output maps
//! straight onto channel-major feature maps. The transposed convolution
//! reuses the same two primitives with the roles of `im2col`/`col2im`
//! swapped, which keeps the forward/backward pairs exact adjoints of each
//! other.

use ndarray::{Array1, Array2, Array4, ArrayD, Axis, Ix1, Ix4};
use rand_chacha::ChaCha20Rng;

use super::{normal_init, Param};

/// Output spatial size of a convolution with square kernel `k`; 0 when no
/// kernel position fits.
pub fn conv_out_size(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    let padded = input + 2 * pad;
    if padded < k {
        return 0;
    }
    (padded - k) / stride + 1
}

/// Output spatial size of a transposed convolution.
pub fn conv_transpose_out_size(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input - 1) * stride + k - 2 * pad
}

/// Gathers sliding-window patches of `x` into a `(C*K*K, N*OH*OW)` matrix.
/// Rows are disjoint per (channel, kernel offset), so they fill in parallel.
pub fn im2col(x: &Array4<f64>, k: usize, stride: usize, pad: usize) -> Array2<f64> {
    use rayon::prelude::*;
    let (n, c, h, w) = x.dim();
    let oh = conv_out_size(h, k, stride, pad);
    let ow = conv_out_size(w, k, stride, pad);
    let ncols = n * oh * ow;
    let mut cols = Array2::<f64>::zeros((c * k * k, ncols));
    let xs = x.as_slice().expect("im2col input must be standard layout");

    cols.as_slice_mut()
        .expect("fresh array is standard layout")
        .par_chunks_mut(ncols)
        .enumerate()
        .for_each(|(row, out)| {
            let kx = row % k;
            let ky = (row / k) % k;
            let ci = row / (k * k);
            let Some((ox_min, ox_max)) = ox_range(kx, pad, stride, w, ow) else {
                return;
            };
            for ni in 0..n {
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let in_base = ((ni * c + ci) * h + iy as usize) * w;
                    let out_base = (ni * oh + oy) * ow;
                    for ox in ox_min..=ox_max {
                        let ix = ox * stride + kx - pad;
                        out[out_base + ox] = xs[in_base + ix];
                    }
                }
            }
        });
    cols
}

/// Adjoint of [`im2col`]: scatter-adds a `(C*K*K, N*OH*OW)` matrix back into
/// an image of shape `(n, c, h, w)`. Samples are disjoint in the output, so
/// they accumulate in parallel with a fixed per-element order.
pub fn col2im(
    cols: &Array2<f64>,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Array4<f64> {
    use rayon::prelude::*;
    let oh = conv_out_size(h, k, stride, pad);
    let ow = conv_out_size(w, k, stride, pad);
    let ncols = n * oh * ow;
    debug_assert_eq!(cols.dim(), (c * k * k, ncols));
    let mut x = Array4::<f64>::zeros((n, c, h, w));
    let cs = cols.as_slice().expect("col2im input must be standard layout");

    x.as_slice_mut()
        .expect("fresh array is standard layout")
        .par_chunks_mut(c * h * w)
        .enumerate()
        .for_each(|(ni, sample)| {
            for ci in 0..c {
                for ky in 0..k {
                    for kx in 0..k {
                        let Some((ox_min, ox_max)) = ox_range(kx, pad, stride, w, ow) else {
                            continue;
                        };
                        let row = (ci * k + ky) * k + kx;
                        for oy in 0..oh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let in_base = (ci * h + iy as usize) * w;
                            let out_base = row * ncols + (ni * oh + oy) * ow;
                            for ox in ox_min..=ox_max {
                                let ix = ox * stride + kx - pad;
                                sample[in_base + ix] += cs[out_base + ox];
                            }
                        }
                    }
                }
            }
        });
    x
}

/// Inclusive `ox` range keeping `ox*stride + kx - pad` inside `[0, w)`, or
/// `None` when no output column maps to a valid input column.
fn ox_range(kx: usize, pad: usize, stride: usize, w: usize, ow: usize) -> Option<(usize, usize)> {
    if ow == 0 {
        return None;
    }
    let lo = if pad > kx { (pad - kx).div_ceil(stride) } else { 0 };
    let hi_num = w as isize - 1 - kx as isize + pad as isize;
    if hi_num < 0 {
        return None;
    }
    let hi = (hi_num as usize / stride).min(ow - 1);
    if lo > hi {
        None
    } else {
        Some((lo, hi))
    }
}

/// `(OC, N*OH*OW)` matrix view of a feature map.
fn to_channel_major(y: &Array4<f64>) -> Array2<f64> {
    let (n, c, h, w) = y.dim();
    let permuted = y.view().permuted_axes([1, 0, 2, 3]);
    let standard = permuted.as_standard_layout().into_owned();
    standard
        .into_shape_with_order((c, n * h * w))
        .expect("shape preserves length")
}

/// Inverse of [`to_channel_major`].
fn from_channel_major(m: Array2<f64>, n: usize, h: usize, w: usize) -> Array4<f64> {
    let c = m.dim().0;
    let arr = m
        .into_shape_with_order((c, n, h, w))
        .expect("shape preserves length");
    arr.permuted_axes([1, 0, 2, 3])
        .as_standard_layout()
        .into_owned()
}

fn sum_over_batch_and_space(gy: &Array4<f64>) -> Array1<f64> {
    gy.sum_axis(Axis(0)).sum_axis(Axis(1)).sum_axis(Axis(1))
}

/// Square 2-D convolution, weights `(OC, IC, K, K)`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Param,
    pub b: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        init_std: f64,
        rng: &mut ChaCha20Rng,
    ) -> Conv2d {
        let w = normal_init(&[out_channels, in_channels, kernel, kernel], 0.0, init_std, rng);
        let b = ArrayD::zeros(ndarray::IxDyn(&[out_channels]));
        Conv2d {
            w: Param::new(w),
            b: Param::new(b),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    fn w_mat(&self) -> Array2<f64> {
        self.w
            .value
            .view()
            .into_dimensionality::<Ix4>()
            .expect("conv weight is 4-D")
            .into_shape_with_order((self.out_channels, self.in_channels * self.kernel * self.kernel))
            .expect("weight reshape")
            .to_owned()
    }

    pub fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "conv input channels");
        let oh = conv_out_size(h, self.kernel, self.stride, self.pad);
        let ow = conv_out_size(w, self.kernel, self.stride, self.pad);
        let cols = im2col(x, self.kernel, self.stride, self.pad);
        let mut y_mat = self.w_mat().dot(&cols);
        let bias = self.b.value.view().into_dimensionality::<Ix1>().expect("bias is 1-D");
        for (oc, mut row) in y_mat.axis_iter_mut(Axis(0)).enumerate() {
            row += bias[oc];
        }
        from_channel_major(y_mat, n, oh, ow)
    }

    /// Full backward: accumulates weight/bias gradients and returns the
    /// input gradient.
    pub fn backward(&mut self, x: &Array4<f64>, gy: &Array4<f64>) -> Array4<f64> {
        let (n, _, h, w) = x.dim();
        let cols = im2col(x, self.kernel, self.stride, self.pad);
        let gy_mat = to_channel_major(gy);
        self.accumulate_params(&cols, &gy_mat, gy);
        let gcols = self.w_mat().t().dot(&gy_mat);
        col2im(&gcols, n, self.in_channels, h, w, self.kernel, self.stride, self.pad)
    }

    /// Input gradient only; parameters untouched (used when the layer is
    /// frozen, e.g. discriminators during the generator update).
    pub fn backward_data(&self, x_dims: (usize, usize, usize, usize), gy: &Array4<f64>) -> Array4<f64> {
        let (n, _, h, w) = x_dims;
        let gy_mat = to_channel_major(gy);
        let gcols = self.w_mat().t().dot(&gy_mat);
        col2im(&gcols, n, self.in_channels, h, w, self.kernel, self.stride, self.pad)
    }

    /// Parameter gradients only (used for the last backward hop where the
    /// input gradient is not needed).
    pub fn backward_params(&mut self, x: &Array4<f64>, gy: &Array4<f64>) {
        let cols = im2col(x, self.kernel, self.stride, self.pad);
        let gy_mat = to_channel_major(gy);
        self.accumulate_params(&cols, &gy_mat, gy);
    }

    fn accumulate_params(&mut self, cols: &Array2<f64>, gy_mat: &Array2<f64>, gy: &Array4<f64>) {
        let gw = gy_mat.dot(&cols.t());
        let gw = gw
            .into_shape_with_order((self.out_channels, self.in_channels, self.kernel, self.kernel))
            .expect("weight gradient reshape");
        self.w.grad += &gw.into_dyn();
        self.b.grad += &sum_over_batch_and_space(gy).into_dyn();
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

/// Square 2-D transposed convolution, weights `(IC, OC, K, K)`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: Param,
    pub b: Param,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        init_std: f64,
        rng: &mut ChaCha20Rng,
    ) -> ConvTranspose2d {
        let w = normal_init(&[in_channels, out_channels, kernel, kernel], 0.0, init_std, rng);
        let b = ArrayD::zeros(ndarray::IxDyn(&[out_channels]));
        ConvTranspose2d {
            w: Param::new(w),
            b: Param::new(b),
            in_channels,
            out_channels,
            kernel,
            stride,
            pad,
        }
    }

    fn w_mat(&self) -> Array2<f64> {
        self.w
            .value
            .view()
            .into_dimensionality::<Ix4>()
            .expect("conv weight is 4-D")
            .into_shape_with_order((self.in_channels, self.out_channels * self.kernel * self.kernel))
            .expect("weight reshape")
            .to_owned()
    }

    pub fn forward(&self, x: &Array4<f64>) -> Array4<f64> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_channels, "transposed conv input channels");
        let oh = conv_transpose_out_size(h, self.kernel, self.stride, self.pad);
        let ow = conv_transpose_out_size(w, self.kernel, self.stride, self.pad);
        let x_mat = to_channel_major(x);
        let cols = self.w_mat().t().dot(&x_mat);
        let mut y = col2im(&cols, n, self.out_channels, oh, ow, self.kernel, self.stride, self.pad);
        let bias = self.b.value.view().into_dimensionality::<Ix1>().expect("bias is 1-D");
        for mut sample in y.axis_iter_mut(Axis(0)) {
            for (oc, mut plane) in sample.axis_iter_mut(Axis(0)).enumerate() {
                plane += bias[oc];
            }
        }
        y
    }

    pub fn backward(&mut self, x: &Array4<f64>, gy: &Array4<f64>) -> Array4<f64> {
        let (n, _, h, w) = x.dim();
        let gcols = im2col(gy, self.kernel, self.stride, self.pad);
        let x_mat = to_channel_major(x);
        self.accumulate_params(&x_mat, &gcols, gy);
        let gx_mat = self.w_mat().dot(&gcols);
        from_channel_major(gx_mat, n, h, w)
    }

    pub fn backward_data(&self, x_dims: (usize, usize, usize, usize), gy: &Array4<f64>) -> Array4<f64> {
        let (n, _, h, w) = x_dims;
        let gcols = im2col(gy, self.kernel, self.stride, self.pad);
        let gx_mat = self.w_mat().dot(&gcols);
        from_channel_major(gx_mat, n, h, w)
    }

    fn accumulate_params(&mut self, x_mat: &Array2<f64>, gcols: &Array2<f64>, gy: &Array4<f64>) {
        let gw = x_mat.dot(&gcols.t());
        let gw = gw
            .into_shape_with_order((self.in_channels, self.out_channels, self.kernel, self.kernel))
            .expect("weight gradient reshape");
        self.w.grad += &gw.into_dyn();
        self.b.grad += &sum_over_batch_and_space(gy).into_dyn();
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

//! Pointwise activations with explicit backward passes.

use ndarray::Array4;

pub fn leaky_relu_forward(x: &Array4<f64>, slope: f64) -> Array4<f64> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

/// `x` is the activation input saved by the forward pass.
pub fn leaky_relu_backward(x: &Array4<f64>, gy: &Array4<f64>, slope: f64) -> Array4<f64> {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, &xi| {
        if xi <= 0.0 {
            *g *= slope;
        }
    });
    gx
}

pub fn relu_forward(x: &Array4<f64>) -> Array4<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu_backward(x: &Array4<f64>, gy: &Array4<f64>) -> Array4<f64> {
    let mut gx = gy.clone();
    gx.zip_mut_with(x, |g, &xi| {
        if xi <= 0.0 {
            *g = 0.0;
        }
    });
    gx
}

pub fn tanh_forward(x: &Array4<f64>) -> Array4<f64> {
    x.mapv(f64::tanh)
}

/// `y` is the tanh output saved by the forward pass.
pub fn tanh_backward(y: &Array4<f64>, gy: &Array4<f64>) -> Array4<f64> {
    let mut gx = gy.clone();
    gx.zip_mut_with(y, |g, &yi| {
        *g *= 1.0 - yi * yi;
    });
    gx
}

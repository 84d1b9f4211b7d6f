//! Minimal dense-tensor neural network kernels.
//!
//! Everything is f32, serial, and deterministic: layers own their parameters
//! and gradient accumulators, forward passes return whatever cache their
//! backward pass needs, and optimizers see parameters through [`ParamRef`].

mod adam;
mod conv;
mod linear;
mod norm;
mod ops;

pub use adam::Adam;
pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::{BatchNorm2d, BnCache};
pub use ops::{
    concat_channels, crop_center, global_max_pool, global_max_pool_backward, leaky_relu,
    leaky_relu_backward, pad_reflect, relu, relu_backward, split_channels, tanh, tanh_backward,
    upsample2x, upsample2x_backward,
};

use ndarray::{ArrayViewD, ArrayViewMutD};
use rand::Rng;

/// Mutable view of one named parameter and its gradient accumulator.
pub struct ParamRef<'a> {
    pub name: String,
    pub value: ArrayViewMutD<'a, f32>,
    pub grad: ArrayViewMutD<'a, f32>,
}

/// A named read-only tensor, used for checkpoint serialization.
pub struct NamedTensor<'a> {
    pub name: String,
    pub value: ArrayViewD<'a, f32>,
}

impl<'a> NamedTensor<'a> {
    pub fn new(name: impl Into<String>, value: ArrayViewD<'a, f32>) -> Self {
        NamedTensor {
            name: name.into(),
            value,
        }
    }
}

pub fn zero_grads(params: &mut [ParamRef<'_>]) {
    for p in params {
        p.grad.fill(0.0);
    }
}

/// Gaussian init with the adversarial-training convention N(0, 0.02).
pub fn randn<R: Rng>(rng: &mut R, std: f32) -> f32 {
    // Box-Muller on two uniform draws.
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    ((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()) as f32 * std
}

/// Prefix every parameter name, used to namespace network components.
pub fn with_prefix<'a>(prefix: &str, params: Vec<ParamRef<'a>>) -> Vec<ParamRef<'a>> {
    params
        .into_iter()
        .map(|mut p| {
            p.name = format!("{prefix}.{}", p.name);
            p
        })
        .collect()
}

pub fn tensors_with_prefix<'a>(
    prefix: &str,
    tensors: Vec<NamedTensor<'a>>,
) -> Vec<NamedTensor<'a>> {
    tensors
        .into_iter()
        .map(|mut t| {
            t.name = format!("{prefix}.{}", t.name);
            t
        })
        .collect()
}

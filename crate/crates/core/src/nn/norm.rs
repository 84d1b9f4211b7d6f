//! Batch normalization over `[N, C, H, W]`.

use super::{NamedTensor, ParamRef};
use ndarray::{Array1, Array4, Axis};

pub struct BatchNorm2d {
    pub gamma: Array1<f32>,
    pub beta: Array1<f32>,
    pub ggamma: Array1<f32>,
    pub gbeta: Array1<f32>,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
    pub momentum: f32,
    pub eps: f32,
}

/// Saved activations a train-mode forward pass needs for backward.
pub struct BnCache {
    xhat: Array4<f32>,
    inv_std: Array1<f32>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            ggamma: Array1::zeros(channels),
            gbeta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// Normalize with batch statistics and update running statistics.
    pub fn forward_train(&mut self, x: &Array4<f32>) -> (Array4<f32>, BnCache) {
        let (n, c, h, w) = x.dim();
        let m = (n * h * w) as f32;
        let mut mean = Array1::<f32>::zeros(c);
        let mut var = Array1::<f32>::zeros(c);
        for ch in 0..c {
            let plane = x.index_axis(Axis(1), ch);
            let mu = plane.sum() / m;
            let v = plane.iter().map(|x| (x - mu) * (x - mu)).sum::<f32>() / m;
            mean[ch] = mu;
            var[ch] = v;
        }
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let mut xhat = x.clone();
        let mut y = Array4::<f32>::zeros(x.dim());
        for ch in 0..c {
            let mu = mean[ch];
            let is = inv_std[ch];
            let (g, b) = (self.gamma[ch], self.beta[ch]);
            let mut xh = xhat.index_axis_mut(Axis(1), ch);
            xh.mapv_inplace(|v| (v - mu) * is);
            let mut yc = y.index_axis_mut(Axis(1), ch);
            yc.assign(&xh);
            yc.mapv_inplace(|v| v * g + b);
        }
        // running stats track the unbiased batch variance
        let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
        for ch in 0..c {
            self.running_mean[ch] =
                (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean[ch];
            self.running_var[ch] =
                (1.0 - self.momentum) * self.running_var[ch] + self.momentum * var[ch] * unbias;
        }
        (y, BnCache { xhat, inv_std })
    }

    /// Normalize with running statistics; works for a batch of 1.
    pub fn forward_eval(&self, x: &Array4<f32>) -> Array4<f32> {
        let c = x.dim().1;
        let mut y = x.clone();
        for ch in 0..c {
            let is = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let mu = self.running_mean[ch];
            let (g, b) = (self.gamma[ch], self.beta[ch]);
            y.index_axis_mut(Axis(1), ch)
                .mapv_inplace(|v| (v - mu) * is * g + b);
        }
        y
    }

    pub fn backward(&mut self, cache: &BnCache, dy: &Array4<f32>) -> Array4<f32> {
        let (n, c, h, w) = dy.dim();
        let m = (n * h * w) as f32;
        let mut dx = Array4::<f32>::zeros(dy.dim());
        for ch in 0..c {
            let dyc = dy.index_axis(Axis(1), ch);
            let xh = cache.xhat.index_axis(Axis(1), ch);
            let sum_dy = dyc.sum();
            let sum_dy_xhat = dyc.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f32>();
            self.gbeta[ch] += sum_dy;
            self.ggamma[ch] += sum_dy_xhat;
            let scale = self.gamma[ch] * cache.inv_std[ch] / m;
            let mut dxc = dx.index_axis_mut(Axis(1), ch);
            ndarray::Zip::from(&mut dxc).and(&dyc).and(&xh).for_each(|d, &dyv, &xhv| {
                *d = scale * (m * dyv - sum_dy - xhv * sum_dy_xhat);
            });
        }
        dx
    }

    pub fn params(&mut self) -> Vec<ParamRef<'_>> {
        vec![
            ParamRef {
                name: "gamma".into(),
                value: self.gamma.view_mut().into_dyn(),
                grad: self.ggamma.view_mut().into_dyn(),
            },
            ParamRef {
                name: "beta".into(),
                value: self.beta.view_mut().into_dyn(),
                grad: self.gbeta.view_mut().into_dyn(),
            },
        ]
    }

    /// Parameters plus running statistics, for checkpoints.
    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        vec![
            NamedTensor::new("gamma", self.gamma.view().into_dyn()),
            NamedTensor::new("beta", self.beta.view().into_dyn()),
            NamedTensor::new("running_mean", self.running_mean.view().into_dyn()),
            NamedTensor::new("running_var", self.running_var.view().into_dyn()),
        ]
    }
}

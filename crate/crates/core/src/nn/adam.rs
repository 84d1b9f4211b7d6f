//! Adam optimizer with externally supplied learning rate.

use super::{NamedTensor, ParamRef};
use ndarray::ArrayD;

pub struct Adam {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub t: u64,
    m: Vec<ArrayD<f32>>,
    v: Vec<ArrayD<f32>>,
    names: Vec<String>,
}

impl Adam {
    pub fn new(beta1: f32, beta2: f32) -> Self {
        Adam {
            beta1,
            beta2,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
            names: Vec::new(),
        }
    }

    /// One update; moment buffers are created lazily on the first call.
    pub fn step(&mut self, params: &mut [ParamRef<'_>], lr: f32) {
        if self.m.is_empty() {
            for p in params.iter() {
                self.m.push(ArrayD::zeros(p.value.raw_dim()));
                self.v.push(ArrayD::zeros(p.value.raw_dim()));
                self.names.push(p.name.clone());
            }
        }
        assert_eq!(self.m.len(), params.len(), "optimizer/parameter mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter_mut().enumerate() {
            debug_assert_eq!(self.names[i], p.name);
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            ndarray::Zip::from(&mut p.value)
                .and(&p.grad)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + self.eps);
                });
        }
    }

    /// Moment buffers and step counter, for exact-resume checkpoints.
    pub fn tensors(&self, prefix: &str) -> Vec<NamedTensor<'_>> {
        let mut out = Vec::new();
        for (i, name) in self.names.iter().enumerate() {
            out.push(NamedTensor::new(
                format!("{prefix}.m.{name}"),
                self.m[i].view(),
            ));
            out.push(NamedTensor::new(
                format!("{prefix}.v.{name}"),
                self.v[i].view(),
            ));
        }
        out
    }

    /// Restore the moment buffers saved by [`Adam::tensors`].
    pub fn restore(
        &mut self,
        params: &[ParamRef<'_>],
        prefix: &str,
        t: u64,
        lookup: &mut dyn FnMut(&str) -> Option<ArrayD<f32>>,
    ) -> crate::error::Result<()> {
        self.t = t;
        self.m.clear();
        self.v.clear();
        self.names.clear();
        for p in params {
            let m = lookup(&format!("{prefix}.m.{}", p.name)).ok_or_else(|| {
                crate::error::Error::Checkpoint(format!("missing optimizer moment for {}", p.name))
            })?;
            let v = lookup(&format!("{prefix}.v.{}", p.name)).ok_or_else(|| {
                crate::error::Error::Checkpoint(format!("missing optimizer moment for {}", p.name))
            })?;
            self.m.push(m);
            self.v.push(v);
            self.names.push(p.name.clone());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    #[test]
    fn minimizes_a_quadratic() {
        // f(w) = (w - 3)^2, df/dw = 2(w - 3)
        let mut w = ArrayD::from_elem(ndarray::IxDyn(&[1]), 0.0f32);
        let mut g = ArrayD::zeros(ndarray::IxDyn(&[1]));
        let mut adam = Adam::new(0.9, 0.999);
        for _ in 0..800 {
            g[[0]] = 2.0 * (w[[0]] - 3.0);
            let mut params = vec![ParamRef {
                name: "w".into(),
                value: w.view_mut(),
                grad: g.view_mut(),
            }];
            adam.step(&mut params, 0.05);
        }
        assert!((w[[0]] - 3.0).abs() < 1e-2, "w = {}", w[[0]]);
    }
}

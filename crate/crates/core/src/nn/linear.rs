//! Fully-connected layer.

use super::{randn, NamedTensor, ParamRef};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2};
use rand::Rng;

pub struct Linear {
    /// `[out, in]`
    pub w: Array2<f32>,
    pub b: Array1<f32>,
    pub gw: Array2<f32>,
    pub gb: Array1<f32>,
}

impl Linear {
    pub fn new<R: Rng>(in_f: usize, out_f: usize, rng: &mut R) -> Self {
        Linear {
            w: Array2::from_shape_fn((out_f, in_f), |_| randn(rng, 0.02)),
            b: Array1::zeros(out_f),
            gw: Array2::zeros((out_f, in_f)),
            gb: Array1::zeros(out_f),
        }
    }

    /// `x: [N, in] -> [N, out]`
    pub fn forward(&self, x: &Array2<f32>) -> Array2<f32> {
        let mut y = Array2::<f32>::zeros((x.dim().0, self.w.dim().0));
        general_mat_mul(1.0, x, &self.w.t(), 0.0, &mut y);
        y + &self.b
    }

    pub fn backward(&mut self, x: &Array2<f32>, dy: &Array2<f32>) -> Array2<f32> {
        general_mat_mul(1.0, &dy.t(), x, 1.0, &mut self.gw);
        for row in dy.outer_iter() {
            self.gb += &row;
        }
        let mut dx = Array2::<f32>::zeros(x.dim());
        general_mat_mul(1.0, dy, &self.w, 0.0, &mut dx);
        dx
    }

    pub fn params(&mut self) -> Vec<ParamRef<'_>> {
        vec![
            ParamRef {
                name: "w".into(),
                value: self.w.view_mut().into_dyn(),
                grad: self.gw.view_mut().into_dyn(),
            },
            ParamRef {
                name: "b".into(),
                value: self.b.view_mut().into_dyn(),
                grad: self.gb.view_mut().into_dyn(),
            },
        ]
    }

    pub fn tensors(&self) -> Vec<NamedTensor<'_>> {
        vec![
            NamedTensor::new("w", self.w.view().into_dyn()),
            NamedTensor::new("b", self.b.view().into_dyn()),
        ]
    }
}

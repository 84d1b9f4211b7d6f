//! Loss terms for the adversarial translation training.
//!
//! Discriminators score patches with raw logits; the sigmoid lives inside the
//! losses, in log-sum-exp stable form. Generators use the non-saturating
//! objective. Image losses are means over all elements so the lambda weights
//! stay crop-size independent.

use crate::error::{Error, Result};
use ndarray::{ArrayD, ArrayViewD};
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossWeights {
    /// Cycle-consistency weight.
    pub lambda1: f64,
    /// Identity weight.
    pub lambda2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 10.0,
            lambda2: 5.0,
        }
    }
}

/// All scalar terms produced by one training step.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub gan_a: f64,
    pub gan_b: f64,
    pub cyc_a: f64,
    pub cyc_b: f64,
    pub id_a: f64,
    pub id_b: f64,
    /// Discriminator losses, kept out of the generator total.
    pub d_n: f64,
    pub d_a: f64,
    pub total: f64,
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// ln(1 + e^x) in overflow-safe form.
fn softplus<F: Float>(x: F) -> F {
    x.max(F::zero()) + (-(x.abs())).exp().ln_1p()
}

fn mean_map<F: Float>(x: &ArrayViewD<'_, F>, f: impl Fn(F) -> F) -> F {
    let n = F::from(x.len()).unwrap();
    x.iter().fold(F::zero(), |acc, &v| acc + f(v)) / n
}

/// Discriminator objective: `-E[log σ(real)] - E[log(1 - σ(fake))]`.
pub fn adv_disc_loss<F: Float>(real: &ArrayViewD<'_, F>, fake: &ArrayViewD<'_, F>) -> F {
    mean_map(real, |r| softplus(-r)) + mean_map(fake, softplus)
}

/// Gradients of [`adv_disc_loss`] with respect to both logit maps.
pub fn adv_disc_grads<F: Float>(
    real: &ArrayViewD<'_, F>,
    fake: &ArrayViewD<'_, F>,
) -> (ArrayD<F>, ArrayD<F>) {
    let nr = F::from(real.len()).unwrap();
    let nf = F::from(fake.len()).unwrap();
    (
        real.mapv(|r| (sigmoid(r) - F::one()) / nr),
        fake.mapv(|f| sigmoid(f) / nf),
    )
}

/// Non-saturating generator objective: `-E[log σ(fake)]`.
pub fn adv_gen_loss<F: Float>(fake: &ArrayViewD<'_, F>) -> F {
    mean_map(fake, |f| softplus(-f))
}

pub fn adv_gen_grad<F: Float>(fake: &ArrayViewD<'_, F>) -> ArrayD<F> {
    let n = F::from(fake.len()).unwrap();
    fake.mapv(|f| (sigmoid(f) - F::one()) / n)
}

/// Mean absolute difference over all elements.
pub fn cycle_loss<F: Float>(
    reconstructed: &ArrayViewD<'_, F>,
    original: &ArrayViewD<'_, F>,
) -> Result<F> {
    if reconstructed.shape() != original.shape() {
        return Err(Error::Shape(format!(
            "cycle loss shapes differ: {:?} vs {:?}",
            reconstructed.shape(),
            original.shape()
        )));
    }
    let n = F::from(reconstructed.len()).unwrap();
    let sum = reconstructed
        .iter()
        .zip(original.iter())
        .fold(F::zero(), |acc, (&a, &b)| acc + (a - b).abs());
    Ok(sum / n)
}

/// Gradient of [`cycle_loss`] with respect to the reconstruction.
pub fn cycle_grad<F: Float>(
    reconstructed: &ArrayViewD<'_, F>,
    original: &ArrayViewD<'_, F>,
) -> ArrayD<F> {
    let n = F::from(reconstructed.len()).unwrap();
    let mut g = reconstructed.to_owned();
    ndarray::Zip::from(&mut g).and(original).for_each(|r, &o| {
        *r = if *r > o {
            F::one() / n
        } else if *r < o {
            -F::one() / n
        } else {
            F::zero()
        };
    });
    g
}

/// Identity penalty: same L1 formula, applied to a generator fed an image
/// already in its own target domain.
pub fn identity_loss<F: Float>(
    output: &ArrayViewD<'_, F>,
    input_img: &ArrayViewD<'_, F>,
) -> Result<F> {
    cycle_loss(output, input_img)
}

pub fn identity_grad<F: Float>(
    output: &ArrayViewD<'_, F>,
    input_img: &ArrayViewD<'_, F>,
) -> ArrayD<F> {
    cycle_grad(output, input_img)
}

/// Combine the six generator-side terms into the weighted total objective.
///
/// Any non-finite part aborts with the offending term named.
pub fn total_loss(
    gan_a: f64,
    gan_b: f64,
    cyc_a: f64,
    cyc_b: f64,
    id_a: f64,
    id_b: f64,
    w: &LossWeights,
) -> Result<f64> {
    for (name, v) in [
        ("gan_a", gan_a),
        ("gan_b", gan_b),
        ("cyc_a", cyc_a),
        ("cyc_b", cyc_b),
        ("id_a", id_a),
        ("id_b", id_b),
    ] {
        if !v.is_finite() {
            return Err(Error::Numerics {
                term: name.into(),
                detail: format!("loss term is {v}"),
            });
        }
    }
    Ok(gan_a + gan_b + w.lambda1 * (cyc_a + cyc_b) + w.lambda2 * (id_a + id_b))
}

impl LossReport {
    pub fn finalize(mut self, w: &LossWeights) -> Result<Self> {
        self.total = total_loss(
            self.gan_a, self.gan_b, self.cyc_a, self.cyc_b, self.id_a, self.id_b, w,
        )?;
        for (name, v) in [("d_n", self.d_n), ("d_a", self.d_a)] {
            if !v.is_finite() {
                return Err(Error::Numerics {
                    term: name.into(),
                    detail: format!("loss term is {v}"),
                });
            }
        }
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn arr(vals: &[f64]) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&[vals.len()]), vals.to_vec()).unwrap()
    }

    #[test]
    fn disc_loss_at_zero_logits_is_two_ln_two() {
        let real = arr(&[0.0, 0.0]);
        let fake = arr(&[0.0]);
        let l = adv_disc_loss(&real.view(), &fake.view());
        assert!((l - 2.0 * LN2).abs() < 1e-12, "{l}");
    }

    #[test]
    fn perfect_discriminator_loss_tends_to_zero() {
        let real = arr(&[40.0]);
        let fake = arr(&[-40.0]);
        let l = adv_disc_loss(&real.view(), &fake.view());
        assert!(l < 1e-12, "{l}");
    }

    #[test]
    fn gen_loss_examples() {
        assert!((adv_gen_loss(&arr(&[0.0]).view()) - LN2).abs() < 1e-12);
        assert!(adv_gen_loss(&arr(&[40.0]).view()) < 1e-12);
        // monotone decreasing in the fake logit
        let mut prev = f64::INFINITY;
        for logit in [-3.0, -1.0, 0.0, 1.0, 3.0] {
            let l = adv_gen_loss(&arr(&[logit]).view());
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn cycle_loss_examples() {
        let a = arr(&[1.0; 8]);
        let b = arr(&[-1.0; 8]);
        assert_eq!(cycle_loss(&a.view(), &a.view()).unwrap(), 0.0);
        assert_eq!(cycle_loss(&a.view(), &b.view()).unwrap(), 2.0);
        assert!(cycle_loss(&a.view(), &arr(&[0.0; 4]).view()).is_err());
    }

    #[test]
    fn cycle_loss_matches_elementwise_oracle_on_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = ArrayD::from_shape_fn(IxDyn(&[4, 4]), |_| rng.random_range(-1.0..1.0));
        let b = ArrayD::from_shape_fn(IxDyn(&[4, 4]), |_| rng.random_range(-1.0..1.0));
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += (a[[i, j]] - b[[i, j]]).abs();
            }
        }
        let oracle: f64 = acc / 16.0;
        let got = cycle_loss(&a.view(), &b.view()).unwrap();
        assert!((got - oracle).abs() < 1e-15);
    }

    #[test]
    fn identity_is_same_formula_as_cycle() {
        let a = arr(&[0.25, -0.5, 0.75]);
        let b = arr(&[0.0, 0.0, 0.0]);
        assert_eq!(
            identity_loss(&a.view(), &b.view()).unwrap(),
            cycle_loss(&a.view(), &b.view()).unwrap()
        );
        assert_eq!(identity_loss(&a.view(), &a.view()).unwrap(), 0.0);
    }

    #[test]
    fn total_loss_reproduces_weighted_sum() {
        let w = LossWeights::default();
        let t = total_loss(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, &w).unwrap();
        assert_eq!(t, 32.0);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        let degenerate = LossWeights {
            lambda1: 0.0,
            lambda2: 0.0,
        };
        assert_eq!(
            total_loss(0.3, 0.4, 9.0, 9.0, 9.0, 9.0, &degenerate).unwrap(),
            0.7
        );
    }

    #[test]
    fn total_loss_names_the_nan_term() {
        let w = LossWeights::default();
        let err = total_loss(1.0, f64::NAN, 0.0, 0.0, 0.0, 0.0, &w).unwrap_err();
        match err {
            Error::Numerics { term, .. } => assert_eq!(term, "gan_b"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    /// Central-difference check of an analytic gradient at 10 probe points.
    fn check_grad(
        probe_shape: &[usize],
        loss: impl Fn(&ArrayD<f64>) -> f64,
        grad: impl Fn(&ArrayD<f64>) -> ArrayD<f64>,
        seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ArrayD::from_shape_fn(IxDyn(probe_shape), |_| rng.random_range(-2.0..2.0));
        let g = grad(&x);
        let h = 1e-6;
        let len = x.len();
        for k in 0..10 {
            let flat = (k * 7919) % len;
            let mut xp = x.clone();
            let mut xm = x.clone();
            {
                let sp = xp.as_slice_mut().unwrap();
                sp[flat] += h;
            }
            {
                let sm = xm.as_slice_mut().unwrap();
                sm[flat] -= h;
            }
            let num = (loss(&xp) - loss(&xm)) / (2.0 * h);
            let ana = g.as_slice().unwrap()[flat];
            let denom = num.abs().max(1e-8);
            assert!(
                ((num - ana) / denom).abs() < 1e-4,
                "probe {flat}: fd={num} analytic={ana}"
            );
        }
    }

    #[test]
    fn adv_gen_grad_matches_finite_differences() {
        check_grad(
            &[3, 7],
            |x| adv_gen_loss(&x.view()),
            |x| adv_gen_grad(&x.view()),
            21,
        );
    }

    #[test]
    fn adv_disc_grads_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let other = ArrayD::from_shape_fn(IxDyn(&[4, 5]), |_| rng.random_range(-2.0..2.0));
        // gradient wrt real logits
        check_grad(
            &[4, 5],
            |x| adv_disc_loss(&x.view(), &other.view()),
            |x| adv_disc_grads(&x.view(), &other.view()).0,
            23,
        );
        // gradient wrt fake logits
        check_grad(
            &[4, 5],
            |x| adv_disc_loss(&other.view(), &x.view()),
            |x| adv_disc_grads(&other.view(), &x.view()).1,
            24,
        );
    }

    #[test]
    fn cycle_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let target = ArrayD::from_shape_fn(IxDyn(&[2, 3, 3]), |_| rng.random_range(-1.0..1.0));
        check_grad(
            &[2, 3, 3],
            |x| cycle_loss(&x.view(), &target.view()).unwrap(),
            |x| cycle_grad(&x.view(), &target.view()),
            26,
        );
    }

    #[test]
    fn losses_are_nonnegative_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..50 {
            let a = ArrayD::from_shape_fn(IxDyn(&[6]), |_| rng.random_range(-5.0..5.0));
            let b = ArrayD::from_shape_fn(IxDyn(&[6]), |_| rng.random_range(-5.0..5.0));
            assert!(adv_disc_loss(&a.view(), &b.view()) >= 0.0);
            assert!(adv_gen_loss(&a.view()) >= 0.0);
            assert!(cycle_loss(&a.view(), &b.view()).unwrap() >= 0.0);
        }
    }
}

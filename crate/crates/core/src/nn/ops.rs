//! Stateless tensor operations: activations, pooling, upsampling, padding.

use ndarray::{s, Array2, Array4, Axis};

pub fn relu(x: &Array4<f32>) -> Array4<f32> {
    x.mapv(|v| v.max(0.0))
}

/// Backward through ReLU given the forward *output*.
pub fn relu_backward(y: &Array4<f32>, dy: &Array4<f32>) -> Array4<f32> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &yv| {
        if yv <= 0.0 {
            *d = 0.0;
        }
    });
    dx
}

pub fn leaky_relu(x: &Array4<f32>, slope: f32) -> Array4<f32> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward(y: &Array4<f32>, dy: &Array4<f32>, slope: f32) -> Array4<f32> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &yv| {
        if yv <= 0.0 {
            *d *= slope;
        }
    });
    dx
}

pub fn tanh(x: &Array4<f32>) -> Array4<f32> {
    x.mapv(f32::tanh)
}

/// Backward through Tanh given the forward output.
pub fn tanh_backward(y: &Array4<f32>, dy: &Array4<f32>) -> Array4<f32> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|d, &yv| {
        *d *= 1.0 - yv * yv;
    });
    dx
}

/// Max over spatial dims: `[N, C, H, W] -> [N, C]`, plus flat argmax indices.
pub fn global_max_pool(x: &Array4<f32>) -> (Array2<f32>, Array2<usize>) {
    let (n, c, h, w) = x.dim();
    let mut y = Array2::<f32>::zeros((n, c));
    let mut idx = Array2::<usize>::zeros((n, c));
    for i in 0..n {
        for ch in 0..c {
            let plane = x.slice(s![i, ch, .., ..]);
            let flat = plane.as_slice().expect("contiguous");
            let (best, val) = flat
                .iter()
                .enumerate()
                .fold((0usize, f32::NEG_INFINITY), |acc, (j, &v)| {
                    if v > acc.1 {
                        (j, v)
                    } else {
                        acc
                    }
                });
            y[[i, ch]] = val;
            idx[[i, ch]] = best;
            let _ = (h, w);
        }
    }
    (y, idx)
}

pub fn global_max_pool_backward(
    dy: &Array2<f32>,
    idx: &Array2<usize>,
    shape: (usize, usize, usize, usize),
) -> Array4<f32> {
    let mut dx = Array4::<f32>::zeros(shape);
    let (_, _, h, w) = shape;
    for ((i, c), &flat) in idx.indexed_iter() {
        dx[[i, c, flat / w, flat % w]] += dy[[i, c]];
        let _ = h;
    }
    dx
}

/// Nearest-neighbor 2x upsample.
pub fn upsample2x(x: &Array4<f32>) -> Array4<f32> {
    let (n, c, h, w) = x.dim();
    let mut y = Array4::<f32>::zeros((n, c, h * 2, w * 2));
    for i in 0..n {
        for ch in 0..c {
            for yy in 0..h {
                for xx in 0..w {
                    let v = x[[i, ch, yy, xx]];
                    y[[i, ch, 2 * yy, 2 * xx]] = v;
                    y[[i, ch, 2 * yy, 2 * xx + 1]] = v;
                    y[[i, ch, 2 * yy + 1, 2 * xx]] = v;
                    y[[i, ch, 2 * yy + 1, 2 * xx + 1]] = v;
                }
            }
        }
    }
    y
}

pub fn upsample2x_backward(dy: &Array4<f32>) -> Array4<f32> {
    let (n, c, h2, w2) = dy.dim();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Array4::<f32>::zeros((n, c, h, w));
    for i in 0..n {
        for ch in 0..c {
            for yy in 0..h {
                for xx in 0..w {
                    dx[[i, ch, yy, xx]] = dy[[i, ch, 2 * yy, 2 * xx]]
                        + dy[[i, ch, 2 * yy, 2 * xx + 1]]
                        + dy[[i, ch, 2 * yy + 1, 2 * xx]]
                        + dy[[i, ch, 2 * yy + 1, 2 * xx + 1]];
                }
            }
        }
    }
    dx
}

pub fn concat_channels(a: &Array4<f32>, b: &Array4<f32>) -> Array4<f32> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("channel concat shapes")
}

/// Split a channel-concatenated gradient back into its two parts.
pub fn split_channels(d: &Array4<f32>, first: usize) -> (Array4<f32>, Array4<f32>) {
    (
        d.slice(s![.., ..first, .., ..]).to_owned(),
        d.slice(s![.., first.., .., ..]).to_owned(),
    )
}

/// Reflect an out-of-range index back into `[0, n)`, folding as many times as
/// needed so any pad size is legal.
fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// Reflect-pad the spatial dims to the given target size (centered).
pub fn pad_reflect(x: &Array4<f32>, target_h: usize, target_w: usize) -> Array4<f32> {
    let (n, c, h, w) = x.dim();
    assert!(target_h >= h && target_w >= w);
    let top = (target_h - h) / 2;
    let left = (target_w - w) / 2;
    let mut y = Array4::<f32>::zeros((n, c, target_h, target_w));
    for i in 0..n {
        for ch in 0..c {
            for yy in 0..target_h {
                let sy = reflect_index(yy as isize - top as isize, h);
                for xx in 0..target_w {
                    let sx = reflect_index(xx as isize - left as isize, w);
                    y[[i, ch, yy, xx]] = x[[i, ch, sy, sx]];
                }
            }
        }
    }
    y
}

/// Center-crop spatial dims back to `h x w` (inverse of [`pad_reflect`]).
pub fn crop_center(x: &Array4<f32>, h: usize, w: usize) -> Array4<f32> {
    let (_, _, ph, pw) = x.dim();
    let top = (ph - h) / 2;
    let left = (pw - w) / 2;
    x.slice(s![.., .., top..top + h, left..left + w]).to_owned()
}

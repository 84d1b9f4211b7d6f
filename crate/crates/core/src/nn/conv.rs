//! 2-D convolution via tiled im2col + GEMM.

use super::{randn, NamedTensor, ParamRef};
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array4, ArrayView3, ArrayViewMut3};
use rand::Rng;

/// Column-buffer budget per GEMM tile.
const COL_BUF_BYTES: usize = 8 << 20;

pub struct Conv2d {
    /// Flattened kernel `[out_c, in_c * kh * kw]`.
    pub w: Array2<f32>,
    pub b: Array1<f32>,
    pub gw: Array2<f32>,
    pub gb: Array1<f32>,
    pub in_c: usize,
    pub out_c: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let w = Array2::from_shape_fn((out_c, in_c * k * k), |_| randn(rng, 0.02));
        Conv2d {
            w,
            b: Array1::zeros(out_c),
            gw: Array2::zeros((out_c, in_c * k * k)),
            gb: Array1::zeros(out_c),
            in_c,
            out_c,
            kh: k,
            kw: k,
            stride,
            pad,
        }
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.kh) / self.stride + 1,
            (w + 2 * self.pad - self.kw) / self.stride + 1,
        )
    }

    fn tile_rows(&self, wo: usize) -> usize {
        let row_bytes = 4 * self.in_c * self.kh * self.kw * wo;
        (COL_BUF_BYTES / row_bytes.max(1)).max(1)
    }

    pub fn forward(&self, x: &Array4<f32>) -> Array4<f32> {
        let (n, c, h, w) = x.dim();
        assert_eq!(c, self.in_c, "conv input channels");
        let (ho, wo) = self.out_size(h, w);
        let mut y = Array4::<f32>::zeros((n, self.out_c, ho, wo));
        let ckk = self.in_c * self.kh * self.kw;
        let tile = self.tile_rows(wo);
        let mut col = Array2::<f32>::zeros((ckk, tile * wo));
        let mut ymat = Array2::<f32>::zeros((self.out_c, tile * wo));
        for i in 0..n {
            let xi = x.index_axis(ndarray::Axis(0), i);
            let mut yi = y.index_axis_mut(ndarray::Axis(0), i);
            let ys = yi.as_slice_mut().expect("output is standard layout");
            let mut y0 = 0;
            while y0 < ho {
                let y1 = (y0 + tile).min(ho);
                let cols = (y1 - y0) * wo;
                im2col(&xi, self, y0, y1, wo, col.as_slice_mut().unwrap(), tile * wo);
                {
                    let mut ymat_t = ymat.slice_mut(s![.., ..cols]);
                    general_mat_mul(1.0, &self.w, &col.slice(s![.., ..cols]), 0.0, &mut ymat_t);
                }
                let ysrc = ymat.as_slice().unwrap();
                for oc in 0..self.out_c {
                    let dst = &mut ys[oc * ho * wo + y0 * wo..oc * ho * wo + y0 * wo + cols];
                    let src = &ysrc[oc * tile * wo..oc * tile * wo + cols];
                    let bias = self.b[oc];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d = s + bias;
                    }
                }
                y0 = y1;
            }
        }
        y
    }

    /// Accumulates `gw`/`gb` and returns the input gradient.
    pub fn backward(&mut self, x: &Array4<f32>, dy: &Array4<f32>) -> Array4<f32> {
        let (n, _, h, w) = x.dim();
        let (_, oc, ho, wo) = dy.dim();
        assert_eq!(oc, self.out_c);
        let ckk = self.in_c * self.kh * self.kw;
        let tile = self.tile_rows(wo);
        let mut col = Array2::<f32>::zeros((ckk, tile * wo));
        let mut dcol = Array2::<f32>::zeros((ckk, tile * wo));
        let mut dx = Array4::<f32>::zeros((n, self.in_c, h, w));
        for i in 0..n {
            let xi = x.index_axis(ndarray::Axis(0), i);
            let dyi = dy.index_axis(ndarray::Axis(0), i);
            let mut dxi = dx.index_axis_mut(ndarray::Axis(0), i);
            let mut y0 = 0;
            while y0 < ho {
                let y1 = (y0 + tile).min(ho);
                let cols = (y1 - y0) * wo;
                let dy_block = dyi.slice(s![.., y0..y1, ..]);
                let dy_flat = dy_block.to_shape((self.out_c, cols)).unwrap();

                im2col(&xi, self, y0, y1, wo, col.as_slice_mut().unwrap(), tile * wo);
                // gw += dy . col^T
                general_mat_mul(
                    1.0,
                    &dy_flat,
                    &col.slice(s![.., ..cols]).t(),
                    1.0,
                    &mut self.gw,
                );
                // dcol = w^T . dy
                {
                    let mut dcol_t = dcol.slice_mut(s![.., ..cols]);
                    general_mat_mul(1.0, &self.w.t(), &dy_flat, 0.0, &mut dcol_t);
                }
                col2im(dcol.as_slice().unwrap(), tile * wo, self, y0, y1, wo, &mut dxi);
                y0 = y1;
            }
            for (c, plane) in dyi.outer_iter().enumerate() {
                self.gb[c] += plane.sum();
            }
        }
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

/// Gather input patches for output rows `[y_start, y_end)` into the first
/// `(y_end - y_start) * wo` columns of each `col` row (`row_stride` apart).
fn im2col(
    x: &ArrayView3<'_, f32>,
    cv: &Conv2d,
    y_start: usize,
    y_end: usize,
    wo: usize,
    cs: &mut [f32],
    row_stride: usize,
) {
    let (_, h, w) = x.dim();
    let rows = y_end - y_start;
    let xs = x.as_slice().expect("conv input must be contiguous");
    let ncols = rows * wo;
    for c in 0..cv.in_c {
        let x_plane = &xs[c * h * w..(c + 1) * h * w];
        for ky in 0..cv.kh {
            for kx in 0..cv.kw {
                let row_idx = (c * cv.kh + ky) * cv.kw + kx;
                let out_row = &mut cs[row_idx * row_stride..row_idx * row_stride + ncols];
                for oy in y_start..y_end {
                    let iy = (oy * cv.stride + ky) as isize - cv.pad as isize;
                    let dst = &mut out_row[(oy - y_start) * wo..(oy - y_start + 1) * wo];
                    if iy < 0 || iy as usize >= h {
                        dst.fill(0.0);
                        continue;
                    }
                    let x_row = &x_plane[iy as usize * w..(iy as usize + 1) * w];
                    if cv.stride == 1 {
                        // contiguous segment with zero-filled edges
                        let shift = kx as isize - cv.pad as isize;
                        copy_shifted(x_row, dst, shift);
                    } else {
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * cv.stride + kx) as isize - cv.pad as isize;
                            *d = if ix < 0 || ix as usize >= w {
                                0.0
                            } else {
                                x_row[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add column gradients back into the input gradient image.
fn col2im(
    ds: &[f32],
    row_stride: usize,
    cv: &Conv2d,
    y_start: usize,
    y_end: usize,
    wo: usize,
    dx: &mut ArrayViewMut3<'_, f32>,
) {
    let (_, h, w) = dx.dim();
    let rows = y_end - y_start;
    let ncols = rows * wo;
    let xs = dx.as_slice_mut().expect("dx must be contiguous");
    for c in 0..cv.in_c {
        let dx_plane = &mut xs[c * h * w..(c + 1) * h * w];
        for ky in 0..cv.kh {
            for kx in 0..cv.kw {
                let row_idx = (c * cv.kh + ky) * cv.kw + kx;
                let src_row = &ds[row_idx * row_stride..row_idx * row_stride + ncols];
                for oy in y_start..y_end {
                    let iy = (oy * cv.stride + ky) as isize - cv.pad as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let src = &src_row[(oy - y_start) * wo..(oy - y_start + 1) * wo];
                    let dst_row = &mut dx_plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, s) in src.iter().enumerate() {
                        let ix = (ox * cv.stride + kx) as isize - cv.pad as isize;
                        if ix >= 0 && (ix as usize) < w {
                            dst_row[ix as usize] += *s;
                        }
                    }
                }
            }
        }
    }
}

/// dst[i] = src[i + shift] with zero fill outside bounds (separate lengths).
fn copy_shifted(src: &[f32], dst: &mut [f32], shift: isize) {
    let n_dst = dst.len() as isize;
    let n_src = src.len() as isize;
    let lo = (-shift).max(0).min(n_dst);
    let hi = (n_src - shift).clamp(0, n_dst);
    dst[..lo as usize].fill(0.0);
    if hi > lo {
        dst[lo as usize..hi as usize]
            .copy_from_slice(&src[(lo + shift) as usize..(hi + shift) as usize]);
    }
    dst[hi.max(lo) as usize..].fill(0.0);
}

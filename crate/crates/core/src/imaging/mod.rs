//! Image representation and ingest.
//!
//! All pixel data in this crate is `H x W x 3` floating point in `[-1, 1]`,
//! channel order RGB. 8-bit PNG is the only on-disk format; [`Image::normalize`]
//! is the only ingest path.

mod synth;

pub use synth::{apply_illumination, apply_illumination_detailed, synth_clean_document, SynthSpec};

use crate::error::{Error, Result};
use ndarray::{Array3, Array4, ArrayView3, Axis};
use rand::Rng;
use std::path::Path;

/// An RGB image normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array3<f32>,
}

impl Image {
    /// Wrap an `H x W x 3` array, checking the range invariant.
    pub fn from_pixels(data: Array3<f32>) -> Result<Self> {
        let shape = data.shape();
        if shape[2] != 3 {
            return Err(Error::Shape(format!(
                "expected 3 channels, got {}",
                shape[2]
            )));
        }
        if shape[0] == 0 || shape[1] == 0 {
            return Err(Error::Shape("image has zero height or width".into()));
        }
        if data.iter().any(|v| !v.is_finite() || *v < -1.0 || *v > 1.0) {
            return Err(Error::Domain(
                "pixel values must be finite and in [-1, 1]".into(),
            ));
        }
        Ok(Image { data })
    }

    pub(crate) fn from_pixels_unchecked(data: Array3<f32>) -> Self {
        debug_assert_eq!(data.shape()[2], 3);
        Image { data }
    }

    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn pixels(&self) -> ArrayView3<'_, f32> {
        self.data.view()
    }

    /// Map 8-bit pixels into `[-1, 1]`: `p' = p / 127.5 - 1`.
    pub fn normalize(raw: &Array3<u8>) -> Result<Self> {
        if raw.shape()[2] != 3 {
            return Err(Error::Shape(format!(
                "expected 3 channels, got {}",
                raw.shape()[2]
            )));
        }
        let data = raw.mapv(|p| p as f32 / 127.5 - 1.0);
        Ok(Image { data })
    }

    /// Inverse of [`Image::normalize`]: clamp to `[0, 255]` and round.
    pub fn denormalize(&self) -> Array3<u8> {
        self.data
            .mapv(|v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let raw = Array3::from_shape_vec((h, w, 3), img.into_raw())
            .map_err(|e| Error::Shape(e.to_string()))?;
        Image::normalize(&raw)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.denormalize();
        let (h, w) = (self.height() as u32, self.width() as u32);
        let buf = image::RgbImage::from_raw(w, h, bytes.into_raw_vec_and_offset().0)
            .expect("buffer size matches dimensions");
        buf.save(path)?;
        Ok(())
    }

    /// Cut a `size x size` patch at a uniformly random offset.
    pub fn random_crop<R: Rng>(&self, size: usize, rng: &mut R) -> Result<Image> {
        let (h, w) = (self.height(), self.width());
        if size == 0 || h < size || w < size {
            return Err(Error::Shape(format!(
                "cannot crop {size}x{size} from {h}x{w} image"
            )));
        }
        let y0 = rng.random_range(0..=h - size);
        let x0 = rng.random_range(0..=w - size);
        Ok(self.crop(y0, x0, size, size))
    }

    pub fn crop(&self, y0: usize, x0: usize, height: usize, width: usize) -> Image {
        let view = self
            .data
            .slice(ndarray::s![y0..y0 + height, x0..x0 + width, ..]);
        Image {
            data: view.to_owned(),
        }
    }

    /// Channel-first tensor view `[3, H, W]` for the networks.
    pub fn to_chw(&self) -> Array3<f32> {
        let mut t = self.data.clone();
        t.swap_axes(0, 2); // [3, W, H]
        t.swap_axes(1, 2); // [3, H, W]
        t.as_standard_layout().to_owned()
    }

    /// Build an image from a `[3, H, W]` tensor, clamping into `[-1, 1]`.
    pub fn from_chw(chw: &ArrayView3<'_, f32>) -> Image {
        let (_, h, w) = (chw.shape()[0], chw.shape()[1], chw.shape()[2]);
        let data = Array3::from_shape_fn((h, w, 3), |(y, x, c)| chw[[c, y, x]].clamp(-1.0, 1.0));
        Image { data }
    }

    /// Per-channel mean in `[-1, 1]` units.
    pub fn mean_rgb(&self) -> [f32; 3] {
        let mut sums = [0.0f64; 3];
        for (idx, v) in self.data.indexed_iter() {
            sums[idx.2] += *v as f64;
        }
        let n = (self.height() * self.width()) as f64;
        [
            (sums[0] / n) as f32,
            (sums[1] / n) as f32,
            (sums[2] / n) as f32,
        ]
    }
}

/// Stack images into a `[N, 3, H, W]` batch tensor.
pub fn batch_tensor(images: &[Image]) -> Result<Array4<f32>> {
    let first = images
        .first()
        .ok_or_else(|| Error::Shape("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut out = Array4::zeros((images.len(), 3, h, w));
    for (i, img) in images.iter().enumerate() {
        if img.height() != h || img.width() != w {
            return Err(Error::Shape("batch images differ in size".into()));
        }
        out.index_axis_mut(Axis(0), i).assign(&img.to_chw());
    }
    Ok(out)
}

//! Synthetic document generation and illumination degradation.
//!
//! Clean pages are near-white canvases with dark text-like strokes and colored
//! figure blocks. Degradation is per-channel multiplicative shading: the page
//! is treated as a diffuse reflector, so the local background color of the
//! degraded image reveals the ambient light.

use super::Image;
use crate::error::{Error, Result};
use crate::light::LightVector;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Knobs for one synthetic document. Identical spec => byte-identical image.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Square canvas edge length in pixels.
    pub canvas: usize,
    pub seed: u64,
    /// Fraction of candidate word slots that get drawn, in [0, 1].
    pub text_density: f64,
    pub figure_count: usize,
    /// Ground-truth ambient light used by the degradation step.
    pub light: LightVector,
    /// Larger values flatten the shading field; the relative amplitude of the
    /// field is bounded by 1 / (1 + shading_smoothness).
    pub shading_smoothness: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            canvas: 256,
            seed: 0,
            text_density: 0.55,
            figure_count: 2,
            light: LightVector { r: 0.4, g: 0.3, b: 0.1 },
            shading_smoothness: 4.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.canvas < 16 {
            return Err(Error::Config(format!(
                "canvas size {} too small (minimum 16)",
                self.canvas
            )));
        }
        if !(0.0..=1.0).contains(&self.text_density) {
            return Err(Error::Config(format!(
                "text_density {} outside [0, 1]",
                self.text_density
            )));
        }
        if !(self.shading_smoothness > 0.0) {
            return Err(Error::Config("shading_smoothness must be positive".into()));
        }
        self.light.validate()
    }

    fn amplitude(&self) -> f64 {
        1.0 / (1.0 + self.shading_smoothness)
    }
}

/// Render a clean, uniformly lit document page.
pub fn synth_clean_document(spec: &SynthSpec) -> Result<Image> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.canvas;

    // Background in [0, 1] reflectance units; kept very close to paper white
    // so the degraded background tracks the shading field tightly.
    let bg: f32 = rng.random_range(0.992..0.999);
    let mut page = Array2::<[f32; 3]>::from_elem((n, n), [bg, bg, bg]);

    // Text: rows of dark word-like strokes.
    let margin = n / 12;
    let line_h = (n / 32).max(2);
    let gap = (line_h / 2).max(1);
    let ink: f32 = rng.random_range(0.02..0.08);
    let mut y = margin;
    while y + line_h < n - margin {
        let mut x = margin;
        while x + line_h < n - margin {
            let word = rng.random_range(line_h..line_h * 4).min(n - margin - x);
            if rng.random_bool(spec.text_density) {
                for yy in y..y + line_h.saturating_sub(1).max(1) {
                    for xx in x..x + word {
                        page[[yy, xx]] = [ink, ink, ink];
                    }
                }
            }
            x += word + gap.max(2);
        }
        y += line_h + gap;
    }

    // Figures: solid mid-tone colored blocks.
    for _ in 0..spec.figure_count {
        let fh = rng.random_range(n / 8..=n / 4);
        let fw = rng.random_range(n / 8..=n / 4);
        let fy = rng.random_range(margin..(n - margin - fh).max(margin + 1));
        let fx = rng.random_range(margin..(n - margin - fw).max(margin + 1));
        let color = [
            rng.random_range(0.15..0.85),
            rng.random_range(0.15..0.85),
            rng.random_range(0.15..0.85),
        ];
        for yy in fy..fy + fh {
            for xx in fx..fx + fw {
                page[[yy, xx]] = color;
            }
        }
    }

    let data = Array3::from_shape_fn((n, n, 3), |(yy, xx, c)| page[[yy, xx]][c] * 2.0 - 1.0);
    Ok(Image::from_pixels_unchecked(data))
}

/// Degrade a clean page under the given ambient light.
///
/// See [`apply_illumination_detailed`]; this drops the realized light.
pub fn apply_illumination<R: Rng>(
    clean: &Image,
    light: &LightVector,
    spec: &SynthSpec,
    rng: &mut R,
) -> Result<Image> {
    apply_illumination_detailed(clean, light, spec, rng).map(|(img, _)| img)
}

/// Degrade a clean page and report the realized ground-truth light.
///
/// The degraded image is `clean ⊙ S` in [0, 1] reflectance units, where `S` is
/// a smooth positive field whose spatial mean per channel equals the light in
/// reflectance units. The realized light is defined as the per-channel mean of
/// `S` over the background mask of the clean page, mapped back to `[-1, 1]`.
pub fn apply_illumination_detailed<R: Rng>(
    clean: &Image,
    light: &LightVector,
    spec: &SynthSpec,
    rng: &mut R,
) -> Result<(Image, LightVector)> {
    light.validate()?;
    let (h, w) = (clean.height(), clean.width());
    let target = light.to_unit();

    // Smooth field from a bilinearly interpolated coarse grid.
    let grid = 5usize;
    let mut coarse = Array2::<f64>::zeros((grid, grid));
    for v in coarse.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    // Cap the amplitude so S never exceeds 1 for the brightest channel.
    let max_target = target.iter().cloned().fold(0.0f32, f32::max) as f64;
    let headroom = (1.0 / max_target - 1.0) * 0.9;
    let amp = spec.amplitude().min(headroom).max(0.0);

    let mut field = Array2::<f64>::zeros((h, w));
    for ((y, x), v) in field.indexed_iter_mut() {
        let fy = y as f64 / (h.max(2) - 1) as f64 * (grid - 1) as f64;
        let fx = x as f64 / (w.max(2) - 1) as f64 * (grid - 1) as f64;
        let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(grid - 1), (x0 + 1).min(grid - 1));
        let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
        let g = coarse[[y0, x0]] * (1.0 - ty) * (1.0 - tx)
            + coarse[[y0, x1]] * (1.0 - ty) * tx
            + coarse[[y1, x0]] * ty * (1.0 - tx)
            + coarse[[y1, x1]] * ty * tx;
        *v = 1.0 + amp * g;
    }
    let field_mean = field.mean().unwrap();

    // Per-channel shading: renormalized so its spatial mean is exactly the target.
    let shade = |y: usize, x: usize, c: usize| -> f64 {
        target[c] as f64 * field[[y, x]] / field_mean
    };

    let clean_px = clean.pixels();
    let mut degraded = Array3::<f32>::zeros((h, w, 3));
    let mut mask_sum = [0.0f64; 3];
    let mut mask_count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let is_bg = (0..3).all(|c| (clean_px[[y, x, c]] + 1.0) * 0.5 > 0.97);
            if is_bg {
                mask_count += 1;
            }
            for c in 0..3 {
                let c01 = (clean_px[[y, x, c]] as f64 + 1.0) * 0.5;
                let s = shade(y, x, c);
                if is_bg {
                    mask_sum[c] += s;
                }
                let d01 = (c01 * s).clamp(0.0, 1.0);
                degraded[[y, x, c]] = (d01 * 2.0 - 1.0) as f32;
            }
        }
    }

    let realized = if mask_count > 0 {
        LightVector::new(
            (mask_sum[0] / mask_count as f64 * 2.0 - 1.0) as f32,
            (mask_sum[1] / mask_count as f64 * 2.0 - 1.0) as f32,
            (mask_sum[2] / mask_count as f64 * 2.0 - 1.0) as f32,
        )?
    } else {
        *light
    };
    Ok((Image::from_pixels_unchecked(degraded), realized))
}

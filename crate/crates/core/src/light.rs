//! Ambient light vectors.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A 3-component RGB ambient light estimate in normalized image units.
///
/// Components live in the open interval (-1, 1), matching the Tanh output
/// range of the light prediction network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightVector {
    pub r: f32,
    pub g: f32,
    pub b: f32,
}

impl LightVector {
    pub fn new(r: f32, g: f32, b: f32) -> Result<Self> {
        let v = LightVector { r, g, b };
        v.validate()?;
        Ok(v)
    }

    /// Check the open-range and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("r", self.r), ("g", self.g), ("b", self.b)] {
            if !c.is_finite() || c <= -1.0 || c >= 1.0 {
                return Err(Error::Domain(format!(
                    "light component {name}={c} outside (-1, 1)"
                )));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> [f32; 3] {
        [self.r, self.g, self.b]
    }

    /// Map to reflectance units: [-1, 1] -> [0, 1] per channel.
    pub fn to_unit(&self) -> [f32; 3] {
        [
            (self.r + 1.0) * 0.5,
            (self.g + 1.0) * 0.5,
            (self.b + 1.0) * 0.5,
        ]
    }

    pub fn from_components(c: [f32; 3]) -> Result<Self> {
        Self::new(c[0], c[1], c[2])
    }

    /// Sum of absolute per-component differences.
    pub fn l1_distance(&self, other: &LightVector) -> f32 {
        (self.r - other.r).abs() + (self.g - other.g).abs() + (self.b - other.b).abs()
    }
}

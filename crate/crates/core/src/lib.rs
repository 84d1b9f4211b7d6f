//! Unpaired document illumination correction with an ambient-light prior.
//!
//! A light prediction network estimates the ambient background light of a
//! document photo; a FIFO light container recycles those predictions as random
//! priors; and two light-conditioned adversarial generators are trained with
//! cycle, identity and adversarial losses on unpaired pools of normal and
//! abnormal illumination images. The crate also ships a synthetic document
//! generator that stands in for a real dataset at desk scale, and the
//! evaluation metric suite (MS-SSIM, edit distance, character error rate).

pub mod error;
pub mod imaging;
pub mod light;
pub mod lightstore;
pub mod losses;
pub mod nn;

pub use error::{Error, Result};
pub use imaging::Image;
pub use light::LightVector;
pub use lightstore::LightContainer;

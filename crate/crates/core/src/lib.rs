//! Vision Transformer inference with greedy token-discarding attribution.
//!
//! The pipeline: load a TNSA weight archive ([`archive`]), validate it
//! against a [`vit::ViTConfig`], decode and normalize an image
//! ([`imageio`]), then either classify it or search for the tokens whose
//! removal flips the prediction ([`attribution`]). [`analysis`] aggregates
//! traces across a cohort and renders overlays.

pub mod analysis;
pub mod archive;
pub mod attribution;
pub mod cli;
pub mod error;
pub mod imageio;
pub mod tensor;
pub mod vit;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MLP hidden width as a multiple of the embedding width.
pub const MLP_RATIO: usize = 4;

/// LayerNorm epsilon used throughout the encoder.
pub const LN_EPS: f32 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViTConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub dim: usize,
    pub depth: usize,
    pub heads: usize,
    pub num_classes: usize,
}

/// Named geometry presets, looked up by [`ViTConfig::preset`].
const PRESETS: &[(&str, ViTConfig)] = &[
    (
        "vitb16",
        ViTConfig {
            image_size: 224,
            patch_size: 16,
            dim: 768,
            depth: 12,
            heads: 12,
            num_classes: 2,
        },
    ),
    (
        "tiny",
        ViTConfig {
            image_size: 32,
            patch_size: 8,
            dim: 64,
            depth: 2,
            heads: 4,
            num_classes: 2,
        },
    ),
];

impl ViTConfig {
    pub fn new(
        image_size: usize,
        patch_size: usize,
        dim: usize,
        depth: usize,
        heads: usize,
        num_classes: usize,
    ) -> Result<Self> {
        let cfg = Self {
            image_size,
            patch_size,
            dim,
            depth,
            heads,
            num_classes,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| *c)
            .ok_or_else(|| Error::Unknown {
                kind: "config preset",
                name: name.to_owned(),
                available: Self::preset_names().join(", "),
            })
    }

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.patch_size == 0 || self.image_size == 0 {
            return bad("image_size and patch_size must be positive".into());
        }
        if !self.image_size.is_multiple_of(self.patch_size) {
            return bad(format!(
                "image_size {} not divisible by patch_size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.heads == 0 || self.depth == 0 || self.num_classes == 0 || self.dim == 0 {
            return bad("dim, depth, heads and num_classes must be >= 1".into());
        }
        if !self.dim.is_multiple_of(self.heads) {
            return bad(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            ));
        }
        Ok(())
    }

    /// Patches per side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    /// Number of patch tokens N (the class token is extra).
    pub fn num_tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    /// Flattened length of one patch, `P·P·3`.
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn mlp_dim(&self) -> usize {
        self.dim * MLP_RATIO
    }
}

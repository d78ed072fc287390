use std::fmt::Write as _;
use std::path::PathBuf;

use crate::attribution::{Scheduler, Target};
use crate::error::Result;
use crate::imageio::Normalization;
use crate::vit::{ViTConfig, ViTModel, ViTWeights};

use super::{ModelArgs, SearchArgs};

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub weights: PathBuf,
    pub config_name: String,
    pub config: ViTConfig,
    pub normalization: Normalization,
    pub target: Target,
    pub max_iters: Option<usize>,
    pub workers: usize,
    pub wave_size: Option<usize>,
}

impl RunManifest {
    pub fn resolve(model: &ModelArgs, search: Option<&SearchArgs>) -> Result<Self> {
        let mut config = ViTConfig::preset(&model.config)?;
        let overrides = [
            (&mut config.image_size, model.image_size),
            (&mut config.patch_size, model.patch_size),
            (&mut config.dim, model.dim),
            (&mut config.depth, model.depth),
            (&mut config.heads, model.heads),
            (&mut config.num_classes, model.classes),
        ];
        for (slot, value) in overrides {
            if let Some(v) = value {
                *slot = v;
            }
        }
        config.validate()?;
        let base = Normalization::IMAGENET;
        let normalization = Normalization::new(
            model.mean.unwrap_or(base.mean),
            model.std.unwrap_or(base.std),
        )?;
        Ok(Self {
            weights: model.weights.clone(),
            config_name: model.config.clone(),
            config,
            normalization,
            target: search.map_or(Target::Auto, |s| s.target),
            max_iters: search.and_then(|s| s.max_iters),
            workers: search.map_or(1, |s| s.workers),
            wave_size: search.and_then(|s| s.wave_size),
        })
    }

    pub fn load_model(&self) -> Result<ViTModel> {
        let weights = ViTWeights::load(&self.weights, &self.config)?;
        Ok(ViTModel::new(weights, self.normalization))
    }

    pub fn scheduler(&self) -> Result<Scheduler> {
        Scheduler::new(self.workers, self.wave_size)
    }

    /// Header lines for logs. Scheduling knobs are left out so logs do not
    /// depend on them.
    pub fn describe(&self) -> String {
        let c = &self.config;
        let n = &self.normalization;
        let mut s = String::new();
        let _ = writeln!(s, "weights: {}", self.weights.display());
        let _ = writeln!(
            s,
            "config: {} (image {}, patch {}, dim {}, depth {}, heads {}, classes {})",
            self.config_name, c.image_size, c.patch_size, c.dim, c.depth, c.heads, c.num_classes
        );
        let _ = writeln!(s, "normalization: mean {:?} std {:?}", n.mean, n.std);
        let _ = writeln!(s, "target: {}", self.target);
        let _ = writeln!(
            s,
            "max_iters: {}",
            self.max_iters
                .map_or("tokens".to_owned(), |m| m.to_string())
        );
        s
    }
}

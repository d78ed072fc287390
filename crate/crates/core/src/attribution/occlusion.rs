//! Patch occlusion baseline: overwrite one patch's pixels with a fill colour,
//! keep the token count, and record the confidence drop. The fill itself is
//! visible to the model, unlike token discarding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{resize_bilinear, InputImage};

use super::classifier::{ImageClassifier, Scheduler};
use super::importance::ImportanceMap;
use super::token_insight::Target;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fill {
    /// Pixel value 0 in every channel.
    Black,
    /// Per-channel mean of the (resized) input image.
    Mean,
}

impl FromStr for Fill {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "black" => Ok(Self::Black),
            "mean" => Ok(Self::Mean),
            other => Err(format!("fill must be black or mean, got {other:?}")),
        }
    }
}

impl fmt::Display for Fill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Black => "black",
            Self::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionResult {
    pub schema: u32,
    pub method: String,
    pub fill: Fill,
    pub target_class: usize,
    pub initial_confidence: f32,
    /// Full-input confidence minus occluded confidence, per token.
    pub drops: Vec<f32>,
    /// 1-based rank per token: descending drop, ties by index.
    pub ranks: Vec<usize>,
}

impl OcclusionResult {
    pub fn importance(&self) -> Result<ImportanceMap> {
        let grid = (self.drops.len() as f64).sqrt() as usize;
        let mut order: Vec<usize> = (0..self.drops.len()).collect();
        order.sort_by_key(|&t| self.ranks[t]);
        ImportanceMap::from_ranking(grid, order.into_iter().map(|t| (t, self.drops[t])))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("occlusion result serializes");
        s.push('\n');
        s
    }
}

/// Copy of `img` with patch `token` painted `rgb`.
pub fn occlude_patch(img: &InputImage, token: usize, patch: usize, rgb: [f32; 3]) -> InputImage {
    let grid = img.width() / patch;
    let (x0, y0) = ((token % grid) * patch, (token / grid) * patch);
    let mut out = img.clone();
    for y in y0..y0 + patch {
        for x in x0..x0 + patch {
            out.set_pixel(x, y, rgb);
        }
    }
    out
}

/// Ranks tokens by descending drop, ties by ascending index.
pub fn rank_by_drop(drops: &[f32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..drops.len()).collect();
    order.sort_by(|&a, &b| drops[b].total_cmp(&drops[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; drops.len()];
    for (r, t) in order.into_iter().enumerate() {
        ranks[t] = r + 1;
    }
    ranks
}

pub fn run_occlusion<M: ImageClassifier + ?Sized>(
    model: &M,
    img: &InputImage,
    fill: Fill,
    target: Target,
    scheduler: &Scheduler,
) -> Result<OcclusionResult> {
    let size = model.image_size();
    let patch = model.patch_size();
    if patch == 0 || !size.is_multiple_of(patch) {
        return Err(Error::Geometry(format!(
            "patch {patch} does not tile {size}"
        )));
    }
    let img = resize_bilinear(img, size, size)?;
    let initial = model.classify(&img)?;
    let class = target.resolve(&initial)?;
    let base = initial.probs[class];
    let rgb = match fill {
        Fill::Black => [0.0; 3],
        Fill::Mean => img.channel_means(),
    };
    let tokens: Vec<usize> = (0..model.grid() * model.grid()).collect();
    let drops = scheduler.map(&tokens, |&t| {
        let pred = model.classify(&occlude_patch(&img, t, patch, rgb))?;
        Ok(base - pred.probs[class])
    })?;
    let ranks = rank_by_drop(&drops);
    Ok(OcclusionResult {
        schema: 1,
        method: "occlusion".into(),
        fill,
        target_class: class,
        initial_confidence: base,
        drops,
        ranks,
    })
}

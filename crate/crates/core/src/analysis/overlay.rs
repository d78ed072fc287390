//! Heatmap overlay: ranked patches are tinted red, strongest first.

use crate::attribution::ImportanceMap;
use crate::error::{Error, Result};
use crate::imageio::InputImage;

pub const TINT: [f32; 3] = [1.0, 0.0, 0.0];
pub const ALPHA_FIRST: f32 = 0.7;
pub const ALPHA_LAST: f32 = 0.2;

/// Tint opacity for rank `rank` of `ranked` (1-based): linear from
/// [`ALPHA_FIRST`] down to [`ALPHA_LAST`].
pub fn rank_alpha(rank: usize, ranked: usize) -> f32 {
    if ranked <= 1 {
        return ALPHA_FIRST;
    }
    ALPHA_FIRST - (rank - 1) as f32 * ((ALPHA_FIRST - ALPHA_LAST) / (ranked - 1) as f32)
}

fn blend(px: [f32; 3], alpha: f32) -> [f32; 3] {
    [0, 1, 2].map(|c| px[c] * (1.0 - alpha) + TINT[c] * alpha)
}

/// Tints each ranked patch; its 1px outline is drawn in solid [`TINT`].
/// Pixels of unranked patches are left untouched.
pub fn render_overlay(img: &InputImage, map: &ImportanceMap) -> Result<InputImage> {
    let grid = map.grid();
    if grid == 0 || img.width() != img.height() || !img.width().is_multiple_of(grid) {
        return Err(Error::Geometry(format!(
            "{}x{} image does not tile into a {grid}x{grid} patch grid",
            img.width(),
            img.height()
        )));
    }
    let patch = img.width() / grid;
    let ranked = map.ranked_count();
    let mut out = img.clone();
    for (token, rank) in map.ranked() {
        let alpha = rank_alpha(rank, ranked);
        let (x0, y0) = ((token % grid) * patch, (token / grid) * patch);
        for y in y0..y0 + patch {
            for x in x0..x0 + patch {
                let border = x == x0 || y == y0 || x == x0 + patch - 1 || y == y0 + patch - 1;
                let rgb = if border {
                    TINT
                } else {
                    blend(img.pixel(x, y), alpha)
                };
                out.set_pixel(x, y, rgb);
            }
        }
    }
    Ok(out)
}

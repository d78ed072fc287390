//! Patchification, token embedding and the pre-norm encoder evaluated over
//! an arbitrary subset of patch tokens.
//!
//! Token indices are 0-based and row-major over the patch grid: token 0 is
//! the top-left patch. Positional embeddings are added in [`embed`], so a
//! token keeps its spatial identity no matter which other tokens are
//! dropped. Dropped tokens are absent from the sequence; nothing is masked.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::imageio::{normalize, resize_bilinear, InputImage, Normalization};
use crate::tensor::{gelu, layer_norm, linear, softmax_in_place, Tensor};

use super::config::{ViTConfig, LN_EPS};
use super::weights::{BlockWeights, ViTWeights};

/// Sorted set of retained patch-token indices. The class token is implicit
/// and always retained.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSubset {
    retained: Vec<usize>,
}

impl TokenSubset {
    pub fn full(token_count: usize) -> Self {
        Self {
            retained: (0..token_count).collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            retained: Vec::new(),
        }
    }

    /// `retained` must be strictly increasing and below `token_count`.
    pub fn new(retained: Vec<usize>, token_count: usize) -> Result<Self> {
        if let Some(w) = retained.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSubset(format!(
                "indices must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = retained.last() {
            if last >= token_count {
                return Err(Error::InvalidSubset(format!(
                    "token {last} out of range for {token_count} tokens"
                )));
            }
        }
        Ok(Self { retained })
    }

    pub fn indices(&self) -> &[usize] {
        &self.retained
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    pub fn contains(&self, token: usize) -> bool {
        self.retained.binary_search(&token).is_ok()
    }

    /// Copy with `token` removed; unchanged if absent.
    pub fn without(&self, token: usize) -> Self {
        let mut retained = self.retained.clone();
        if let Ok(pos) = retained.binary_search(&token) {
            retained.remove(pos);
        }
        Self { retained }
    }
}

/// Class probabilities and the winning class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f32>,
    pub probs: Vec<f32>,
    pub top_class: usize,
    pub confidence: f32,
}

fn argmax(values: &[f32]) -> usize {
    // First maximum wins, so ties go to the smaller class index.
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Prediction {
    pub fn from_logits(logits: Vec<f32>) -> Self {
        assert!(!logits.is_empty(), "prediction needs at least one class");
        let mut probs = logits.clone();
        softmax_in_place(&mut probs);
        let top_class = argmax(&probs);
        Self {
            confidence: probs[top_class],
            logits,
            probs,
            top_class,
        }
    }

    /// Builds a prediction from a probability vector directly; logits are
    /// `ln p` with zero probabilities floored at the smallest normal `f32`.
    pub fn from_probs(probs: Vec<f32>) -> Self {
        assert!(!probs.is_empty(), "prediction needs at least one class");
        let logits = probs
            .iter()
            .map(|p| p.max(f32::MIN_POSITIVE).ln())
            .collect();
        let top_class = argmax(&probs);
        Self {
            confidence: probs[top_class],
            logits,
            probs,
            top_class,
        }
    }

    pub fn prob(&self, class: usize) -> f32 {
        self.probs[class]
    }
}

/// Patch embeddings with positions attached, plus the class token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub embeddings: Tensor,
    pub cls: Tensor,
}

impl TokenSequence {
    pub fn token_count(&self) -> usize {
        self.embeddings.shape()[0]
    }
}

/// Splits a `[3, H, W]` image into `N` flattened patches, grid row-major;
/// each patch is flattened channel, then row, then column.
pub fn patchify(img: &Tensor, config: &ViTConfig) -> Result<Tensor> {
    let s = config.image_size;
    if img.shape() != [3, s, s] {
        return Err(Error::Geometry(format!(
            "patchify expects [3, {s}, {s}], got {:?}",
            img.shape()
        )));
    }
    let p = config.patch_size;
    let grid = config.grid();
    let data = img.data();
    let mut out = Vec::with_capacity(config.num_tokens() * config.patch_dim());
    for gy in 0..grid {
        for gx in 0..grid {
            for c in 0..3 {
                for y in 0..p {
                    let row = (c * s + gy * p + y) * s + gx * p;
                    out.extend_from_slice(&data[row..row + p]);
                }
            }
        }
    }
    Tensor::new(vec![config.num_tokens(), config.patch_dim()], out)
}

pub fn embed(patches: &Tensor, weights: &ViTWeights) -> Result<TokenSequence> {
    let cfg = &weights.config;
    if patches.shape() != [cfg.num_tokens(), cfg.patch_dim()] {
        return Err(Error::ShapeMismatch {
            op: "embed",
            left: patches.shape().to_vec(),
            right: vec![cfg.num_tokens(), cfg.patch_dim()],
        });
    }
    let mut embeddings = linear(
        patches,
        &weights.patch_embed_weight,
        &weights.patch_embed_bias,
    )?;
    let d = cfg.dim;
    let pos = weights.pos_embed.data();
    for (row, p) in embeddings.data_mut().chunks_mut(d).zip(pos[d..].chunks(d)) {
        row.iter_mut().zip(p).for_each(|(v, q)| *v += q);
    }
    let cls = weights
        .cls_token
        .data()
        .iter()
        .zip(&pos[..d])
        .map(|(c, q)| c + q)
        .collect();
    Ok(TokenSequence {
        embeddings,
        cls: Tensor::vector(cls),
    })
}

/// The encoder input `[cls; retained tokens in index order]`,
/// `(1 + |subset|) × D`.
pub fn encoder_input(seq: &TokenSequence, subset: &TokenSubset) -> Result<Tensor> {
    let n = seq.token_count();
    if let Some(&bad) = subset.indices().iter().find(|&&t| t >= n) {
        return Err(Error::InvalidSubset(format!(
            "token {bad} out of range for {n} tokens"
        )));
    }
    let d = seq.cls.len();
    let mut data = Vec::with_capacity((subset.len() + 1) * d);
    data.extend_from_slice(seq.cls.data());
    for &t in subset.indices() {
        data.extend_from_slice(seq.embeddings.row(t));
    }
    Tensor::new(vec![subset.len() + 1, d], data)
}

fn attention(h: &Tensor, block: &BlockWeights, cfg: &ViTConfig) -> Result<Tensor> {
    let qkv = linear(h, &block.qkv_weight, &block.qkv_bias)?;
    let (t, d, dh) = (h.rows(), cfg.dim, cfg.head_dim());
    let scale = 1.0 / (dh as f32).sqrt();
    let row = |i: usize| qkv.row(i);
    let mut out = vec![0.0f32; t * d];
    let mut scores = vec![0.0f32; t];
    for head in 0..cfg.heads {
        let (q0, k0, v0) = (head * dh, d + head * dh, 2 * d + head * dh);
        for i in 0..t {
            let q = &row(i)[q0..q0 + dh];
            for (j, s) in scores.iter_mut().enumerate() {
                let k = &row(j)[k0..k0 + dh];
                let mut acc = 0.0f32;
                for (a, b) in q.iter().zip(k) {
                    acc += a * b;
                }
                *s = acc * scale;
            }
            softmax_in_place(&mut scores);
            let o = &mut out[i * d + head * dh..i * d + (head + 1) * dh];
            for (j, &w) in scores.iter().enumerate() {
                let v = &row(j)[v0..v0 + dh];
                for (ov, vv) in o.iter_mut().zip(v) {
                    *ov += w * vv;
                }
            }
        }
    }
    linear(
        &Tensor::new(vec![t, d], out)?,
        &block.proj_weight,
        &block.proj_bias,
    )
}

/// Runs every encoder block over `x` (`T × D`, any `T ≥ 1`).
pub fn encode(mut x: Tensor, weights: &ViTWeights) -> Result<Tensor> {
    let cfg = &weights.config;
    for block in &weights.blocks {
        let h = layer_norm(&x, &block.ln1_weight, &block.ln1_bias, LN_EPS)?;
        x.add_assign(&attention(&h, block, cfg)?)?;
        let h = layer_norm(&x, &block.ln2_weight, &block.ln2_bias, LN_EPS)?;
        let h = gelu(&linear(&h, &block.fc1_weight, &block.fc1_bias)?);
        x.add_assign(&linear(&h, &block.fc2_weight, &block.fc2_bias)?)?;
    }
    Ok(x)
}

/// Classification head applied to the class-token row of the encoder output.
pub fn classify_cls(encoded: &Tensor, weights: &ViTWeights) -> Result<Prediction> {
    let cls = Tensor::vector(encoded.row(0).to_vec());
    let cls = layer_norm(
        &cls,
        &weights.ln_final_weight,
        &weights.ln_final_bias,
        LN_EPS,
    )?;
    let logits = linear(&cls, &weights.head_weight, &weights.head_bias)?;
    Ok(Prediction::from_logits(logits.into_data()))
}

/// Evaluates the classifier on `[cls] + retained tokens`.
pub fn forward_subset(
    seq: &TokenSequence,
    subset: &TokenSubset,
    weights: &ViTWeights,
) -> Result<Prediction> {
    if seq.token_count() != weights.config.num_tokens() {
        return Err(Error::Geometry(format!(
            "sequence has {} tokens, config expects {}",
            seq.token_count(),
            weights.config.num_tokens()
        )));
    }
    let x = encode(encoder_input(seq, subset)?, weights)?;
    classify_cls(&x, weights)
}

/// Resize, normalize, patchify and embed.
pub fn tokenize(
    img: &InputImage,
    weights: &ViTWeights,
    norm: &Normalization,
) -> Result<TokenSequence> {
    let s = weights.config.image_size;
    let resized = resize_bilinear(img, s, s)?;
    let chw = normalize(&resized, norm)?;
    embed(&patchify(&chw, &weights.config)?, weights)
}

/// Full-input prediction for an image at any resolution.
pub fn predict(img: &InputImage, weights: &ViTWeights, norm: &Normalization) -> Result<Prediction> {
    let seq = tokenize(img, weights, norm)?;
    forward_subset(
        &seq,
        &TokenSubset::full(weights.config.num_tokens()),
        weights,
    )
}

/// Shared weights plus preprocessing constants.
#[derive(Debug, Clone)]
pub struct ViTModel {
    weights: Arc<ViTWeights>,
    norm: Normalization,
}

impl ViTModel {
    pub fn new(weights: ViTWeights, norm: Normalization) -> Self {
        Self {
            weights: Arc::new(weights),
            norm,
        }
    }

    pub fn config(&self) -> &ViTConfig {
        &self.weights.config
    }

    pub fn weights(&self) -> &ViTWeights {
        &self.weights
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn tokenize(&self, img: &InputImage) -> Result<TokenSequence> {
        tokenize(img, &self.weights, &self.norm)
    }

    pub fn predict(&self, img: &InputImage) -> Result<Prediction> {
        predict(img, &self.weights, &self.norm)
    }

    pub fn forward_subset(&self, seq: &TokenSequence, subset: &TokenSubset) -> Result<Prediction> {
        forward_subset(seq, subset, &self.weights)
    }
}

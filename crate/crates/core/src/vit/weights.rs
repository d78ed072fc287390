//! Canonical ViT parameter schema and the validated weight set.

use crate::archive::TensorMap;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::config::ViTConfig;

#[derive(Debug, Clone)]
pub struct BlockWeights {
    pub ln1_weight: Tensor,
    pub ln1_bias: Tensor,
    pub qkv_weight: Tensor,
    pub qkv_bias: Tensor,
    pub proj_weight: Tensor,
    pub proj_bias: Tensor,
    pub ln2_weight: Tensor,
    pub ln2_bias: Tensor,
    pub fc1_weight: Tensor,
    pub fc1_bias: Tensor,
    pub fc2_weight: Tensor,
    pub fc2_bias: Tensor,
}

/// Weights checked against [`canonical_schema`] and bound to their config.
#[derive(Debug, Clone)]
pub struct ViTWeights {
    pub config: ViTConfig,
    pub patch_embed_weight: Tensor,
    pub patch_embed_bias: Tensor,
    pub cls_token: Tensor,
    pub pos_embed: Tensor,
    pub blocks: Vec<BlockWeights>,
    pub ln_final_weight: Tensor,
    pub ln_final_bias: Tensor,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

const BLOCK_KEYS: [&str; 12] = [
    "ln1.weight",
    "ln1.bias",
    "attn.qkv.weight",
    "attn.qkv.bias",
    "attn.proj.weight",
    "attn.proj.bias",
    "ln2.weight",
    "ln2.bias",
    "mlp.fc1.weight",
    "mlp.fc1.bias",
    "mlp.fc2.weight",
    "mlp.fc2.bias",
];

fn block_shape(key: &str, cfg: &ViTConfig) -> Vec<usize> {
    let (d, h) = (cfg.dim, cfg.mlp_dim());
    match key {
        "attn.qkv.weight" => vec![3 * d, d],
        "attn.qkv.bias" => vec![3 * d],
        "attn.proj.weight" => vec![d, d],
        "mlp.fc1.weight" => vec![h, d],
        "mlp.fc1.bias" => vec![h],
        "mlp.fc2.weight" => vec![d, h],
        _ => vec![d],
    }
}

/// Every canonical key with its expected shape, in a stable order.
pub fn canonical_schema(cfg: &ViTConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.dim;
    let mut out = vec![
        ("patch_embed.weight".to_owned(), vec![d, cfg.patch_dim()]),
        ("patch_embed.bias".to_owned(), vec![d]),
        ("cls_token".to_owned(), vec![d]),
        ("pos_embed".to_owned(), vec![cfg.num_tokens() + 1, d]),
    ];
    for i in 0..cfg.depth {
        for key in BLOCK_KEYS {
            out.push((format!("blocks.{i}.{key}"), block_shape(key, cfg)));
        }
    }
    out.extend([
        ("ln_final.weight".to_owned(), vec![d]),
        ("ln_final.bias".to_owned(), vec![d]),
        ("head.weight".to_owned(), vec![cfg.num_classes, d]),
        ("head.bias".to_owned(), vec![cfg.num_classes]),
    ]);
    out
}

/// Checks presence and shape of every canonical key and rejects extras.
pub fn validate_vit_schema(mut tensors: TensorMap, config: &ViTConfig) -> Result<ViTWeights> {
    config.validate()?;
    let mut take = |key: &str, expected: Vec<usize>| -> Result<Tensor> {
        let t = tensors
            .remove(key)
            .ok_or_else(|| Error::MissingKey(key.to_owned()))?;
        if t.shape() != expected.as_slice() {
            let note = if key == "pos_embed" {
                " (N+1 rows: one per patch token plus the cls slot)"
            } else {
                ""
            };
            return Err(Error::WeightShape {
                key: key.to_owned(),
                expected,
                found: t.shape().to_vec(),
                note,
            });
        }
        Ok(t)
    };

    let d = config.dim;
    let patch_embed_weight = take("patch_embed.weight", vec![d, config.patch_dim()])?;
    let patch_embed_bias = take("patch_embed.bias", vec![d])?;
    let cls_token = take("cls_token", vec![d])?;
    let pos_embed = take("pos_embed", vec![config.num_tokens() + 1, d])?;

    let mut blocks = Vec::with_capacity(config.depth);
    for i in 0..config.depth {
        let mut field = |key: &str| take(&format!("blocks.{i}.{key}"), block_shape(key, config));
        blocks.push(BlockWeights {
            ln1_weight: field("ln1.weight")?,
            ln1_bias: field("ln1.bias")?,
            qkv_weight: field("attn.qkv.weight")?,
            qkv_bias: field("attn.qkv.bias")?,
            proj_weight: field("attn.proj.weight")?,
            proj_bias: field("attn.proj.bias")?,
            ln2_weight: field("ln2.weight")?,
            ln2_bias: field("ln2.bias")?,
            fc1_weight: field("mlp.fc1.weight")?,
            fc1_bias: field("mlp.fc1.bias")?,
            fc2_weight: field("mlp.fc2.weight")?,
            fc2_bias: field("mlp.fc2.bias")?,
        });
    }

    let ln_final_weight = take("ln_final.weight", vec![d])?;
    let ln_final_bias = take("ln_final.bias", vec![d])?;
    let head_weight = take("head.weight", vec![config.num_classes, d])?;
    let head_bias = take("head.bias", vec![config.num_classes])?;

    if let Some(extra) = tensors.keys().next() {
        return Err(Error::UnexpectedKey(extra.clone()));
    }

    Ok(ViTWeights {
        config: *config,
        patch_embed_weight,
        patch_embed_bias,
        cls_token,
        pos_embed,
        blocks,
        ln_final_weight,
        ln_final_bias,
        head_weight,
        head_bias,
    })
}

impl ViTWeights {
    /// Reads an archive and validates it against `config`.
    pub fn load(path: impl AsRef<std::path::Path>, config: &ViTConfig) -> Result<Self> {
        validate_vit_schema(crate::archive::read_archive(path)?, config)
    }

    /// The canonical-name tensor map, suitable for writing an archive.
    pub fn to_tensor_map(&self) -> TensorMap {
        let mut map = TensorMap::new();
        let mut put = |k: String, t: &Tensor| {
            map.insert(k, t.clone());
        };
        put("patch_embed.weight".into(), &self.patch_embed_weight);
        put("patch_embed.bias".into(), &self.patch_embed_bias);
        put("cls_token".into(), &self.cls_token);
        put("pos_embed".into(), &self.pos_embed);
        for (i, b) in self.blocks.iter().enumerate() {
            let fields = [
                &b.ln1_weight,
                &b.ln1_bias,
                &b.qkv_weight,
                &b.qkv_bias,
                &b.proj_weight,
                &b.proj_bias,
                &b.ln2_weight,
                &b.ln2_bias,
                &b.fc1_weight,
                &b.fc1_bias,
                &b.fc2_weight,
                &b.fc2_bias,
            ];
            for (key, t) in BLOCK_KEYS.iter().zip(fields) {
                put(format!("blocks.{i}.{key}"), t);
            }
        }
        put("ln_final.weight".into(), &self.ln_final_weight);
        put("ln_final.bias".into(), &self.ln_final_bias);
        put("head.weight".into(), &self.head_weight);
        put("head.bias".into(), &self.head_bias);
        map
    }
}

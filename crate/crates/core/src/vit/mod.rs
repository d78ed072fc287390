//! The ViT classifier: geometry, validated weights, and the subset forward.

mod config;
mod model;
mod weights;

pub use config::{ViTConfig, LN_EPS, MLP_RATIO};
pub use model::{
    classify_cls, embed, encode, encoder_input, forward_subset, patchify, predict, tokenize,
    Prediction, TokenSequence, TokenSubset, ViTModel,
};
pub use weights::{canonical_schema, validate_vit_schema, BlockWeights, ViTWeights};

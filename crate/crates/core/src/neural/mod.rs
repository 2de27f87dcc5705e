//! Forward-only toy-scale reference network: input encoders, an
//! alternating-attention transformer and the dense, pose and scale heads.
//!
//! The image encoder is a linear patchify on raw pixels with a fixed 2D
//! sinusoidal patch position embedding, and the dense head is a per-patch
//! linear layer unfolded to full resolution.

mod attention;
mod config;
mod encode;
mod heads;
mod layers;
mod weights;

pub use attention::{
    alternating_attention, alternating_attention_audited, transformer_block, AttentionAudit,
};
pub use config::*;
pub use encode::{encode_inputs, ModelInputs, TokenSet, ViewData};
pub use heads::{decode_heads, ModelOutput, ViewPrediction, RAY_Z_FLOOR};
pub use layers::{gelu, Activation, LayerNorm, Linear, Mat, Mlp};
pub use weights::{Block, ModelWeights, DENSE_CHANNELS};

use crate::error::Result;

pub fn forward(inputs: &ModelInputs, weights: &ModelWeights) -> Result<ModelOutput> {
    let tokens = encode_inputs(inputs, weights)?;
    let tokens = alternating_attention(&tokens, weights)?;
    decode_heads(&tokens, weights)
}

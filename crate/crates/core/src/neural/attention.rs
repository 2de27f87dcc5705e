use rayon::prelude::*;

use crate::error::Result;
use crate::neural::encode::TokenSet;
use crate::neural::layers::{ensure_finite, softmax_rows, Mat};
use crate::neural::weights::{Block, ModelWeights};

/// Softmax bookkeeping collected during a transformer pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AttentionAudit {
    pub layers: usize,
    pub rows: usize,
    /// Largest `|Σ_j a_ij − 1|` over every attention row seen.
    pub max_row_sum_error: f64,
}

impl AttentionAudit {
    fn merge(&mut self, o: &AttentionAudit) {
        self.rows += o.rows;
        self.max_row_sum_error = self.max_row_sum_error.max(o.max_row_sum_error);
    }
}

fn attention(block: &Block, x: &Mat, heads: usize, audit: &mut AttentionAudit) -> Result<Mat> {
    let dim = x.ncols();
    let dh = dim / heads;
    let qkv = block.qkv.forward(x)?;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Mat::zeros(x.nrows(), dim);
    for h in 0..heads {
        let q = qkv.columns(h * dh, dh);
        let k = qkv.columns(dim + h * dh, dh);
        let v = qkv.columns(2 * dim + h * dh, dh);
        let mut a = (q * k.transpose()) * scale;
        let err = softmax_rows(&mut a);
        audit.rows += a.nrows();
        audit.max_row_sum_error = audit.max_row_sum_error.max(err);
        out.columns_mut(h * dh, dh).copy_from(&(a * v));
    }
    block.proj.forward(&out)
}

/// Pre-norm residual block: `x += MHA(LN(x)); x += MLP(LN(x))`.
pub fn transformer_block(
    block: &Block,
    x: &Mat,
    heads: usize,
    audit: &mut AttentionAudit,
) -> Result<Mat> {
    let mut y = x + attention(block, &block.norm1.forward(x)?, heads, audit)?;
    y += block.mlp.forward(&block.norm2.forward(&y)?)?;
    Ok(y)
}

pub fn alternating_attention(tokens: &TokenSet, w: &ModelWeights) -> Result<TokenSet> {
    alternating_attention_audited(tokens, w, &mut AttentionAudit::default())
}

pub fn alternating_attention_audited(
    tokens: &TokenSet,
    w: &ModelWeights,
    audit: &mut AttentionAudit,
) -> Result<TokenSet> {
    let cfg = &w.config;
    let heads = cfg.heads;
    let mut views = tokens.views.clone();
    let mut scale = tokens.scale.clone();
    for (l, block) in w.blocks.iter().enumerate() {
        if cfg.is_frame_layer(l) {
            let results: Vec<(Result<Mat>, AttentionAudit)> = views
                .par_iter()
                .map(|x| {
                    let mut a = AttentionAudit::default();
                    (transformer_block(block, x, heads, &mut a), a)
                })
                .collect();
            for (slot, (r, a)) in views.iter_mut().zip(results) {
                *slot = r?;
                audit.merge(&a);
            }
            if cfg.scale_token_in_frame_layers {
                scale = transformer_block(block, &scale, heads, audit)?;
            }
        } else {
            let rows: Vec<usize> = views.iter().map(|v| v.nrows()).collect();
            let total: usize = rows.iter().sum::<usize>() + 1;
            let mut all = Mat::zeros(total, cfg.dim);
            let mut r0 = 0;
            for v in &views {
                all.rows_mut(r0, v.nrows()).copy_from(v);
                r0 += v.nrows();
            }
            all.row_mut(r0).copy_from(&scale.row(0));
            let out = transformer_block(block, &all, heads, audit)?;
            let mut r0 = 0;
            for (v, n) in views.iter_mut().zip(&rows) {
                *v = out.rows(r0, *n).into_owned();
                r0 += n;
            }
            scale = out.rows(r0, 1).into_owned();
        }
        audit.layers += 1;
        for v in &views {
            ensure_finite(v, &format!("transformer layer {l}"))?;
        }
        ensure_finite(&scale, &format!("transformer layer {l} scale token"))?;
    }
    Ok(TokenSet {
        views,
        scale,
        sizes: tokens.sizes.clone(),
    })
}

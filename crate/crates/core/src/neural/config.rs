use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full-size transformer constants, recorded for reference only.
pub const FULL_DEPTH: usize = 24;
pub const FULL_DIM: usize = 768;
pub const FULL_HEADS: usize = 12;
pub const FULL_MLP_RATIO: usize = 4;
pub const FULL_PATCH: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AttentionPattern {
    /// Even layers attend within each view, odd layers across all views.
    #[default]
    Alternating,
    FrameOnly,
    GlobalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub depth: usize,
    pub dim: usize,
    pub heads: usize,
    pub mlp_ratio: usize,
    pub patch: usize,
    pub attention: AttentionPattern,
    /// When set, the scale token is also updated in frame layers, as a
    /// single-token group of its own.
    pub scale_token_in_frame_layers: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            dim: 64,
            heads: 4,
            mlp_ratio: 4,
            patch: 14,
            attention: AttentionPattern::Alternating,
            scale_token_in_frame_layers: false,
        }
    }
}

impl ModelConfig {
    pub fn full_scale() -> Self {
        Self {
            depth: FULL_DEPTH,
            dim: FULL_DIM,
            heads: FULL_HEADS,
            mlp_ratio: FULL_MLP_RATIO,
            patch: FULL_PATCH,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dim == 0 || self.heads == 0 || self.patch == 0 || self.mlp_ratio == 0 {
            return bad(format!("model sizes must be positive: {self:?}"));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return bad(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            ));
        }
        if !self.depth.is_multiple_of(2) {
            return bad(format!("depth {} must be even", self.depth));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    /// Whether layer `l` is a frame-wise (per-view) layer.
    pub fn is_frame_layer(&self, l: usize) -> bool {
        match self.attention {
            AttentionPattern::Alternating => l.is_multiple_of(2),
            AttentionPattern::FrameOnly => true,
            AttentionPattern::GlobalOnly => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(
            (c.depth, c.dim, c.heads, c.mlp_ratio, c.patch),
            (4, 64, 4, 4, 14)
        );
        let p = ModelConfig::full_scale();
        p.validate().unwrap();
        assert_eq!((p.depth, p.dim, p.heads, p.mlp_ratio), (24, 768, 12, 4));
        assert!(ModelConfig { heads: 5, ..c }.validate().is_err());
        assert!(ModelConfig { depth: 3, ..c }.validate().is_err());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: ModelConfig =
            serde_json::from_str(r#"{"dim": 32, "attention": "global-only"}"#).unwrap();
        assert_eq!(c.dim, 32);
        assert_eq!(c.depth, 4);
        assert_eq!(c.attention, AttentionPattern::GlobalOnly);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"width": 3}"#).is_err());
    }
}

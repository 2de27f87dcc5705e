use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::config::ModelConfig;
use crate::neural::layers::{Activation, LayerNorm, Linear, Mat, Mlp};

/// Output channels of the dense head per pixel: ray xyz, depth, confidence,
/// mask.
pub const DENSE_CHANNELS: usize = 6;
pub const IMAGE_CHANNELS: usize = 3;
pub const RAY_CHANNELS: usize = 3;
/// Normalized depth plus a validity flag.
pub const DEPTH_CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub norm1: LayerNorm,
    pub qkv: Linear,
    pub proj: Linear,
    pub norm2: LayerNorm,
    pub mlp: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub image_embed: Linear,
    pub ray_embed: Mlp,
    pub depth_embed: Mlp,
    pub quat_embed: Mlp,
    pub trans_embed: Mlp,
    pub depth_scale_embed: Mlp,
    pub pose_scale_embed: Mlp,
    pub norm_image: LayerNorm,
    pub norm_rays: LayerNorm,
    pub norm_depth: LayerNorm,
    pub norm_quat: LayerNorm,
    pub norm_trans: LayerNorm,
    pub norm_depth_scale: LayerNorm,
    pub norm_pose_scale: LayerNorm,
    pub norm_fuse: LayerNorm,
    /// `1 × dim`, added to every patch token of view 0.
    pub reference_embed: Mat,
    /// `1 × dim`.
    pub scale_token: Mat,
    pub blocks: Vec<Block>,
    pub dense_norm: LayerNorm,
    pub dense_head: Linear,
    pub pose_norm: LayerNorm,
    pub pose_head: Mlp,
    pub scale_norm: LayerNorm,
    pub scale_head: Mlp,
}

fn global_mlp(rng: &mut ChaCha8Rng, input: usize, dim: usize) -> Mlp {
    Mlp::init(rng, &[input, dim, dim, dim, dim], Activation::Gelu)
}

impl ModelWeights {
    /// Uniform(±1/√fan_in) initialization; learned embeddings use fan_in 1.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, p) = (config.dim, config.patch);
        let pp = p * p;
        let image_embed = Linear::init(&mut rng, IMAGE_CHANNELS * pp, d);
        let ray_embed = Mlp::init(&mut rng, &[RAY_CHANNELS * pp, d, d], Activation::Gelu);
        let depth_embed = Mlp::init(&mut rng, &[DEPTH_CHANNELS * pp, d, d], Activation::Gelu);
        let quat_embed = global_mlp(&mut rng, 4, d);
        let trans_embed = global_mlp(&mut rng, 3, d);
        let depth_scale_embed = global_mlp(&mut rng, 1, d);
        let pose_scale_embed = global_mlp(&mut rng, 1, d);
        let reference_embed = Mat::from_fn(1, d, |_, _| rng.gen_range(-1.0..=1.0));
        let scale_token = Mat::from_fn(1, d, |_, _| rng.gen_range(-1.0..=1.0));
        let hidden = d * config.mlp_ratio;
        let blocks = (0..config.depth)
            .map(|_| Block {
                norm1: LayerNorm::new(d),
                qkv: Linear::init(&mut rng, d, 3 * d),
                proj: Linear::init(&mut rng, d, d),
                norm2: LayerNorm::new(d),
                mlp: Mlp::init(&mut rng, &[d, hidden, d], Activation::Gelu),
            })
            .collect();
        let dense_head = Linear::init(&mut rng, d, pp * DENSE_CHANNELS);
        let pose_head = Mlp::init(&mut rng, &[d, d, 7], Activation::Gelu);
        let scale_head = Mlp::init(&mut rng, &[d, d, 1], Activation::Relu);
        Ok(Self {
            config,
            image_embed,
            ray_embed,
            depth_embed,
            quat_embed,
            trans_embed,
            depth_scale_embed,
            pose_scale_embed,
            norm_image: LayerNorm::new(d),
            norm_rays: LayerNorm::new(d),
            norm_depth: LayerNorm::new(d),
            norm_quat: LayerNorm::new(d),
            norm_trans: LayerNorm::new(d),
            norm_depth_scale: LayerNorm::new(d),
            norm_pose_scale: LayerNorm::new(d),
            norm_fuse: LayerNorm::new(d),
            reference_embed,
            scale_token,
            blocks,
            dense_norm: LayerNorm::new(d),
            dense_head,
            pose_norm: LayerNorm::new(d),
            pose_head,
            scale_norm: LayerNorm::new(d),
            scale_head,
        })
    }

    /// Every parameter tensor with a stable dotted name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        self.walk(&mut |name, m| out.push((name, m)));
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Mat)> {
        let mut out = Vec::new();
        self.walk_mut(&mut |name, m| out.push((name, m)));
        out
    }

    /// Replaces tensors by name; every tensor must be present with its
    /// current shape.
    pub fn load_named(&mut self, mut get: impl FnMut(&str) -> Result<Mat>) -> Result<()> {
        for (name, m) in self.named_tensors_mut() {
            let new = get(&name)?;
            if new.shape() != m.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "weight {name}: expected {:?}, got {:?}",
                    m.shape(),
                    new.shape()
                )));
            }
            *m = new;
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, m)| m.len()).sum()
    }

    fn walk<'a>(&'a self, f: &mut dyn FnMut(String, &'a Mat)) {
        fn lin<'a>(f: &mut dyn FnMut(String, &'a Mat), p: &str, l: &'a Linear) {
            f(format!("{p}.w"), &l.w);
            f(format!("{p}.b"), &l.b);
        }
        fn mlp<'a>(f: &mut dyn FnMut(String, &'a Mat), p: &str, m: &'a Mlp) {
            for (i, l) in m.layers.iter().enumerate() {
                lin(f, &format!("{p}.{i}"), l);
            }
        }
        fn ln<'a>(f: &mut dyn FnMut(String, &'a Mat), p: &str, n: &'a LayerNorm) {
            f(format!("{p}.gamma"), &n.gamma);
            f(format!("{p}.beta"), &n.beta);
        }
        lin(f, "image_embed", &self.image_embed);
        mlp(f, "ray_embed", &self.ray_embed);
        mlp(f, "depth_embed", &self.depth_embed);
        mlp(f, "quat_embed", &self.quat_embed);
        mlp(f, "trans_embed", &self.trans_embed);
        mlp(f, "depth_scale_embed", &self.depth_scale_embed);
        mlp(f, "pose_scale_embed", &self.pose_scale_embed);
        ln(f, "norm_image", &self.norm_image);
        ln(f, "norm_rays", &self.norm_rays);
        ln(f, "norm_depth", &self.norm_depth);
        ln(f, "norm_quat", &self.norm_quat);
        ln(f, "norm_trans", &self.norm_trans);
        ln(f, "norm_depth_scale", &self.norm_depth_scale);
        ln(f, "norm_pose_scale", &self.norm_pose_scale);
        ln(f, "norm_fuse", &self.norm_fuse);
        f("reference_embed".into(), &self.reference_embed);
        f("scale_token".into(), &self.scale_token);
        for (i, b) in self.blocks.iter().enumerate() {
            ln(f, &format!("blocks.{i}.norm1"), &b.norm1);
            lin(f, &format!("blocks.{i}.qkv"), &b.qkv);
            lin(f, &format!("blocks.{i}.proj"), &b.proj);
            ln(f, &format!("blocks.{i}.norm2"), &b.norm2);
            mlp(f, &format!("blocks.{i}.mlp"), &b.mlp);
        }
        ln(f, "dense_norm", &self.dense_norm);
        lin(f, "dense_head", &self.dense_head);
        ln(f, "pose_norm", &self.pose_norm);
        mlp(f, "pose_head", &self.pose_head);
        ln(f, "scale_norm", &self.scale_norm);
        mlp(f, "scale_head", &self.scale_head);
    }

    fn walk_mut<'a>(&'a mut self, f: &mut dyn FnMut(String, &'a mut Mat)) {
        fn lin<'a>(f: &mut dyn FnMut(String, &'a mut Mat), p: &str, l: &'a mut Linear) {
            f(format!("{p}.w"), &mut l.w);
            f(format!("{p}.b"), &mut l.b);
        }
        fn mlp<'a>(f: &mut dyn FnMut(String, &'a mut Mat), p: &str, m: &'a mut Mlp) {
            for (i, l) in m.layers.iter_mut().enumerate() {
                lin(f, &format!("{p}.{i}"), l);
            }
        }
        fn ln<'a>(f: &mut dyn FnMut(String, &'a mut Mat), p: &str, n: &'a mut LayerNorm) {
            f(format!("{p}.gamma"), &mut n.gamma);
            f(format!("{p}.beta"), &mut n.beta);
        }
        lin(f, "image_embed", &mut self.image_embed);
        mlp(f, "ray_embed", &mut self.ray_embed);
        mlp(f, "depth_embed", &mut self.depth_embed);
        mlp(f, "quat_embed", &mut self.quat_embed);
        mlp(f, "trans_embed", &mut self.trans_embed);
        mlp(f, "depth_scale_embed", &mut self.depth_scale_embed);
        mlp(f, "pose_scale_embed", &mut self.pose_scale_embed);
        ln(f, "norm_image", &mut self.norm_image);
        ln(f, "norm_rays", &mut self.norm_rays);
        ln(f, "norm_depth", &mut self.norm_depth);
        ln(f, "norm_quat", &mut self.norm_quat);
        ln(f, "norm_trans", &mut self.norm_trans);
        ln(f, "norm_depth_scale", &mut self.norm_depth_scale);
        ln(f, "norm_pose_scale", &mut self.norm_pose_scale);
        ln(f, "norm_fuse", &mut self.norm_fuse);
        f("reference_embed".into(), &mut self.reference_embed);
        f("scale_token".into(), &mut self.scale_token);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            ln(f, &format!("blocks.{i}.norm1"), &mut b.norm1);
            lin(f, &format!("blocks.{i}.qkv"), &mut b.qkv);
            lin(f, &format!("blocks.{i}.proj"), &mut b.proj);
            ln(f, &format!("blocks.{i}.norm2"), &mut b.norm2);
            mlp(f, &format!("blocks.{i}.mlp"), &mut b.mlp);
        }
        ln(f, "dense_norm", &mut self.dense_norm);
        lin(f, "dense_head", &mut self.dense_head);
        ln(f, "pose_norm", &mut self.pose_norm);
        mlp(f, "pose_head", &mut self.pose_head);
        ln(f, "scale_norm", &mut self.scale_norm);
        mlp(f, "scale_head", &mut self.scale_head);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_seeded_and_bounded() {
        let c = ModelConfig::default();
        let a = ModelWeights::init(c, 7).unwrap();
        assert_eq!(a, ModelWeights::init(c, 7).unwrap());
        assert_ne!(a, ModelWeights::init(c, 8).unwrap());
        let bound = 1.0 / (c.dim as f64).sqrt();
        assert!(a.blocks[0].qkv.w.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn names_are_unique_and_complete() {
        let mut w = ModelWeights::init(
            ModelConfig {
                dim: 8,
                heads: 2,
                patch: 2,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let names: Vec<String> = w.named_tensors().into_iter().map(|(n, _)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        let before = w.n_params();
        for (_, m) in w.named_tensors_mut() {
            m.fill(0.0);
        }
        assert!(w
            .named_tensors()
            .iter()
            .all(|(_, m)| m.iter().all(|v| *v == 0.0)));
        assert_eq!(w.n_params(), before);
    }
}

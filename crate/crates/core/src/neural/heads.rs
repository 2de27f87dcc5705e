use nalgebra::Quaternion;

use crate::error::{Error, Result};
use crate::geometry::{
    DepthAlongRay, FactoredScene, FactoredView, MetricScale, Pose, RayMap, Vec3,
};
use crate::grid::Grid;
use crate::neural::encode::TokenSet;
use crate::neural::layers::{ensure_finite, unpatchify, Mat};
use crate::neural::weights::{ModelWeights, DENSE_CHANNELS};

/// Floor added to the softplus of the ray z-component so every predicted ray
/// points strictly forward.
pub const RAY_Z_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ViewPrediction {
    pub rays: RayMap,
    /// Up-to-scale, valid at every pixel.
    pub depth: DepthAlongRay,
    pub confidence: Grid<f64>,
    pub mask_prob: Grid<f64>,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    pub views: Vec<ViewPrediction>,
    pub scale: MetricScale,
}

impl ModelOutput {
    pub fn to_factored_scene(&self) -> FactoredScene {
        FactoredScene {
            views: self
                .views
                .iter()
                .map(|v| FactoredView {
                    rays: v.rays.clone(),
                    depth: v.depth.clone(),
                    pose: v.pose,
                    confidence: Some(v.confidence.clone()),
                    mask_prob: Some(v.mask_prob.clone()),
                })
                .collect(),
            scale: self.scale,
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn overflow(what: &str, v: f64) -> Error {
    Error::NumericOverflow(format!("{what} overflowed ({v})"))
}

fn decode_dense(
    tokens: &Mat,
    w: &ModelWeights,
    width: usize,
    height: usize,
) -> Result<(RayMap, DepthAlongRay, Grid<f64>, Grid<f64>)> {
    let raw = w.dense_head.forward(&w.dense_norm.forward(tokens)?)?;
    ensure_finite(&raw, "dense head")?;
    let px = unpatchify(&raw, DENSE_CHANNELS, width, height, w.config.patch);
    let n = width * height;
    let (mut rays, mut depth, mut conf, mut mask) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for c in px.chunks_exact(DENSE_CHANNELS) {
        rays.push(Vec3::new(c[0], c[1], softplus(c[2]) + RAY_Z_FLOOR).normalize());
        let d = c[3].exp();
        if !(d.is_finite() && d > 0.0) {
            return Err(overflow("depth", c[3]));
        }
        depth.push(d);
        let k = 1.0 + c[4].exp();
        if !k.is_finite() {
            return Err(overflow("confidence", c[4]));
        }
        conf.push(k);
        mask.push(sigmoid(c[5]));
    }
    Ok((
        RayMap::new(Grid::from_vec(width, height, rays)?)?,
        DepthAlongRay::dense(Grid::from_vec(width, height, depth)?)?,
        Grid::from_vec(width, height, conf)?,
        Grid::from_vec(width, height, mask)?,
    ))
}

fn decode_pose(tokens: &Mat, w: &ModelWeights) -> Result<Pose> {
    let pooled = w.pose_norm.forward(tokens)?.row_mean();
    let pooled = Mat::from_row_slice(1, pooled.len(), pooled.as_slice());
    let raw = w.pose_head.forward(&pooled)?;
    ensure_finite(&raw, "pose head")?;
    let q = Quaternion::new(raw[0], raw[1], raw[2], raw[3]);
    let q = if q.norm() > 1e-12 {
        q
    } else {
        Quaternion::identity()
    };
    Pose::from_unnormalized(q, Vec3::new(raw[4], raw[5], raw[6]))
}

/// Decodes transformer tokens into per-view dense maps and poses plus the
/// metric scale.
pub fn decode_heads(tokens: &TokenSet, w: &ModelWeights) -> Result<ModelOutput> {
    let mut views = Vec::with_capacity(tokens.views.len());
    for (t, (width, height)) in tokens.views.iter().zip(&tokens.sizes) {
        let (rays, depth, confidence, mask_prob) = decode_dense(t, w, *width, *height)?;
        views.push(ViewPrediction {
            rays,
            depth,
            confidence,
            mask_prob,
            pose: decode_pose(t, w)?,
        });
    }
    let raw = w
        .scale_head
        .forward(&w.scale_norm.forward(&tokens.scale)?)?[0];
    let s = raw.exp();
    if !(s.is_finite() && s > 0.0) {
        return Err(overflow("metric scale", raw));
    }
    Ok(ModelOutput {
        views,
        scale: MetricScale::new(s)?,
    })
}

use nalgebra::Quaternion;

use crate::error::{Error, Result};
use crate::factorization::{encode_log_scale, factor_depth, factor_pose_scale};
use crate::geometry::{DepthAlongRay, MetricScale, Pose, RayMap};
use crate::grid::Grid;
use crate::neural::layers::{ensure_finite, patch_position_embedding, patchify, LayerNorm, Mat};
use crate::neural::weights::ModelWeights;
use crate::synth::{Rgb, SceneSample};
use crate::viewgraph::{sparsify_depth, InputConfig, SPARSE_DEPTH_KEEP};

#[derive(Debug, Clone, PartialEq)]
pub struct ViewData {
    pub image: Grid<Rgb>,
    pub rays: Option<RayMap>,
    pub depth: Option<DepthAlongRay>,
    /// Pose in the view-0 frame, in the units of `depth`.
    pub pose: Option<Pose>,
}

impl ViewData {
    pub fn images_only(image: Grid<Rgb>) -> Self {
        Self {
            image,
            rays: None,
            depth: None,
            pose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelInputs {
    pub views: Vec<ViewData>,
    pub config: InputConfig,
    /// Metric multiplier for the provided depth and pose; used only when the
    /// config marks the corresponding scale as given.
    pub metric_scale: MetricScale,
}

impl ModelInputs {
    pub fn images_only(images: Vec<Grid<Rgb>>) -> Self {
        let n = images.len();
        Self {
            views: images.into_iter().map(ViewData::images_only).collect(),
            config: InputConfig::images_only(n),
            metric_scale: MetricScale::unit(),
        }
    }

    /// Selects inputs from a ground-truth sample as flagged by `config`.
    /// Sparse depth keeps a seeded random tenth of the valid pixels.
    pub fn from_sample(sample: &SceneSample, config: &InputConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.views.len() != sample.n_views() {
            return Err(Error::ShapeMismatch(format!(
                "input config has {} views, scene {}",
                config.views.len(),
                sample.n_views()
            )));
        }
        let mut views = Vec::with_capacity(sample.n_views());
        for (i, (v, flags)) in sample.views.iter().zip(&config.views).enumerate() {
            let image = v
                .image
                .clone()
                .ok_or_else(|| Error::InvalidArgument(format!("view {i} has no image")))?;
            let depth = if !flags.depth_given {
                None
            } else if flags.depth_sparse {
                Some(sparsify_depth(
                    &v.depth,
                    SPARSE_DEPTH_KEEP,
                    seed.wrapping_add(i as u64),
                )?)
            } else {
                Some(v.depth.clone())
            };
            views.push(ViewData {
                image,
                rays: flags.rays_given.then(|| v.rays.clone()),
                depth,
                pose: flags.pose_given.then_some(v.pose),
            });
        }
        Ok(Self {
            views,
            config: config.clone(),
            metric_scale: sample.metric_scale,
        })
    }

    pub fn validate(&self, patch: usize) -> Result<()> {
        self.config.validate()?;
        if self.views.is_empty() {
            return Err(Error::Empty("no input views".into()));
        }
        if self.config.views.len() != self.views.len() {
            return Err(Error::ShapeMismatch(format!(
                "input config has {} views, inputs {}",
                self.config.views.len(),
                self.views.len()
            )));
        }
        for (i, (v, f)) in self.views.iter().zip(&self.config.views).enumerate() {
            let (w, h) = v.image.dims();
            if w == 0 || h == 0 || w % patch != 0 || h % patch != 0 {
                return Err(Error::ShapeMismatch(format!(
                    "view {i}: image {w}x{h} not divisible by patch {patch}"
                )));
            }
            let flag_err = |what: &str, flag: bool| {
                Error::InvalidArgument(format!(
                    "view {i}: {what} flagged {flag} but provided {}",
                    !flag
                ))
            };
            if v.rays.is_some() != f.rays_given {
                return Err(flag_err("rays", f.rays_given));
            }
            if v.depth.is_some() != f.depth_given {
                return Err(flag_err("depth", f.depth_given));
            }
            if v.pose.is_some() != f.pose_given {
                return Err(flag_err("pose", f.pose_given));
            }
            if let Some(r) = &v.rays {
                if r.directions().dims() != (w, h) {
                    return Err(Error::ShapeMismatch(format!(
                        "view {i}: rays {:?} vs image {w}x{h}",
                        r.directions().dims()
                    )));
                }
            }
            if let Some(d) = &v.depth {
                if d.values().dims() != (w, h) {
                    return Err(Error::ShapeMismatch(format!(
                        "view {i}: depth {:?} vs image {w}x{h}",
                        d.values().dims()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Patch tokens per view plus the trailing scale token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSet {
    /// One `n_patches × dim` matrix per view.
    pub views: Vec<Mat>,
    /// `1 × dim`.
    pub scale: Mat,
    /// Image size per view, `(width, height)`.
    pub sizes: Vec<(usize, usize)>,
}

impl TokenSet {
    pub fn n_tokens(&self) -> usize {
        self.views.iter().map(|v| v.nrows()).sum::<usize>() + 1
    }
}

fn broadcast_add(tokens: &mut Mat, row: &Mat) {
    for mut r in tokens.row_iter_mut() {
        r += row;
    }
}

fn embed_global(mlp: &crate::neural::layers::Mlp, norm: &LayerNorm, x: &[f64]) -> Result<Mat> {
    norm.forward(&mlp.forward(&Mat::from_row_slice(1, x.len(), x))?)
}

/// Fuses the available modalities of each view into patch tokens.
pub fn encode_inputs(inputs: &ModelInputs, w: &ModelWeights) -> Result<TokenSet> {
    let cfg = &w.config;
    let p = cfg.patch;
    inputs.validate(p)?;
    let m = inputs.metric_scale.value();

    // Pose inputs are normalized jointly over the views that provide them.
    let given_t: Vec<_> = inputs
        .views
        .iter()
        .filter_map(|v| v.pose.map(|p| *p.translation()))
        .collect();
    let pose_factors = if given_t.is_empty() {
        None
    } else {
        Some(factor_pose_scale(&given_t)?)
    };
    let mut next_t = pose_factors
        .iter()
        .flat_map(|f| f.normalized_translations.iter());

    let mut views = Vec::with_capacity(inputs.views.len());
    let mut sizes = Vec::with_capacity(inputs.views.len());
    for (i, v) in inputs.views.iter().enumerate() {
        let (width, height) = v.image.dims();
        let (pw, ph) = (width / p, height / p);
        sizes.push((width, height));

        let px: Vec<f64> = v
            .image
            .iter()
            .flat_map(|c| c.iter().map(|x| f64::from(*x) / 255.0))
            .collect();
        let mut img = w.image_embed.forward(&patchify(&px, 3, width, height, p))?;
        img += patch_position_embedding(pw, ph, cfg.dim);
        let mut sum = w.norm_image.forward(&img)?;

        if let Some(r) = &v.rays {
            let data: Vec<f64> = r
                .directions()
                .iter()
                .flat_map(|d| [d.x, d.y, d.z])
                .collect();
            sum += w
                .norm_rays
                .forward(&w.ray_embed.forward(&patchify(&data, 3, width, height, p))?)?;
        }
        if let Some(d) = &v.depth {
            let f = factor_depth(d)?;
            let data: Vec<f64> = f
                .normalized
                .values()
                .iter()
                .zip(f.normalized.validity())
                .flat_map(|(x, ok)| [*x, if *ok { 1.0 } else { 0.0 }])
                .collect();
            sum += w.norm_depth.forward(
                &w.depth_embed
                    .forward(&patchify(&data, 2, width, height, p))?,
            )?;
            if inputs.config.metric_depth_scale_given {
                let s = encode_log_scale(m * f.z_d)?;
                broadcast_add(
                    &mut sum,
                    &embed_global(&w.depth_scale_embed, &w.norm_depth_scale, &[s])?,
                );
            }
        }
        if let Some(pose) = &v.pose {
            let q: &Quaternion<f64> = pose.rotation();
            broadcast_add(
                &mut sum,
                &embed_global(&w.quat_embed, &w.norm_quat, &[q.w, q.i, q.j, q.k])?,
            );
            let t = next_t
                .next()
                .expect("one normalized translation per given pose");
            broadcast_add(
                &mut sum,
                &embed_global(&w.trans_embed, &w.norm_trans, &[t.x, t.y, t.z])?,
            );
            let f = pose_factors
                .as_ref()
                .expect("pose factors exist when a pose is given");
            if inputs.config.metric_pose_scale_given && !f.degenerate {
                let s = encode_log_scale(m * f.z_p)?;
                broadcast_add(
                    &mut sum,
                    &embed_global(&w.pose_scale_embed, &w.norm_pose_scale, &[s])?,
                );
            }
        }

        let mut tokens = w.norm_fuse.forward(&sum)?;
        if i == 0 {
            broadcast_add(&mut tokens, &w.reference_embed);
        }
        ensure_finite(&tokens, "input encoding")?;
        views.push(tokens);
    }
    Ok(TokenSet {
        views,
        scale: w.scale_token.clone(),
        sizes,
    })
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{metric_norm_scale, norm_scale};
use crate::geometry::{FactoredScene, PointMap};
use crate::grid::Grid;
use crate::losses::robust::RobustKernelParams;
use crate::losses::terms::*;
use crate::synth::SceneSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub pointmap: f64,
    pub rays: f64,
    pub rot: f64,
    pub translation: f64,
    pub depth: f64,
    pub lpm: f64,
    pub scale: f64,
    pub normal: f64,
    pub gm: f64,
    pub mask: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            pointmap: 10.0,
            rays: 1.0,
            rot: 1.0,
            translation: 1.0,
            depth: 1.0,
            lpm: 1.0,
            scale: 1.0,
            normal: 1.0,
            gm: 1.0,
            mask: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub robust: RobustKernelParams,
    /// Fraction of the largest per-pixel depth/lpm values discarded.
    pub exclude_top: f64,
    /// Weight of the `−ln C` confidence regularizer.
    pub alpha_conf: f64,
    pub gm_scales: usize,
    /// Enables the normal and gradient-matching terms.
    pub synthetic: bool,
    pub weights: LossWeights,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            robust: RobustKernelParams::default(),
            exclude_top: 0.05,
            alpha_conf: 0.2,
            gm_scales: 4,
            synthetic: false,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub pointmap: f64,
    pub rays: f64,
    pub rot: f64,
    pub translation: f64,
    pub depth: f64,
    pub lpm: f64,
    pub scale: f64,
    pub normal: f64,
    pub gm: f64,
    pub mask: f64,
    pub total: f64,
}

impl LossReport {
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.pointmap * self.pointmap
            + w.rays * self.rays
            + w.rot * self.rot
            + w.translation * self.translation
            + w.depth * self.depth
            + w.lpm * self.lpm
            + w.scale * self.scale
            + w.normal * self.normal
            + w.gm * self.gm
            + w.mask * self.mask
    }

    /// Builds a report whose total is the weighted sum of the given terms.
    pub fn from_terms(mut self, w: &LossWeights) -> Self {
        self.total = self.weighted_total(w);
        self
    }
}

/// Evaluates every loss term of a predicted factored scene against ground truth.
///
/// Ground-truth validity masks select the pixels of all geometry terms and of
/// both norm scaling factors. Missing prediction confidence is taken as 1;
/// a missing mask prediction leaves the mask term at 0.
pub fn total_loss(pred: &FactoredScene, gt: &SceneSample, cfg: &LossConfig) -> Result<LossReport> {
    let n = gt.views.len();
    if pred.views.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} views, ground truth {n}",
            pred.views.len()
        )));
    }
    for (i, (p, g)) in pred.views.iter().zip(&gt.views).enumerate() {
        if p.rays.directions().dims() != g.rays.directions().dims() {
            return Err(Error::ShapeMismatch(format!(
                "view {i}: prediction {:?} vs ground truth {:?}",
                p.rays.directions().dims(),
                g.rays.directions().dims()
            )));
        }
    }
    let p = &cfg.robust;

    let gt_local = gt.local_pointmaps()?;
    let gt_world = gt.world_pointmaps()?;
    let mut pred_local = Vec::with_capacity(n);
    let mut pred_world = Vec::with_capacity(n);
    for (pv, gv) in pred.views.iter().zip(&gt.views) {
        let valid = gv.depth.validity().clone();
        let l = pv.local_points()?.with_validity(valid.clone())?;
        let x = pv.world_points()?.with_validity(valid)?;
        pred_local.push(l);
        pred_world.push(x);
    }

    let z_gt = norm_scale(&gt_world)?;
    let z_pred = norm_scale(&pred_world)?;
    let z_gt_metric = metric_norm_scale(gt.metric_scale, z_gt)?;

    let pred_rays: Vec<_> = pred.views.iter().map(|v| v.rays.clone()).collect();
    let gt_rays: Vec<_> = gt.views.iter().map(|v| v.rays.clone()).collect();
    let pred_q: Vec<_> = pred.views.iter().map(|v| *v.pose.rotation()).collect();
    let gt_q: Vec<_> = gt.views.iter().map(|v| *v.pose.rotation()).collect();
    let pred_t: Vec<_> = pred.views.iter().map(|v| *v.pose.translation()).collect();
    let gt_t: Vec<_> = gt.views.iter().map(|v| *v.pose.translation()).collect();
    let pred_depth: Vec<_> = pred.views.iter().map(|v| v.depth.clone()).collect();
    let gt_depth: Vec<_> = gt.views.iter().map(|v| v.depth.clone()).collect();
    let conf: Vec<Grid<f64>> = pred
        .views
        .iter()
        .map(|v| {
            v.confidence
                .clone()
                .unwrap_or_else(|| Grid::filled(v.rays.width(), v.rays.height(), 1.0))
        })
        .collect();

    let (normal, gm) = if cfg.synthetic {
        let normal = loss_normal(&pred_local, &gt_local)?.value;
        let zp: Vec<_> = pred_local.iter().map(z_depth).collect();
        let zg: Vec<_> = gt_local.iter().map(z_depth).collect();
        let valid: Vec<_> = gt_local.iter().map(|l| l.validity().clone()).collect();
        (
            normal,
            loss_gradient_matching(&zp, &zg, &valid, cfg.gm_scales)?,
        )
    } else {
        (0.0, 0.0)
    };

    let mask = if pred.views.iter().all(|v| v.mask_prob.is_some()) {
        let probs: Vec<_> = pred
            .views
            .iter()
            .map(|v| v.mask_prob.clone().unwrap())
            .collect();
        let masks: Vec<_> = gt.views.iter().map(|v| v.mask.clone()).collect();
        loss_mask(&probs, &masks)?
    } else {
        0.0
    };

    let report = LossReport {
        pointmap: loss_pointmap_conf(
            &pred_world,
            &gt_world,
            &conf,
            z_pred,
            z_gt,
            cfg.alpha_conf,
            p,
        )?,
        rays: loss_rays(&pred_rays, &gt_rays, p)?,
        rot: loss_rot(&pred_q, &gt_q, p)?,
        translation: loss_translation(&pred_t, &gt_t, z_pred, z_gt, p)?,
        depth: loss_depth(&pred_depth, &gt_depth, z_pred, z_gt, cfg.exclude_top, p)?,
        lpm: loss_local_pointmap(&pred_local, &gt_local, z_pred, z_gt, cfg.exclude_top, p)?,
        scale: loss_scale(z_gt_metric, pred.scale, z_pred, p),
        normal,
        gm,
        mask,
        total: 0.0,
    };
    Ok(report.from_terms(&cfg.weights))
}

fn z_depth(l: &PointMap) -> Grid<f64> {
    l.points().map(|p| p.z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_follow_total_identity() {
        let w = LossWeights::default();
        let only_pm = LossReport {
            pointmap: 0.3,
            rays: 0.0,
            rot: 0.0,
            translation: 0.0,
            depth: 0.0,
            lpm: 0.0,
            scale: 0.0,
            normal: 0.0,
            gm: 0.0,
            mask: 0.0,
            total: 0.0,
        }
        .from_terms(&w);
        assert_eq!(only_pm.total, 3.0);
        let only_mask = LossReport {
            pointmap: 0.0,
            mask: 0.7,
            ..only_pm
        }
        .from_terms(&w);
        assert!((only_mask.total - 0.07).abs() < 1e-15);
    }
}

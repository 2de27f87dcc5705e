//! Benchmark metrics: depth and pointmap error, inlier ratio, trajectory
//! error after similarity alignment, pairwise pose angular errors, AUC, ray
//! angular error and metric scale error.

use nalgebra::{Matrix3, Quaternion, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    quat_angle, ray_angle_deg, relative_pose, rot_to_quat, FactoredScene, MetricScale, Pose, Vec3,
};
use crate::grid::Grid;
use crate::synth::SceneSample;

pub const DEFAULT_TAU_RATIO: f64 = 1.03;
pub const DEFAULT_AUC_THRESHOLD_DEG: f64 = 5.0;
/// Baselines shorter than this have no defined translation direction.
pub const MIN_BASELINE: f64 = 1e-9;

fn masked_pairs<'a>(
    pred: &'a Grid<f64>,
    gt: &'a Grid<f64>,
    validity: &'a Grid<bool>,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    pred.check_dims(gt, "metric pred vs gt")?;
    gt.check_dims(validity, "metric gt vs validity")?;
    Ok(pred
        .iter()
        .zip(gt)
        .zip(validity)
        .filter_map(|((p, g), ok)| ok.then_some((*p, *g))))
}

pub fn abs_rel(pred: &Grid<f64>, gt: &Grid<f64>, validity: &Grid<bool>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, g) in masked_pairs(pred, gt, validity)? {
        sum += (p - g).abs() / g;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("abs_rel: no valid pixels".into()));
    }
    Ok(sum / n as f64)
}

/// Fraction of valid pixels with `max(pred/gt, gt/pred) < ratio_threshold`.
pub fn inlier_ratio_tau(
    pred: &Grid<f64>,
    gt: &Grid<f64>,
    validity: &Grid<bool>,
    ratio_threshold: f64,
) -> Result<f64> {
    let (mut inliers, mut n) = (0usize, 0usize);
    for (p, g) in masked_pairs(pred, gt, validity)? {
        if (p / g).max(g / p) < ratio_threshold {
            inliers += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("inlier_ratio_tau: no valid pixels".into()));
    }
    Ok(inliers as f64 / n as f64)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of `gt/pred` over valid pixels, and `pred` rescaled by it.
pub fn median_align(
    pred: &Grid<f64>,
    gt: &Grid<f64>,
    validity: &Grid<bool>,
) -> Result<(f64, Grid<f64>)> {
    let mut ratios: Vec<f64> = masked_pairs(pred, gt, validity)?
        .map(|(p, g)| g / p)
        .collect();
    if ratios.is_empty() {
        return Err(Error::Empty("median_align: no valid pixels".into()));
    }
    let s = median(&mut ratios);
    Ok((s, pred.map(|p| p * s)))
}

/// `dst ≈ scale · R · src + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Quaternion<f64>,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Quaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        crate::geometry::quat_to_rot(&self.rotation) * p * self.scale + self.translation
    }

    /// Transforms a camera-to-world pose: centers map as points, rotations
    /// are pre-multiplied.
    pub fn apply_pose(&self, p: &Pose) -> Result<Pose> {
        Pose::from_unnormalized(self.rotation * p.rotation(), self.apply(p.translation()))
    }
}

/// Closed-form least-squares similarity (or rigid, without scale) alignment.
pub fn umeyama(src: &[Vec3], dst: &[Vec3], with_scale: bool) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch(format!(
            "umeyama: {} vs {} points",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::Degenerate(format!(
            "umeyama needs ≥ 3 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mu_s = src.iter().sum::<Vec3>() / nf;
    let mu_d = dst.iter().sum::<Vec3>() / nf;
    let mut cov = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let a = s - mu_s;
        let b = d - mu_d;
        cov += b * a.transpose();
        src_cov += a * a.transpose();
        var_s += a.norm_squared();
    }
    cov /= nf;
    src_cov /= nf;
    var_s /= nf;

    // Non-collinearity: the source spread must span at least a plane.
    let sv = src_cov.symmetric_eigenvalues();
    let mut ev = [sv[0], sv[1], sv[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(ev[0] > 0.0) || ev[1] <= 1e-12 * ev[0] {
        return Err(Error::Degenerate(
            "source points are collinear or coincident".into(),
        ));
    }

    let svd = SVD::new(cov, true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD failed".into())),
    };
    let mut signs = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        signs[(2, 2)] = -1.0;
    }
    let r = u * signs * v_t;
    let scale = if with_scale {
        (svd.singular_values.component_mul(&signs.diagonal())).sum() / var_s
    } else {
        1.0
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Degenerate(format!(
            "non-positive alignment scale {scale}"
        )));
    }
    let translation = mu_d - r * mu_s * scale;
    Ok(SimilarityTransform {
        scale,
        rotation: rot_to_quat(&r)?,
        translation,
    })
}

/// RMSE of camera centers after similarity-aligning prediction to ground truth.
pub fn ate_rmse(pred_traj: &[Pose], gt_traj: &[Pose]) -> Result<f64> {
    if pred_traj.len() != gt_traj.len() {
        return Err(Error::ShapeMismatch(format!(
            "trajectory lengths {} vs {}",
            pred_traj.len(),
            gt_traj.len()
        )));
    }
    let src: Vec<Vec3> = pred_traj.iter().map(Pose::center).collect();
    let dst: Vec<Vec3> = gt_traj.iter().map(Pose::center).collect();
    let sim = umeyama(&src, &dst, true)?;
    let sq: f64 = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (sim.apply(s) - d).norm_squared())
        .sum();
    Ok((sq / src.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairError {
    pub i: usize,
    pub j: usize,
    pub rra_deg: f64,
    /// `None` when either baseline is shorter than [`MIN_BASELINE`].
    pub rta_deg: Option<f64>,
}

impl PairError {
    /// Error used for AUC: the worse of rotation and translation.
    pub fn max_error(&self) -> f64 {
        self.rta_deg.map_or(self.rra_deg, |t| t.max(self.rra_deg))
    }
}

/// Relative rotation and translation-direction errors for every ordered pair.
pub fn pose_angular_errors(pred: &[Pose], gt: &[Pose]) -> Result<Vec<PairError>> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} poses",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Degenerate(
            "pose errors need at least 2 poses".into(),
        ));
    }
    let mut out = Vec::with_capacity(pred.len() * (pred.len() - 1));
    for i in 0..pred.len() {
        for j in 0..pred.len() {
            if i == j {
                continue;
            }
            let rp = relative_pose(&pred[i], &pred[j]);
            let rg = relative_pose(&gt[i], &gt[j]);
            let rra_deg = quat_angle(rp.rotation(), rg.rotation()).to_degrees();
            let (tp, tg) = (rp.translation(), rg.translation());
            let rta_deg = (tp.norm() >= MIN_BASELINE && tg.norm() >= MIN_BASELINE)
                .then(|| ray_angle_deg(&tp.normalize(), &tg.normalize()));
            out.push(PairError {
                i,
                j,
                rra_deg,
                rta_deg,
            });
        }
    }
    if out.iter().all(|e| e.rta_deg.is_none()) {
        return Err(Error::Degenerate("every pair has a zero baseline".into()));
    }
    Ok(out)
}

/// Normalized area under the accuracy curve up to `max_threshold`:
/// `mean(max(0, T − e)) / T` for a piecewise-constant accuracy.
pub fn auc_at_threshold(errors_deg: &[f64], max_threshold: f64) -> Result<f64> {
    if errors_deg.is_empty() {
        return Err(Error::Empty("auc: no errors".into()));
    }
    if !(max_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "auc threshold {max_threshold}"
        )));
    }
    if let Some(e) = errors_deg.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::InvalidArgument(format!("negative or NaN error {e}")));
    }
    let area: f64 = errors_deg
        .iter()
        .map(|e| (max_threshold - e).max(0.0))
        .sum();
    Ok(area / (max_threshold * errors_deg.len() as f64))
}

pub fn scale_rel(pred: MetricScale, gt: MetricScale) -> f64 {
    (pred.value() - gt.value()).abs() / gt.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub depth_rel: f64,
    pub depth_tau: f64,
    pub points_rel: f64,
    pub points_tau: f64,
    /// `None` with fewer than 3 views or collinear camera centers.
    pub ate_rmse: Option<f64>,
    /// `None` for single-view scenes.
    pub pose_auc5: Option<f64>,
    pub pose_rra_deg: Option<f64>,
    pub pose_rta_deg: Option<f64>,
    pub ray_err_deg: f64,
    pub scale_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Fit one global least-squares scale to the predicted pointmaps and
    /// median-align each predicted depth map before scoring.
    pub align_points: bool,
    pub tau_ratio: f64,
    pub auc_threshold_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            align_points: false,
            tau_ratio: DEFAULT_TAU_RATIO,
            auc_threshold_deg: DEFAULT_AUC_THRESHOLD_DEG,
        }
    }
}

/// Scores a prediction against ground truth in metric units.
///
/// Depth metrics use ray depth; pointmap metrics use the per-pixel error
/// norm relative to the ground-truth point norm, with the inlier test
/// `‖p − g‖/‖g‖ < tau_ratio − 1`.
pub fn evaluate_scene(
    pred: &FactoredScene,
    gt: &SceneSample,
    cfg: &EvalConfig,
) -> Result<MetricReport> {
    let n = gt.n_views();
    if pred.n_views() != n {
        return Err(Error::ShapeMismatch(format!(
            "prediction has {} views, ground truth {n}",
            pred.n_views()
        )));
    }
    let (mp, mg) = (pred.scale.value(), gt.metric_scale.value());

    // Depth.
    let (mut d_rel, mut d_tau, mut d_n) = (0.0, 0.0, 0usize);
    for (pv, gv) in pred.views.iter().zip(&gt.views) {
        let valid = gv.validity();
        let count = valid.iter().filter(|v| **v).count();
        if count == 0 {
            continue;
        }
        let gd = gv.depth.values().map(|d| d * mg);
        let mut pd = pv.depth.values().map(|d| d * mp);
        if cfg.align_points {
            pd = median_align(&pd, &gd, valid)?.1;
        }
        d_rel += abs_rel(&pd, &gd, valid)? * count as f64;
        d_tau += inlier_ratio_tau(&pd, &gd, valid, cfg.tau_ratio)? * count as f64;
        d_n += count;
    }
    if d_n == 0 {
        return Err(Error::Empty("ground truth has no valid pixels".into()));
    }

    // Pointmaps.
    let gt_pts = gt.world_pointmaps()?;
    let pred_pts = pred.world_pointmaps()?;
    let mut pairs: Vec<(Vec3, Vec3)> = Vec::with_capacity(d_n);
    for (p, g) in pred_pts.iter().zip(&gt_pts) {
        p.points()
            .check_dims(g.points(), "evaluate_scene pointmaps")?;
        for ((pp, gp), ok) in p.points().iter().zip(g.points()).zip(g.validity()) {
            if *ok {
                pairs.push((pp * mp, gp * mg));
            }
        }
    }
    let align = if cfg.align_points {
        let num: f64 = pairs.iter().map(|(p, g)| p.dot(g)).sum();
        let den: f64 = pairs.iter().map(|(p, _)| p.norm_squared()).sum();
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    } else {
        1.0
    };
    let inlier_rel = cfg.tau_ratio - 1.0;
    let (mut p_rel, mut p_in, mut p_n) = (0.0, 0usize, 0usize);
    for (p, g) in &pairs {
        let gn = g.norm();
        if gn <= 0.0 {
            continue;
        }
        let rel = (p * align - g).norm() / gn;
        p_rel += rel;
        if rel < inlier_rel {
            p_in += 1;
        }
        p_n += 1;
    }

    // Poses.
    let metric_pose = |p: &Pose, m: f64| p.with_translation(p.translation() * m);
    let pred_poses: Vec<Pose> = pred
        .views
        .iter()
        .map(|v| metric_pose(&v.pose, mp))
        .collect();
    let gt_poses: Vec<Pose> = gt.views.iter().map(|v| metric_pose(&v.pose, mg)).collect();
    let ate = if n >= 3 {
        ate_rmse(&pred_poses, &gt_poses).ok()
    } else {
        None
    };
    let (auc, rra, rta) = if n >= 2 {
        match pose_angular_errors(&pred_poses, &gt_poses) {
            Ok(errs) => {
                let maxes: Vec<f64> = errs.iter().map(PairError::max_error).collect();
                let rra = errs.iter().map(|e| e.rra_deg).sum::<f64>() / errs.len() as f64;
                let rtas: Vec<f64> = errs.iter().filter_map(|e| e.rta_deg).collect();
                let rta = rtas.iter().sum::<f64>() / rtas.len() as f64;
                (
                    Some(auc_at_threshold(&maxes, cfg.auc_threshold_deg)?),
                    Some(rra),
                    Some(rta),
                )
            }
            Err(_) => (None, None, None),
        }
    } else {
        (None, None, None)
    };

    // Rays.
    let (mut ray_sum, mut ray_n) = (0.0, 0usize);
    for (pv, gv) in pred.views.iter().zip(&gt.views) {
        pv.rays
            .directions()
            .check_dims(gv.rays.directions(), "evaluate_scene rays")?;
        for (a, b) in pv.rays.directions().iter().zip(gv.rays.directions()) {
            ray_sum += ray_angle_deg(a, b);
            ray_n += 1;
        }
    }

    Ok(MetricReport {
        depth_rel: d_rel / d_n as f64,
        depth_tau: d_tau / d_n as f64,
        points_rel: if p_n > 0 { p_rel / p_n as f64 } else { 0.0 },
        points_tau: if p_n > 0 {
            p_in as f64 / p_n as f64
        } else {
            1.0
        },
        ate_rmse: ate,
        pose_auc5: auc,
        pose_rra_deg: rra,
        pose_rta_deg: rta,
        ray_err_deg: if ray_n > 0 {
            ray_sum / ray_n as f64
        } else {
            0.0
        },
        scale_rel: scale_rel(pred.scale, gt.metric_scale),
    })
}

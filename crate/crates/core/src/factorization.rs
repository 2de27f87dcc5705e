//! Input/output factorizations: per-view depth scale, pose scale, log-scale
//! encoding, the `f_log` transform and pooled norm scaling factors.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geometry::{DepthAlongRay, MetricScale, PointMap, Vec3};

/// Pose scales at or below this are treated as degenerate.
pub const POSE_SCALE_EPS: f64 = 1e-9;
pub const LOG_SCALE_MIN: f64 = 1e-6;
pub const LOG_SCALE_MAX: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct DepthFactors {
    /// Mean valid ray depth.
    pub z_d: f64,
    pub normalized: DepthAlongRay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseScaleFactors {
    pub z_p: f64,
    pub normalized_translations: Vec<Vec3>,
    /// Set when the mean translation norm is ≤ `POSE_SCALE_EPS`; translations
    /// are then passed through unchanged and `z_p` is 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormScale(f64);

impl NormScale {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "norm scale must be finite and positive, got {value}"
            )))
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.0
    }
}

pub fn factor_depth(d: &DepthAlongRay) -> Result<DepthFactors> {
    let (sum, count) = d
        .values()
        .iter()
        .zip(d.validity())
        .filter(|(_, ok)| **ok)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::Empty("depth map has no valid pixels".into()));
    }
    let z_d = sum / count as f64;
    Ok(DepthFactors {
        z_d,
        normalized: d.scaled(1.0 / z_d)?,
    })
}

pub fn factor_pose_scale(translations: &[Vec3]) -> Result<PoseScaleFactors> {
    if translations.is_empty() {
        return Err(Error::Empty("no translations to factor".into()));
    }
    let z_p = translations.iter().map(|t| t.norm()).sum::<f64>() / translations.len() as f64;
    if z_p <= POSE_SCALE_EPS {
        return Ok(PoseScaleFactors {
            z_p: 0.0,
            normalized_translations: translations.to_vec(),
            degenerate: true,
        });
    }
    Ok(PoseScaleFactors {
        z_p,
        normalized_translations: translations.iter().map(|t| t / z_p).collect(),
        degenerate: false,
    })
}

/// Natural log of the scale clamped to `[1e-6, 1e6]`.
pub fn encode_log_scale(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("scale {s} is not finite")));
    }
    Ok(s.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX).ln())
}

pub fn decode_log_scale(e: f64) -> Result<f64> {
    if !e.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "encoded scale {e} is not finite"
        )));
    }
    Ok(e.clamp(LOG_SCALE_MIN.ln(), LOG_SCALE_MAX.ln()).exp())
}

/// `x ↦ (x/‖x‖)·ln(1+‖x‖)`, with `0 ↦ 0`.
pub fn f_log(x: &Vec3) -> Vec3 {
    let r = x.norm();
    if r == 0.0 {
        return Vec3::zeros();
    }
    x * (r.ln_1p() / r)
}

/// Scalar specialization: `sign(s)·ln(1+|s|)`.
pub fn f_log_scalar(s: f64) -> f64 {
    s.signum() * s.abs().ln_1p()
}

pub fn f_log_scalar_grad(s: f64) -> f64 {
    1.0 / (1.0 + s.abs())
}

/// Jacobian of [`f_log`]: `g(r)/r·I + (g'(r) − g(r)/r)·x̂x̂ᵀ` with `g = ln(1+·)`.
pub fn f_log_jacobian(x: &Vec3) -> Matrix3<f64> {
    let r = x.norm();
    if r == 0.0 {
        return Matrix3::identity();
    }
    let ratio = r.ln_1p() / r;
    let radial = 1.0 / (1.0 + r);
    let u = x / r;
    Matrix3::identity() * ratio + (u * u.transpose()) * (radial - ratio)
}

/// Mean Euclidean norm of all valid points pooled across views.
pub fn norm_scale(pointmaps: &[PointMap]) -> Result<NormScale> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for pm in pointmaps {
        for p in pm.valid_points() {
            sum += p.norm();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("no valid points for norm scale".into()));
    }
    NormScale::new(sum / count as f64)
}

/// `m · sg(z̃)`: the predicted norm scale enters as a constant.
pub fn metric_norm_scale(m: MetricScale, z_pred: NormScale) -> Result<NormScale> {
    NormScale::new(m.value() * z_pred.value())
}

//! Central-camera ray maps and their pinhole specialization.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::grid::Grid;

const UNIT_TOL: f64 = 1e-6;

/// Pinhole intrinsics in pixels, no skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be finite and positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidIntrinsics(
                "non-finite principal point".into(),
            ));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.fx, self.fy, self.cx, self.cy]
    }

    /// Unnormalized back-projection of a continuous pixel coordinate.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Continuous pixel coordinate of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Per-pixel unit ray directions in the camera frame (+z forward).
#[derive(Debug, Clone, PartialEq)]
pub struct RayMap {
    directions: Grid<Vec3>,
}

impl RayMap {
    /// Checks unit norm (within 1e-6) and strictly positive z for every ray.
    pub fn new(directions: Grid<Vec3>) -> Result<Self> {
        for (i, d) in directions.iter().enumerate() {
            if !d.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidRays(format!("non-finite ray at index {i}")));
            }
            if (d.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidRays(format!(
                    "ray at index {i} has norm {}",
                    d.norm()
                )));
            }
            if d.z <= 0.0 {
                return Err(Error::InvalidRays(format!(
                    "ray at index {i} is not front-facing (z = {})",
                    d.z
                )));
            }
        }
        Ok(Self { directions })
    }

    pub fn width(&self) -> usize {
        self.directions.width()
    }

    pub fn height(&self) -> usize {
        self.directions.height()
    }

    pub fn directions(&self) -> &Grid<Vec3> {
        &self.directions
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> &Vec3 {
        self.directions.get(u, v)
    }
}

pub fn rays_from_intrinsics(k: &Intrinsics, width: usize, height: usize) -> Result<RayMap> {
    k.validate()?;
    let directions = Grid::from_fn(width, height, |u, v| {
        k.unproject(u as f64 + 0.5, v as f64 + 0.5).normalize()
    });
    RayMap::new(directions)
}

/// Least-squares pinhole fit to a ray map.
///
/// Each ray maps to the pixel `(fx·dx/dz + cx, fy·dy/dz + cy)`; the x and y
/// axes decouple into two independent 2-parameter linear problems whose
/// target is the pixel center. Returns the fit and the RMS pixel error.
pub fn intrinsics_from_rays(r: &RayMap) -> Result<(Intrinsics, f64)> {
    let n = r.directions().len();
    if n == 0 {
        return Err(Error::RankDeficient("empty ray map".into()));
    }
    let w = r.width();
    let mut ax = Vec::with_capacity(n);
    let mut ay = Vec::with_capacity(n);
    let mut px = Vec::with_capacity(n);
    let mut py = Vec::with_capacity(n);
    for (i, d) in r.directions().iter().enumerate() {
        ax.push(d.x / d.z);
        ay.push(d.y / d.z);
        px.push((i % w) as f64 + 0.5);
        py.push((i / w) as f64 + 0.5);
    }
    let (fx, cx) = fit_line(&ax, &px)
        .ok_or_else(|| Error::RankDeficient("ray x-slopes are constant; cannot fit fx".into()))?;
    let (fy, cy) = fit_line(&ay, &py)
        .ok_or_else(|| Error::RankDeficient("ray y-slopes are constant; cannot fit fy".into()))?;
    let k = Intrinsics::new(fx, fy, cx, cy)?;

    let mut sq = 0.0;
    for i in 0..n {
        let ex = fx * ax[i] + cx - px[i];
        let ey = fy * ay[i] + cy - py[i];
        sq += ex * ex + ey * ey;
    }
    Ok((k, (sq / n as f64).sqrt()))
}

/// Ordinary least squares `y ≈ slope·x + offset` on centered data.
fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let scale = x.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0);
    if sxx <= 1e-24 * n * scale * scale {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Mean per-pixel angle between two ray maps, in degrees.
pub fn ray_angular_error(pred: &RayMap, gt: &RayMap) -> Result<f64> {
    pred.directions()
        .check_dims(gt.directions(), "ray_angular_error")?;
    let n = pred.directions().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred
        .directions()
        .iter()
        .zip(gt.directions())
        .map(|(a, b)| ray_angle_deg(a, b))
        .sum();
    Ok(sum / n as f64)
}

#[inline]
pub(crate) fn ray_angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

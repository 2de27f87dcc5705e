//! Depth along rays, pointmaps and the factored scene composition
//! `metric = m · (R · (rays · depth) + t)`.

use crate::error::{Error, Result};
use crate::geometry::{Pose, RayMap, Vec3};
use crate::grid::Grid;

/// Distance along each pixel's unit ray. Invalid pixels hold 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthAlongRay {
    values: Grid<f64>,
    validity: Grid<bool>,
}

impl DepthAlongRay {
    /// Zeroes invalid pixels; rejects valid pixels that are not finite and positive.
    pub fn new(mut values: Grid<f64>, validity: Grid<bool>) -> Result<Self> {
        values.check_dims(&validity, "depth values vs validity")?;
        for (i, (v, ok)) in values
            .as_mut_slice()
            .iter_mut()
            .zip(validity.iter())
            .enumerate()
        {
            if *ok {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "valid depth at index {i} is {v}"
                    )));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self { values, validity })
    }

    /// Every pixel valid.
    pub fn dense(values: Grid<f64>) -> Result<Self> {
        let validity = Grid::filled(values.width(), values.height(), true);
        Self::new(values, validity)
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.validity
    }

    pub fn valid_count(&self) -> usize {
        self.validity.iter().filter(|v| **v).count()
    }

    /// Same values under a different mask; newly valid pixels must hold positive values.
    pub fn with_validity(&self, validity: Grid<bool>) -> Result<Self> {
        Self::new(self.values.clone(), validity)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(self.values.map(|v| v * k), self.validity.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMap {
    points: Grid<Vec3>,
    validity: Grid<bool>,
}

impl PointMap {
    pub fn new(mut points: Grid<Vec3>, validity: Grid<bool>) -> Result<Self> {
        points.check_dims(&validity, "points vs validity")?;
        for (i, (p, ok)) in points
            .as_mut_slice()
            .iter_mut()
            .zip(validity.iter())
            .enumerate()
        {
            if *ok {
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "valid point at index {i} is not finite"
                    )));
                }
            } else {
                *p = Vec3::zeros();
            }
        }
        Ok(Self { points, validity })
    }

    pub fn width(&self) -> usize {
        self.points.width()
    }

    pub fn height(&self) -> usize {
        self.points.height()
    }

    pub fn points(&self) -> &Grid<Vec3> {
        &self.points
    }

    pub fn validity(&self) -> &Grid<bool> {
        &self.validity
    }

    /// Valid points in row-major order.
    pub fn valid_points(&self) -> impl Iterator<Item = &Vec3> {
        self.points
            .iter()
            .zip(self.validity.iter())
            .filter_map(|(p, ok)| ok.then_some(p))
    }

    pub fn with_validity(&self, validity: Grid<bool>) -> Result<Self> {
        Self::new(self.points.clone(), validity)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            points: self.points.map(|p| p * k),
            validity: self.validity.clone(),
        }
    }
}

/// Meters per model unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricScale(f64);

impl MetricScale {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "metric scale must be finite and positive, got {value}"
            )))
        }
    }

    pub fn unit() -> Self {
        Self(1.0)
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.0
    }
}

pub fn local_pointmap(r: &RayMap, d: &DepthAlongRay) -> Result<PointMap> {
    r.directions()
        .check_dims(d.values(), "local_pointmap rays vs depth")?;
    let points = Grid::from_vec(
        r.width(),
        r.height(),
        r.directions()
            .iter()
            .zip(d.values().iter())
            .map(|(dir, z)| dir * *z)
            .collect(),
    )?;
    PointMap::new(points, d.validity().clone())
}

pub fn world_pointmap(l: &PointMap, p: &Pose) -> PointMap {
    let rot = p.rotation_matrix();
    let t = p.translation();
    let points = l.points.map(|x| rot * x + t);
    PointMap {
        points,
        validity: l.validity.clone(),
    }
    .zero_invalid()
}

pub fn metric_upgrade(x: &PointMap, m: MetricScale) -> PointMap {
    x.scaled(m.value())
}

impl PointMap {
    fn zero_invalid(mut self) -> Self {
        for (p, ok) in self
            .points
            .as_mut_slice()
            .iter_mut()
            .zip(self.validity.iter())
        {
            if !ok {
                *p = Vec3::zeros();
            }
        }
        self
    }
}

/// One view of a factored scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredView {
    pub rays: RayMap,
    pub depth: DepthAlongRay,
    pub pose: Pose,
    /// Pointmap confidence, every value ≥ 1.
    pub confidence: Option<Grid<f64>>,
    /// Probability that a pixel is non-ambiguous, in [0, 1].
    pub mask_prob: Option<Grid<f64>>,
}

impl FactoredView {
    pub fn new(rays: RayMap, depth: DepthAlongRay, pose: Pose) -> Result<Self> {
        rays.directions()
            .check_dims(depth.values(), "view rays vs depth")?;
        Ok(Self {
            rays,
            depth,
            pose,
            confidence: None,
            mask_prob: None,
        })
    }

    pub fn local_points(&self) -> Result<PointMap> {
        local_pointmap(&self.rays, &self.depth)
    }

    pub fn world_points(&self) -> Result<PointMap> {
        Ok(world_pointmap(&self.local_points()?, &self.pose))
    }
}

/// Per-view rays, up-to-scale depth and pose plus one global metric scale.
/// View 0 is the reference frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredScene {
    pub views: Vec<FactoredView>,
    pub scale: MetricScale,
}

impl FactoredScene {
    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    /// Up-to-scale world-frame pointmaps of every view.
    pub fn world_pointmaps(&self) -> Result<Vec<PointMap>> {
        self.views.iter().map(FactoredView::world_points).collect()
    }

    /// Final metric reconstruction, one pointmap per view.
    pub fn metric_pointmaps(&self) -> Result<Vec<PointMap>> {
        Ok(self
            .world_pointmaps()?
            .iter()
            .map(|x| metric_upgrade(x, self.scale))
            .collect())
    }
}

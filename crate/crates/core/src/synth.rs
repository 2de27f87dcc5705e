//! Exact analytic scenes (spheres over a ground plane) rendered with a
//! pinhole raycaster. Ground truth produced here is the oracle for the
//! geometric round-trip and covisibility tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    local_pointmap, rays_from_intrinsics, world_pointmap, DepthAlongRay, FactoredScene,
    FactoredView, Intrinsics, MetricScale, PointMap, Pose, RayMap, Vec3,
};
use crate::grid::Grid;

/// Hits closer than this are ignored.
pub const MIN_HIT: f64 = 1e-6;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

/// Points `x` with `normal · x = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalyticScene {
    pub spheres: Vec<Sphere>,
    pub ground_plane: Option<Plane>,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t: f64,
    normal: Vec3,
    /// Sphere index, or `None` for the plane.
    sphere: Option<usize>,
}

impl AnalyticScene {
    pub fn validate(&self) -> Result<()> {
        for s in &self.spheres {
            if !(s.radius.is_finite() && s.radius > 0.0 && s.center.iter().all(|c| c.is_finite())) {
                return Err(Error::InvalidArgument(format!("bad sphere {s:?}")));
            }
        }
        if let Some(p) = &self.ground_plane {
            if !((p.normal.norm() - 1.0).abs() < 1e-9 && p.offset.is_finite()) {
                return Err(Error::InvalidArgument(format!("bad plane {p:?}")));
            }
        }
        Ok(())
    }

    /// Applies a rigid transform to every primitive.
    pub fn transformed(&self, pose: &Pose) -> Self {
        let r = pose.rotation_matrix();
        Self {
            spheres: self
                .spheres
                .iter()
                .map(|s| Sphere {
                    center: pose.transform_point(&s.center),
                    radius: s.radius,
                })
                .collect(),
            ground_plane: self.ground_plane.map(|p| {
                let normal = r * p.normal;
                let on_plane = pose.transform_point(&(p.normal * p.offset));
                Plane {
                    normal,
                    offset: normal.dot(&on_plane),
                }
            }),
        }
    }

    fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut consider = |h: Hit| {
            if h.t > MIN_HIT && best.is_none_or(|b| h.t < b.t) {
                best = Some(h);
            }
        };
        for (i, s) in self.spheres.iter().enumerate() {
            let oc = origin - s.center;
            let b = oc.dot(dir);
            let c = oc.dot(&oc) - s.radius * s.radius;
            let disc = b * b - c;
            if disc < 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            for t in [-b - sq, -b + sq] {
                if t > MIN_HIT {
                    let p = origin + dir * t;
                    consider(Hit {
                        t,
                        normal: (p - s.center) / s.radius,
                        sphere: Some(i),
                    });
                    break;
                }
            }
        }
        if let Some(pl) = &self.ground_plane {
            let denom = pl.normal.dot(dir);
            if denom.abs() > 1e-12 {
                let t = (pl.offset - pl.normal.dot(origin)) / denom;
                consider(Hit {
                    t,
                    normal: pl.normal,
                    sphere: None,
                });
            }
        }
        best
    }
}

/// Distance to the nearest surface along a unit ray, if any with `t > 1e-6`.
pub fn raycast(scene: &AnalyticScene, origin: &Vec3, direction: &Vec3) -> Option<f64> {
    scene.intersect(origin, direction).map(|h| h.t)
}

/// One ground-truth view.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleView {
    pub intrinsics: Option<Intrinsics>,
    pub rays: RayMap,
    /// Ray depth; its validity is the ground-truth validity mask.
    pub depth: DepthAlongRay,
    /// Non-ambiguous pixels (false on sky).
    pub mask: Grid<bool>,
    /// Camera-to-reference pose.
    pub pose: Pose,
    pub image: Option<Grid<Rgb>>,
}

impl SampleView {
    pub fn width(&self) -> usize {
        self.rays.width()
    }

    pub fn height(&self) -> usize {
        self.rays.height()
    }

    pub fn validity(&self) -> &Grid<bool> {
        self.depth.validity()
    }
}

/// Ground-truth container. Geometry is stored up to `metric_scale`:
/// metric quantities are `metric_scale ×` the stored ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSample {
    pub views: Vec<SampleView>,
    pub metric_scale: MetricScale,
}

impl SceneSample {
    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn local_pointmaps(&self) -> Result<Vec<PointMap>> {
        self.views
            .iter()
            .map(|v| local_pointmap(&v.rays, &v.depth))
            .collect()
    }

    pub fn world_pointmaps(&self) -> Result<Vec<PointMap>> {
        self.views
            .iter()
            .map(|v| Ok(world_pointmap(&local_pointmap(&v.rays, &v.depth)?, &v.pose)))
            .collect()
    }

    /// The ground truth as a factored prediction: unit confidence and a
    /// hard 0/1 mask probability.
    pub fn to_factored(&self) -> Result<FactoredScene> {
        let views = self
            .views
            .iter()
            .map(|v| {
                let mut f = FactoredView::new(v.rays.clone(), v.depth.clone(), v.pose)?;
                f.mask_prob = Some(v.mask.map(|m| if *m { 1.0 } else { 0.0 }));
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FactoredScene {
            views,
            scale: self.metric_scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub rays: RayMap,
    pub depth: DepthAlongRay,
    pub mask: Grid<bool>,
    pub image: Grid<Rgb>,
}

const SKY: Rgb = [135, 180, 235];

fn shade(hit: &Hit, point: &Vec3) -> Rgb {
    let light = Vec3::new(0.3, -0.5, 0.8).normalize();
    let lambert = 0.25 + 0.75 * hit.normal.dot(&light).abs();
    let base = match hit.sphere {
        Some(i) => {
            let palette = [
                [220.0, 80.0, 60.0],
                [70.0, 170.0, 90.0],
                [80.0, 110.0, 220.0],
                [230.0, 190.0, 60.0],
                [170.0, 90.0, 200.0],
            ];
            palette[i % palette.len()]
        }
        None => {
            let check =
                (point.x.floor() as i64 + point.y.floor() as i64 + point.z.floor() as i64) & 1;
            if check == 0 {
                [200.0, 200.0, 200.0]
            } else {
                [110.0, 110.0, 110.0]
            }
        }
    };
    base.map(|c: f64| (c * lambert).round().clamp(0.0, 255.0) as u8)
}

/// Raycasts every pixel of a pinhole camera. Depth is the distance along
/// the unit ray; validity and the non-ambiguous mask are both "hit".
pub fn render_view(
    scene: &AnalyticScene,
    intrinsics: &Intrinsics,
    pose: &Pose,
    width: usize,
    height: usize,
) -> Result<RenderedView> {
    let rays = rays_from_intrinsics(intrinsics, width, height)?;
    let rot = pose.rotation_matrix();
    let origin = *pose.translation();
    let hits: Vec<(f64, bool, Rgb)> = rays
        .directions()
        .as_slice()
        .par_iter()
        .map(|d| {
            let dir = rot * d;
            match scene.intersect(&origin, &dir) {
                Some(h) => (h.t, true, shade(&h, &(origin + dir * h.t))),
                None => (0.0, false, SKY),
            }
        })
        .collect();
    let values = Grid::from_vec(width, height, hits.iter().map(|h| h.0).collect())?;
    let validity = Grid::from_vec(width, height, hits.iter().map(|h| h.1).collect())?;
    let image = Grid::from_vec(width, height, hits.iter().map(|h| h.2).collect())?;
    Ok(RenderedView {
        rays,
        depth: DepthAlongRay::new(values, validity.clone())?,
        mask: validity,
        image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_views: usize,
    pub width: usize,
    pub height: usize,
    pub n_spheres: usize,
    pub seed: u64,
    /// Ground-truth metric scale stored alongside the rendered geometry.
    pub metric_scale: f64,
    pub ground_plane: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_views: 4,
            width: 64,
            height: 64,
            n_spheres: 4,
            seed: 0,
            metric_scale: 1.0,
            ground_plane: true,
        }
    }
}

pub const MIN_VALID_FRACTION: f64 = 0.1;
const CAMERA_RETRIES: usize = 64;

/// Camera-to-world pose looking from `eye` at `target` with world up `+z`.
/// Camera axes: x right, y down, z forward.
fn look_at(eye: Vec3, target: Vec3) -> Result<Pose> {
    let forward = (target - eye).normalize();
    let mut right = forward.cross(&Vec3::z());
    if right.norm() < 1e-9 {
        right = Vec3::x();
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let r = nalgebra::Matrix3::from_columns(&[right, down, forward]);
    Pose::from_rotation_matrix(&r, eye)
}

fn sample_camera(rng: &mut ChaCha8Rng, azimuth0: f64, cluster: Vec3, first: bool) -> Result<Pose> {
    let az = if first {
        azimuth0
    } else {
        azimuth0 + rng.gen_range(-120f64..120.0).to_radians()
    };
    let el = rng.gen_range(15f64..55.0).to_radians();
    let radius = rng.gen_range(3.5..5.5);
    let eye = cluster + Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * radius;
    let jitter = Vec3::new(
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
    );
    look_at(eye, cluster + jitter)
}

fn sample_intrinsics(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Result<Intrinsics> {
    let fov = rng.gen_range(40f64..80.0).to_radians();
    let (w, h) = (width as f64, height as f64);
    let f = 0.5 * w / (0.5 * fov).tan();
    Intrinsics::new(
        f,
        f,
        0.5 * w + rng.gen_range(-0.05..0.05) * w,
        0.5 * h + rng.gen_range(-0.05..0.05) * h,
    )
}

/// Generates a seeded scene and its ground truth in the frame of view 0.
///
/// Cameras sit on a hemisphere around the sphere cluster and look at it with
/// jitter; each view is resampled until at least 10% of its pixels hit.
pub fn gen_scene(params: &SynthParams) -> Result<(AnalyticScene, SceneSample)> {
    let SynthParams {
        n_views,
        width,
        height,
        n_spheres,
        seed,
        ..
    } = *params;
    if n_views == 0 {
        return Err(Error::InvalidArgument("n_views must be ≥ 1".into()));
    }
    if width < 8 || height < 8 {
        return Err(Error::InvalidArgument(format!(
            "image must be at least 8x8, got {width}x{height}"
        )));
    }
    let aspect = width as f64 / height as f64;
    if !(0.5..=3.0).contains(&aspect) {
        return Err(Error::InvalidArgument(format!(
            "aspect ratio {aspect:.3} outside [1:2, 3:1]"
        )));
    }
    let metric_scale = MetricScale::new(params.metric_scale)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spheres = Vec::with_capacity(n_spheres);
    for _ in 0..n_spheres {
        let radius = rng.gen_range(0.3..0.8);
        let center = Vec3::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
            radius + rng.gen_range(0.0..1.0),
        );
        spheres.push(Sphere { center, radius });
    }
    let world = AnalyticScene {
        spheres,
        ground_plane: params.ground_plane.then_some(Plane {
            normal: Vec3::z(),
            offset: 0.0,
        }),
    };
    let cluster = if world.spheres.is_empty() {
        Vec3::zeros()
    } else {
        world.spheres.iter().map(|s| s.center).sum::<Vec3>() / world.spheres.len() as f64
    };
    let azimuth0 = rng.gen_range(0.0..std::f64::consts::TAU);

    let mut cams = Vec::with_capacity(n_views);
    for i in 0..n_views {
        let mut accepted = None;
        for _ in 0..CAMERA_RETRIES {
            let pose = sample_camera(&mut rng, azimuth0, cluster, i == 0)?;
            let k = sample_intrinsics(&mut rng, width, height)?;
            let view = render_view(&world, &k, &pose, width, height)?;
            let frac = view.depth.valid_count() as f64 / (width * height) as f64;
            if frac >= MIN_VALID_FRACTION {
                accepted = Some((pose, k));
                break;
            }
        }
        cams.push(accepted.ok_or_else(|| {
            Error::RetryExhausted(format!(
                "view {i} never reached {MIN_VALID_FRACTION} valid pixels"
            ))
        })?);
    }

    // Re-express everything in the frame of view 0 and render there.
    let to_ref = cams[0].0.inverse();
    let scene = world.transformed(&to_ref);
    let mut views = Vec::with_capacity(n_views);
    for (i, (pose_w, k)) in cams.iter().enumerate() {
        let pose = if i == 0 {
            Pose::identity()
        } else {
            to_ref.compose(pose_w)
        };
        let r = render_view(&scene, k, &pose, width, height)?;
        views.push(SampleView {
            intrinsics: Some(*k),
            rays: r.rays,
            depth: r.depth,
            mask: r.mask,
            pose,
            image: Some(r.image),
        });
    }
    Ok((
        scene,
        SceneSample {
            views,
            metric_scale,
        },
    ))
}

/// Raycast hit points of every pixel of a view, in the scene frame.
pub fn raycast_points(scene: &AnalyticScene, view: &SampleView) -> Vec<Option<Vec3>> {
    let rot = view.pose.rotation_matrix();
    let origin = *view.pose.translation();
    view.rays
        .directions()
        .iter()
        .map(|d| {
            let dir = rot * d;
            raycast(scene, &origin, &dir).map(|t| origin + dir * t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ball(z: f64, r: f64) -> AnalyticScene {
        AnalyticScene {
            spheres: vec![Sphere {
                center: Vec3::new(0.0, 0.0, z),
                radius: r,
            }],
            ground_plane: None,
        }
    }

    #[test]
    fn ray_hits_sphere_front() {
        assert_eq!(
            raycast(&ball(5.0, 1.0), &Vec3::zeros(), &Vec3::z()),
            Some(4.0)
        );
    }

    #[test]
    fn ray_away_misses() {
        assert_eq!(raycast(&ball(5.0, 1.0), &Vec3::zeros(), &-Vec3::z()), None);
    }

    #[test]
    fn tangent_ray() {
        // Sphere at (1, 0, 5) radius 1 touches the z axis at z = 5.
        let s = AnalyticScene {
            spheres: vec![Sphere {
                center: Vec3::new(1.0, 0.0, 5.0),
                radius: 1.0,
            }],
            ground_plane: None,
        };
        assert_eq!(raycast(&s, &Vec3::zeros(), &Vec3::z()), Some(5.0));
    }

    #[test]
    fn plane_hit() {
        let s = AnalyticScene {
            spheres: vec![],
            ground_plane: Some(Plane {
                normal: Vec3::z(),
                offset: 2.0,
            }),
        };
        assert_eq!(raycast(&s, &Vec3::zeros(), &Vec3::z()), Some(2.0));
        assert_eq!(raycast(&s, &Vec3::zeros(), &Vec3::x()), None);
    }

    #[test]
    fn center_pixel_depth() {
        let k = Intrinsics::new(10.0, 10.0, 4.5, 4.5).unwrap();
        let r = render_view(&ball(6.0, 1.5), &k, &Pose::identity(), 9, 9).unwrap();
        assert_abs_diff_eq!(*r.depth.values().get(4, 4), 4.5, epsilon = 1e-12);
        assert!(*r.mask.get(4, 4));
    }

    #[test]
    fn empty_half_space_all_invalid() {
        let k = Intrinsics::new(10.0, 10.0, 4.0, 4.0).unwrap();
        let r = render_view(&ball(-6.0, 1.0), &k, &Pose::identity(), 8, 8).unwrap();
        assert_eq!(r.depth.valid_count(), 0);
        assert!(r.mask.iter().all(|m| !m));
    }

    #[test]
    fn deterministic_and_reference_identity() {
        let p = SynthParams {
            n_views: 3,
            width: 24,
            height: 16,
            seed: 99,
            ..Default::default()
        };
        let (_, a) = gen_scene(&p).unwrap();
        let (_, b) = gen_scene(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.views[0].pose, Pose::identity());

        let (_, one) = gen_scene(&SynthParams { n_views: 1, ..p }).unwrap();
        assert_eq!(one.n_views(), 1);
        assert_eq!(one.views[0].pose, Pose::identity());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(gen_scene(&SynthParams {
            n_views: 0,
            ..Default::default()
        })
        .is_err());
        assert!(gen_scene(&SynthParams {
            width: 4,
            ..Default::default()
        })
        .is_err());
        assert!(gen_scene(&SynthParams {
            width: 64,
            height: 8,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn transformed_scene_preserves_hits() {
        let s = AnalyticScene {
            spheres: vec![Sphere {
                center: Vec3::new(0.3, 0.2, 4.0),
                radius: 1.0,
            }],
            ground_plane: Some(Plane {
                normal: Vec3::y(),
                offset: 1.5,
            }),
        };
        let pose = Pose::from_unnormalized(
            nalgebra::Quaternion::new(0.8, 0.1, 0.5, -0.2),
            Vec3::new(1.0, -2.0, 0.5),
        )
        .unwrap();
        let moved = s.transformed(&pose);
        let rot = pose.rotation_matrix();
        for d in [
            Vec3::z(),
            Vec3::new(0.1, 0.4, 1.0).normalize(),
            Vec3::new(0.0, 1.0, 0.2).normalize(),
        ] {
            let a = raycast(&s, &Vec3::zeros(), &d);
            let b = raycast(&moved, pose.translation(), &(rot * d));
            match (a, b) {
                (Some(x), Some(y)) => assert_abs_diff_eq!(x, y, epsilon = 1e-9),
                (None, None) => {}
                other => panic!("hit mismatch {other:?}"),
            }
        }
    }
}

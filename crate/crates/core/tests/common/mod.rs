//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. They deliberately avoid the library's own
//! geometry helpers.

#![allow(dead_code, clippy::needless_range_loop)]

use mapfactor::geometry::Vec3;
use mapfactor::synth::{gen_scene, AnalyticScene, SceneSample, SynthParams};
use nalgebra::{Matrix3, Matrix4, Vector4};

pub fn scene(seed: u64, n_views: usize, w: usize, h: usize) -> (AnalyticScene, SceneSample) {
    gen_scene(&SynthParams {
        n_views,
        width: w,
        height: h,
        seed,
        ..Default::default()
    })
    .expect("synthetic scene")
}

pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a − b| ≤ tol · max(|a|, |b|)`, with `floor` guarding exact zeros.
pub fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// Row-major 4×4 camera-to-world matrix from `[qw, qx, qy, qz, tx, ty, tz]`,
/// built from the textbook quaternion expansion.
pub fn homogeneous(pose: [f64; 7]) -> Matrix4<f64> {
    let [w, x, y, z, tx, ty, tz] = pose;
    Matrix4::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        tx,
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        ty,
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
        tz,
        0.0,
        0.0,
        0.0,
        1.0,
    )
}

/// Rigid inverse `[Rᵀ | −Rᵀt]`.
pub fn rigid_inverse(m: &Matrix4<f64>) -> Matrix4<f64> {
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let t = m.fixed_view::<3, 1>(0, 3).into_owned();
    let rt = r.transpose();
    let ti = -(rt * t);
    let mut out = Matrix4::identity();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    out.fixed_view_mut::<3, 1>(0, 3).copy_from(&ti);
    out
}

/// Naive per-pixel covisibility: lift every valid pixel of view i to world
/// coordinates, move it into view j, project with j's pinhole matrix, look up
/// the containing pixel and compare ray depths with a relative tolerance.
pub fn brute_force_covisibility(s: &SceneSample, tol: f64) -> Vec<Vec<f64>> {
    let n = s.n_views();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        out[i][i] = 1.0;
        let vi = &s.views[i];
        let to_world = homogeneous(vi.pose.to_array());
        for j in 0..n {
            if i == j {
                continue;
            }
            let vj = &s.views[j];
            let k = vj
                .intrinsics
                .expect("synthetic views carry intrinsics")
                .to_array();
            let kmat = Matrix3::new(k[0], 0.0, k[2], 0.0, k[1], k[3], 0.0, 0.0, 1.0);
            let world_to_j = rigid_inverse(&homogeneous(vj.pose.to_array()));
            let (w, h) = (vj.width(), vj.height());
            let (mut valid, mut hit) = (0usize, 0usize);
            for v in 0..vi.height() {
                for u in 0..vi.width() {
                    if !vi.depth.validity().get(u, v) {
                        continue;
                    }
                    valid += 1;
                    let p = vi.rays.get(u, v) * *vi.depth.values().get(u, v);
                    let xw = to_world * Vector4::new(p.x, p.y, p.z, 1.0);
                    let xj = world_to_j * xw;
                    let cam = Vec3::new(xj.x, xj.y, xj.z);
                    if cam.z <= 0.0 {
                        continue;
                    }
                    let pix = kmat * cam;
                    let (pu, pv) = (pix.x / pix.z, pix.y / pix.z);
                    if pu < 0.0 || pv < 0.0 || pu >= w as f64 || pv >= h as f64 {
                        continue;
                    }
                    let (cu, cv) = (pu as usize, pv as usize);
                    if !vj.depth.validity().get(cu, cv) {
                        continue;
                    }
                    let dj = *vj.depth.values().get(cu, cv);
                    if (cam.norm() - dj).abs() <= tol * dj {
                        hit += 1;
                    }
                }
            }
            out[i][j] = if valid == 0 {
                0.0
            } else {
                hit as f64 / valid as f64
            };
        }
    }
    out
}

mod common;

use common::{homogeneous, scene};
use mapfactor::factorization::{norm_scale, NormScale};
use mapfactor::geometry::{DepthAlongRay, MetricScale, Pose, Vec3};
use mapfactor::losses::*;
use mapfactor::synth::raycast_points;
use nalgebra::{Quaternion, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn composed_ground_truth_matches_raycast() {
    for seed in 0..25 {
        let (analytic, s) = scene(seed, 1 + (seed as usize % 6), 48, 40);
        let f = s.to_factored().unwrap();
        let world = f.world_pointmaps().unwrap();
        for (v, x) in s.views.iter().zip(&world) {
            let hits = raycast_points(&analytic, v);
            for ((hit, p), ok) in hits.iter().zip(x.points().iter()).zip(x.validity().iter()) {
                assert_eq!(hit.is_some(), *ok);
                if let Some(h) = hit {
                    assert!((h - p).amax() < 1e-6, "seed {seed}: {h:?} vs {p:?}");
                }
            }
        }
    }
}

#[test]
fn composition_agrees_with_homogeneous_matrices() {
    let (_, s) = scene(3, 4, 32, 32);
    let world = s.world_pointmaps().unwrap();
    for (v, x) in s.views.iter().zip(&world) {
        let m = homogeneous(v.pose.to_array());
        for vv in 0..v.height() {
            for u in 0..v.width() {
                if !v.depth.validity().get(u, vv) {
                    continue;
                }
                let l = v.rays.get(u, vv) * *v.depth.values().get(u, vv);
                let h = m * Vector4::new(l.x, l.y, l.z, 1.0);
                assert!((Vec3::new(h.x, h.y, h.z) - x.points().get(u, vv)).amax() < 1e-12);
            }
        }
    }
}

#[test]
fn metric_upgrade_scales_world_points() {
    let (_, mut s) = scene(9, 2, 24, 24);
    s.metric_scale = MetricScale::new(2.5).unwrap();
    let f = s.to_factored().unwrap();
    let up = f.metric_pointmaps().unwrap();
    let base = f.world_pointmaps().unwrap();
    for (a, b) in up.iter().zip(&base) {
        for (p, q) in a.valid_points().zip(b.valid_points()) {
            assert!((p - q * 2.5).amax() < 1e-12);
        }
    }
}

#[test]
fn loss_is_zero_at_truth_and_total_is_weighted_sum() {
    for seed in 0..10 {
        let (_, s) = scene(seed, 3, 32, 32);
        let pred = s.to_factored().unwrap();
        for synthetic in [false, true] {
            let cfg = LossConfig {
                synthetic,
                ..Default::default()
            };
            let r = total_loss(&pred, &s, &cfg).unwrap();
            assert!(r.total.abs() < 1e-6, "{r:?}");
            assert!((r.total - r.weighted_total(&LossWeights::default())).abs() < 1e-9);
        }
    }
}

#[test]
fn perturbed_prediction_satisfies_total_identity() {
    let (_, s) = scene(2, 3, 32, 32);
    let mut pred = s.to_factored().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for v in pred.views.iter_mut().skip(1) {
        let d = v.depth.values().map(|d| d * rng.gen_range(0.8..1.2));
        v.depth = DepthAlongRay::new(d, v.depth.validity().clone()).unwrap();
        v.pose = v
            .pose
            .with_translation(v.pose.translation() + Vec3::new(0.1, -0.05, 0.02));
    }
    let r = total_loss(&pred, &s, &LossConfig::default()).unwrap();
    assert!(r.total > 0.0);
    let w = LossWeights::default();
    let by_hand = 10.0 * r.pointmap
        + r.rays
        + r.rot
        + r.translation
        + r.depth
        + r.lpm
        + r.scale
        + r.normal
        + r.gm
        + 0.1 * r.mask;
    assert!((r.total - by_hand).abs() < 1e-9);
    assert!((r.total - r.weighted_total(&w)).abs() < 1e-12);
}

fn noisy_depth(d: &DepthAlongRay, rng: &mut ChaCha8Rng) -> DepthAlongRay {
    DepthAlongRay::new(
        d.values().map(|x| x * rng.gen_range(0.7..1.3)),
        d.validity().clone(),
    )
    .unwrap()
}

#[test]
fn scale_invariant_terms_ignore_joint_rescaling() {
    let p = RobustKernelParams::default();
    let (_, s) = scene(21, 3, 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gt_depth: Vec<_> = s.views.iter().map(|v| v.depth.clone()).collect();
    let pred_depth: Vec<_> = gt_depth.iter().map(|d| noisy_depth(d, &mut rng)).collect();
    let gt_local = s.local_pointmaps().unwrap();
    let gt_world = s.world_pointmaps().unwrap();
    let pred_local: Vec<_> = gt_local
        .iter()
        .map(|l| l.scaled(rng.gen_range(0.8..1.2)))
        .collect();
    let pred_world: Vec<_> = gt_world
        .iter()
        .map(|l| l.scaled(rng.gen_range(0.8..1.2)))
        .collect();
    let conf: Vec<_> = s
        .views
        .iter()
        .map(|v| v.depth.values().map(|_| 1.5))
        .collect();
    let gt_t: Vec<_> = s.views.iter().map(|v| *v.pose.translation()).collect();
    let pred_t: Vec<_> = gt_t.iter().map(|t| t + Vec3::new(0.2, 0.1, -0.3)).collect();
    let z_gt = norm_scale(&gt_world).unwrap();
    let z_pred = norm_scale(&pred_world).unwrap();

    let eval = |k: f64| {
        let zp = NormScale::new(z_pred.value() * k).unwrap();
        let d: Vec<_> = pred_depth.iter().map(|x| x.scaled(k).unwrap()).collect();
        let l: Vec<_> = pred_local.iter().map(|x| x.scaled(k)).collect();
        let w: Vec<_> = pred_world.iter().map(|x| x.scaled(k)).collect();
        let t: Vec<_> = pred_t.iter().map(|x| x * k).collect();
        [
            loss_depth(&d, &gt_depth, zp, z_gt, 0.05, &p).unwrap(),
            loss_local_pointmap(&l, &gt_local, zp, z_gt, 0.05, &p).unwrap(),
            loss_pointmap_conf(&w, &gt_world, &conf, zp, z_gt, 0.2, &p).unwrap(),
            loss_translation(&t, &gt_t, zp, z_gt, &p).unwrap(),
        ]
    };
    let base = eval(1.0);
    assert!(base.iter().all(|v| *v > 0.0));
    for k in [1e-3, 1.0, 1e3] {
        for (a, b) in eval(k).iter().zip(&base) {
            assert!((a - b).abs() < 1e-9, "k {k}: {a} vs {b}");
        }
    }
}

#[test]
fn total_loss_ignores_prediction_scale() {
    let (_, s) = scene(4, 3, 32, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pred = s.to_factored().unwrap();
    for v in pred.views.iter_mut() {
        v.depth = noisy_depth(&v.depth, &mut rng);
    }
    let cfg = LossConfig {
        synthetic: true,
        ..Default::default()
    };
    let base = total_loss(&pred, &s, &cfg).unwrap();
    for k in [1e-3, 1e3] {
        let mut scaled = pred.clone();
        for v in scaled.views.iter_mut() {
            v.depth = v.depth.scaled(k).unwrap();
            v.pose = v.pose.with_translation(v.pose.translation() * k);
        }
        scaled.scale = MetricScale::new(pred.scale.value() / k).unwrap();
        let r = total_loss(&scaled, &s, &cfg).unwrap();
        for (a, b) in [
            (r.pointmap, base.pointmap),
            (r.depth, base.depth),
            (r.lpm, base.lpm),
            (r.translation, base.translation),
            (r.normal, base.normal),
            (r.gm, base.gm),
            (r.scale, base.scale),
        ] {
            assert!((a - b).abs() < 1e-9, "k {k}: {a} vs {b}");
        }
    }
}

#[test]
fn rotation_loss_ignores_quaternion_sign() {
    let p = RobustKernelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let mut q = || {
            Quaternion::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize()
        };
        let pred = vec![q(), q()];
        let gt = vec![q(), q()];
        let base = loss_rot(&pred, &gt, &p).unwrap();
        let flipped: Vec<_> = pred.iter().map(|x| -x).collect();
        assert_eq!(loss_rot(&flipped, &gt, &p).unwrap(), base);
        let gflip: Vec<_> = gt.iter().map(|x| -x).collect();
        assert_eq!(loss_rot(&pred, &gflip, &p).unwrap(), base);
    }
}

#[test]
fn pose_round_trip_through_identity_reference() {
    let (_, s) = scene(8, 4, 16, 16);
    assert_eq!(s.views[0].pose, Pose::identity());
}

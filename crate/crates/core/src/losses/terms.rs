//! Individual loss terms. Every "sum over views" is reduced as a mean over
//! the pooled views/pixels, accumulated sequentially in row-major view order.

use nalgebra::Quaternion;

use crate::error::{Error, Result};
use crate::factorization::{f_log, f_log_scalar, NormScale};
use crate::geometry::{DepthAlongRay, MetricScale, PointMap, RayMap, Vec3};
use crate::grid::Grid;
use crate::losses::robust::{robust_kernel, robust_kernel_grad, RobustKernelParams};

const MASK_EPS: f64 = 1e-7;
const UNIT_TOL: f64 = 1e-6;

fn check_views(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{what}: {a} vs {b} views")));
    }
    Ok(())
}

/// Mean of `values` after discarding the `floor(exclude_top · n)` largest.
///
/// Ties are broken by index so the excluded set is deterministic; the kept
/// values are summed in their original order.
pub fn trimmed_mean(values: &[f64], exclude_top: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&exclude_top) {
        return Err(Error::InvalidArgument(format!(
            "exclude_top must lie in [0, 1), got {exclude_top}"
        )));
    }
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("no valid pixels".into()));
    }
    let drop = ((exclude_top * n as f64).floor() as usize).min(n - 1);
    let mut keep = vec![true; n];
    if drop > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        for &i in &order[..drop] {
            keep[i] = false;
        }
    }
    let mut sum = 0.0;
    for (v, k) in values.iter().zip(&keep) {
        if *k {
            sum += v;
        }
    }
    Ok(sum / (n - drop) as f64)
}

pub fn loss_rays(pred: &[RayMap], gt: &[RayMap], p: &RobustKernelParams) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_rays")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in pred.iter().zip(gt) {
        a.directions().check_dims(b.directions(), "loss_rays")?;
        for (x, y) in a.directions().iter().zip(b.directions()) {
            sum += robust_kernel((y - x).norm(), p);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("loss_rays: no pixels".into()));
    }
    Ok(sum / count as f64)
}

/// Chord distance modulo the quaternion double cover.
pub fn quat_residual(pred: &Quaternion<f64>, gt: &Quaternion<f64>) -> f64 {
    let plus = (gt.coords - pred.coords).norm();
    let minus = (gt.coords + pred.coords).norm();
    plus.min(minus)
}

pub fn loss_rot(
    pred: &[Quaternion<f64>],
    gt: &[Quaternion<f64>],
    p: &RobustKernelParams,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_rot")?;
    if pred.is_empty() {
        return Err(Error::Empty("loss_rot: no views".into()));
    }
    let mut sum = 0.0;
    for (a, b) in pred.iter().zip(gt) {
        for q in [a, b] {
            if (q.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidRotation(format!(
                    "quaternion norm {}",
                    q.norm()
                )));
            }
        }
        sum += robust_kernel(quat_residual(a, b), p);
    }
    Ok(sum / pred.len() as f64)
}

pub fn loss_translation(
    pred: &[Vec3],
    gt: &[Vec3],
    z_pred: NormScale,
    z_gt: NormScale,
    p: &RobustKernelParams,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_translation")?;
    if pred.is_empty() {
        return Err(Error::Empty("loss_translation: no views".into()));
    }
    let mut sum = 0.0;
    for (a, b) in pred.iter().zip(gt) {
        sum += robust_kernel((b / z_gt.value() - a / z_pred.value()).norm(), p);
    }
    Ok(sum / pred.len() as f64)
}

/// Robust kernel of the log-space ray-depth residual on ground-truth-valid
/// pixels, with the top `exclude_top` fraction pooled across views removed.
pub fn loss_depth(
    pred: &[DepthAlongRay],
    gt: &[DepthAlongRay],
    z_pred: NormScale,
    z_gt: NormScale,
    exclude_top: f64,
    p: &RobustKernelParams,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_depth")?;
    let mut values = Vec::new();
    for (a, b) in pred.iter().zip(gt) {
        a.values().check_dims(b.values(), "loss_depth")?;
        for ((dp, dg), ok) in a.values().iter().zip(b.values()).zip(b.validity()) {
            if *ok {
                let r = f_log_scalar(dg / z_gt.value()) - f_log_scalar(dp / z_pred.value());
                values.push(robust_kernel(r.abs(), p));
            }
        }
    }
    trimmed_mean(&values, exclude_top)
}

pub fn loss_local_pointmap(
    pred: &[PointMap],
    gt: &[PointMap],
    z_pred: NormScale,
    z_gt: NormScale,
    exclude_top: f64,
    p: &RobustKernelParams,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_local_pointmap")?;
    let mut values = Vec::new();
    for (a, b) in pred.iter().zip(gt) {
        a.points().check_dims(b.points(), "loss_local_pointmap")?;
        for ((xp, xg), ok) in a.points().iter().zip(b.points()).zip(b.validity()) {
            if *ok {
                values.push(robust_kernel(log_space_residual(xp, xg, z_pred, z_gt), p));
            }
        }
    }
    trimmed_mean(&values, exclude_top)
}

#[inline]
fn log_space_residual(pred: &Vec3, gt: &Vec3, z_pred: NormScale, z_gt: NormScale) -> f64 {
    (f_log(&(gt / z_gt.value())) - f_log(&(pred / z_pred.value()))).norm()
}

/// Mean over valid pixels of `C·ρ(r) − α_conf·ln C`; no outlier exclusion.
pub fn loss_pointmap_conf(
    pred: &[PointMap],
    gt: &[PointMap],
    conf: &[Grid<f64>],
    z_pred: NormScale,
    z_gt: NormScale,
    alpha_conf: f64,
    p: &RobustKernelParams,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_pointmap_conf")?;
    check_views(conf.len(), gt.len(), "loss_pointmap_conf confidence")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((a, b), c) in pred.iter().zip(gt).zip(conf) {
        a.points().check_dims(b.points(), "loss_pointmap_conf")?;
        c.check_dims(b.points(), "loss_pointmap_conf confidence")?;
        for (((xp, xg), ok), ci) in a
            .points()
            .iter()
            .zip(b.points())
            .zip(b.validity())
            .zip(c.iter())
        {
            if !*ok {
                continue;
            }
            if !(ci.is_finite() && *ci >= 1.0) {
                return Err(Error::InvalidArgument(format!("confidence {ci} < 1")));
            }
            let k = robust_kernel(log_space_residual(xp, xg, z_pred, z_gt), p);
            sum += ci * k - alpha_conf * ci.ln();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("loss_pointmap_conf: no valid pixels".into()));
    }
    Ok(sum / count as f64)
}

/// `ρ(|ln(1+ẑ) − ln(1+m·z̃)|)`.
pub fn loss_scale(
    z_gt: NormScale,
    m: MetricScale,
    z_pred: NormScale,
    p: &RobustKernelParams,
) -> f64 {
    let diff = z_gt.value().ln_1p() - (m.value() * z_pred.value()).ln_1p();
    robust_kernel(diff.abs(), p)
}

/// Analytic gradients of [`loss_scale`]. `z_pred` is stop-gradient, so
/// nothing flows into the geometry predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleLossGrad {
    pub d_metric_scale: f64,
    pub d_pred_norm_scale: f64,
}

pub fn loss_scale_grad(
    z_gt: NormScale,
    m: MetricScale,
    z_pred: NormScale,
    p: &RobustKernelParams,
) -> ScaleLossGrad {
    let zbar = m.value() * z_pred.value();
    let diff = z_gt.value().ln_1p() - zbar.ln_1p();
    // d|diff|/dm = -sign(diff) · z̃ / (1 + m z̃)
    let d_abs = -diff.signum() * z_pred.value() / (1.0 + zbar);
    ScaleLossGrad {
        d_metric_scale: robust_kernel_grad(diff.abs(), p) * d_abs,
        d_pred_norm_scale: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalLoss {
    pub value: f64,
    /// Pixels with a fully valid 2×2 neighborhood and non-degenerate normals.
    pub pixels: usize,
}

impl NormalLoss {
    pub fn is_empty(&self) -> bool {
        self.pixels == 0
    }
}

fn pixel_normal(pm: &PointMap, u: usize, v: usize) -> Option<Vec3> {
    let valid = pm.validity();
    if !(*valid.get(u, v)
        && *valid.get(u + 1, v)
        && *valid.get(u, v + 1)
        && *valid.get(u + 1, v + 1))
    {
        return None;
    }
    let p = pm.points().get(u, v);
    let n = (pm.points().get(u + 1, v) - p).cross(&(pm.points().get(u, v + 1) - p));
    let len = n.norm();
    (len > 1e-300 && len.is_finite()).then(|| n / len)
}

/// Mean `1 − cos` between forward-difference normals of predicted and
/// ground-truth local pointmaps. Pixels lacking a valid 2×2 neighborhood in
/// either map are skipped; an empty support yields value 0.
pub fn loss_normal(pred: &[PointMap], gt: &[PointMap]) -> Result<NormalLoss> {
    check_views(pred.len(), gt.len(), "loss_normal")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (a, b) in pred.iter().zip(gt) {
        a.points().check_dims(b.points(), "loss_normal")?;
        if a.width() < 2 || a.height() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "loss_normal needs at least 2x2 pixels, got {}x{}",
                a.width(),
                a.height()
            )));
        }
        for v in 0..a.height() - 1 {
            for u in 0..a.width() - 1 {
                if let (Some(np), Some(ng)) = (pixel_normal(a, u, v), pixel_normal(b, u, v)) {
                    sum += 1.0 - np.dot(&ng);
                    count += 1;
                }
            }
        }
    }
    Ok(NormalLoss {
        value: if count == 0 { 0.0 } else { sum / count as f64 },
        pixels: count,
    })
}

/// Average-pool over valid children by a factor of two.
fn pool_half(values: &Grid<f64>, valid: &Grid<bool>) -> (Grid<f64>, Grid<bool>) {
    let w = values.width().div_ceil(2);
    let h = values.height().div_ceil(2);
    let mut out = Grid::filled(w, h, 0.0);
    let mut ok = Grid::filled(w, h, false);
    for v in 0..h {
        for u in 0..w {
            let mut s = 0.0;
            let mut c = 0usize;
            for dv in 0..2 {
                for du in 0..2 {
                    let (x, y) = (2 * u + du, 2 * v + dv);
                    if x < values.width() && y < values.height() && *valid.get(x, y) {
                        s += values.get(x, y);
                        c += 1;
                    }
                }
            }
            if c > 0 {
                *out.get_mut(u, v) = s / c as f64;
                *ok.get_mut(u, v) = true;
            }
        }
    }
    (out, ok)
}

/// `mean|∂x d| + mean|∂y d|` over valid forward-difference pairs.
fn gradient_magnitude(d: &Grid<f64>, valid: &Grid<bool>) -> f64 {
    let (w, h) = d.dims();
    let (mut sx, mut cx, mut sy, mut cy) = (0.0, 0usize, 0.0, 0usize);
    for v in 0..h {
        for u in 0..w {
            if !*valid.get(u, v) {
                continue;
            }
            if u + 1 < w && *valid.get(u + 1, v) {
                sx += (d.get(u + 1, v) - d.get(u, v)).abs();
                cx += 1;
            }
            if v + 1 < h && *valid.get(u, v + 1) {
                sy += (d.get(u, v + 1) - d.get(u, v)).abs();
                cy += 1;
            }
        }
    }
    let mx = if cx > 0 { sx / cx as f64 } else { 0.0 };
    let my = if cy > 0 { sy / cy as f64 } else { 0.0 };
    mx + my
}

/// Multi-scale gradient matching on the log z-depth difference, summed over
/// `n_scales` factor-2 pyramid levels (level 0 is full resolution) and
/// averaged over views. Pixels count as valid when flagged and both depths
/// are positive.
pub fn loss_gradient_matching(
    pred: &[Grid<f64>],
    gt: &[Grid<f64>],
    validity: &[Grid<bool>],
    n_scales: usize,
) -> Result<f64> {
    check_views(pred.len(), gt.len(), "loss_gradient_matching")?;
    check_views(validity.len(), gt.len(), "loss_gradient_matching validity")?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ((zp, zg), ok) in pred.iter().zip(gt).zip(validity) {
        zp.check_dims(zg, "loss_gradient_matching")?;
        zp.check_dims(ok, "loss_gradient_matching validity")?;
        let mut valid = Grid::filled(zp.width(), zp.height(), false);
        let mut d = Grid::filled(zp.width(), zp.height(), 0.0);
        for i in 0..zp.len() {
            let (a, b) = (zp.as_slice()[i], zg.as_slice()[i]);
            if ok.as_slice()[i] && a > 0.0 && b > 0.0 {
                valid.as_mut_slice()[i] = true;
                d.as_mut_slice()[i] = a.ln() - b.ln();
            }
        }
        for level in 0..n_scales {
            if level > 0 {
                (d, valid) = pool_half(&d, &valid);
            }
            total += gradient_magnitude(&d, &valid);
        }
    }
    Ok(total / pred.len() as f64)
}

/// Mean binary cross entropy with predictions clamped to `[1e-7, 1 − 1e-7]`.
pub fn loss_mask(pred_prob: &[Grid<f64>], gt: &[Grid<bool>]) -> Result<f64> {
    check_views(pred_prob.len(), gt.len(), "loss_mask")?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in pred_prob.iter().zip(gt) {
        p.check_dims(g, "loss_mask")?;
        for (pi, gi) in p.iter().zip(g) {
            if !pi.is_finite() {
                return Err(Error::InvalidArgument(format!("mask probability {pi}")));
            }
            let q = pi.clamp(MASK_EPS, 1.0 - MASK_EPS);
            sum -= if *gi { q.ln() } else { (1.0 - q).ln() };
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("loss_mask: no pixels".into()));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const P: RobustKernelParams = RobustKernelParams {
        alpha: 0.5,
        c: 0.05,
    };

    fn ns(v: f64) -> NormScale {
        NormScale::new(v).unwrap()
    }

    fn row_depth(values: Vec<f64>) -> DepthAlongRay {
        let n = values.len();
        DepthAlongRay::dense(Grid::from_vec(n, 1, values).unwrap()).unwrap()
    }

    fn row_points(points: Vec<Vec3>) -> PointMap {
        let n = points.len();
        PointMap::new(
            Grid::from_vec(n, 1, points).unwrap(),
            Grid::filled(n, 1, true),
        )
        .unwrap()
    }

    #[test]
    fn trimmed_mean_drops_floor_fraction() {
        let mut v = vec![0.0; 95];
        v.extend([1e9; 5]);
        assert_eq!(trimmed_mean(&v, 0.05).unwrap(), 0.0);
        assert_eq!(trimmed_mean(&[1.0, 2.0, 3.0], 0.05).unwrap(), 2.0);
        assert!(trimmed_mean(&[], 0.05).is_err());
        assert!(trimmed_mean(&[1.0], 1.0).is_err());
    }

    #[test]
    fn rays_loss_cases() {
        let a = RayMap::new(Grid::filled(2, 2, Vec3::z())).unwrap();
        assert_eq!(loss_rays(&[a.clone()], &[a.clone()], &P).unwrap(), 0.0);

        let t = Vec3::new(0.6, 0.0, 0.8);
        let b = RayMap::new(Grid::filled(1, 1, t)).unwrap();
        let z = RayMap::new(Grid::filled(1, 1, Vec3::z())).unwrap();
        let r = (t - Vec3::z()).norm();
        assert_eq!(
            loss_rays(&[b.clone()], &[z.clone()], &P).unwrap(),
            robust_kernel(r, &P)
        );
        assert_eq!(
            loss_rays(&[b.clone(), b], &[z.clone(), z], &P).unwrap(),
            robust_kernel(r, &P)
        );
    }

    #[test]
    fn rot_loss_cases() {
        let q = Quaternion::new(0.5, 0.5, -0.5, 0.5);
        assert_eq!(loss_rot(&[q], &[q], &P).unwrap(), 0.0);
        assert_eq!(loss_rot(&[-q], &[q], &P).unwrap(), 0.0);
        let id = Quaternion::identity();
        let zq = Quaternion::new(0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(quat_residual(&zq, &id), 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(
            loss_rot(&[zq], &[id], &P).unwrap(),
            robust_kernel(2f64.sqrt(), &P)
        );
        assert!(loss_rot(&[q * 2.0], &[q], &P).is_err());
    }

    #[test]
    fn translation_loss_cases() {
        let gt = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, -1.0)];
        let k = 3.7;
        let pred: Vec<_> = gt.iter().map(|t| t * k).collect();
        assert_abs_diff_eq!(
            loss_translation(&pred, &gt, ns(1.3 * k), ns(1.3), &P).unwrap(),
            0.0,
            epsilon = 1e-12
        );

        let v = loss_translation(&[Vec3::zeros()], &[Vec3::x()], ns(1.0), ns(1.0), &P).unwrap();
        assert_eq!(v, robust_kernel(1.0, &P));

        let pred = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-1.0, 0.5, 0.0)];
        let a = loss_translation(&pred, &gt, ns(1.0), ns(2.0), &P).unwrap();
        let (mut pr, mut gr) = (pred.clone(), gt.clone());
        pr.reverse();
        gr.reverse();
        let b = loss_translation(&pr, &gr, ns(1.0), ns(2.0), &P).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        assert!(a > 0.0);
    }

    #[test]
    fn depth_loss_cases() {
        let gt = row_depth((1..=10).map(f64::from).collect());
        assert_eq!(
            loss_depth(&[gt.clone()], &[gt.clone()], ns(2.0), ns(2.0), 0.05, &P).unwrap(),
            0.0
        );

        let pred = row_depth((1..=10).map(|i| 0.8 * i as f64 + 0.3).collect());
        let base = loss_depth(&[pred.clone()], &[gt.clone()], ns(1.5), ns(2.0), 0.05, &P).unwrap();
        let k = 42.0;
        let scaled = loss_depth(
            &[pred.scaled(k).unwrap()],
            &[gt.clone()],
            ns(1.5 * k),
            ns(2.0),
            0.05,
            &P,
        )
        .unwrap();
        assert_abs_diff_eq!(base, scaled, epsilon = 1e-12);
    }

    #[test]
    fn depth_loss_excludes_five_percent_outliers() {
        let gt = row_depth(vec![1.0; 100]);
        let mut vals = vec![1.0; 100];
        for v in vals.iter_mut().take(5) {
            *v = 1e6;
        }
        let pred = row_depth(vals);
        assert_eq!(
            loss_depth(&[pred], &[gt], ns(1.0), ns(1.0), 0.05, &P).unwrap(),
            0.0
        );
    }

    #[test]
    fn lpm_single_point() {
        let gt = row_points(vec![Vec3::new(std::f64::consts::E - 1.0, 0.0, 0.0)]);
        let pred = row_points(vec![Vec3::zeros()]);
        let v = loss_local_pointmap(&[pred], &[gt], ns(1.0), ns(1.0), 0.05, &P).unwrap();
        assert_abs_diff_eq!(v, robust_kernel(1.0, &P), epsilon = 1e-12);
    }

    #[test]
    fn pointmap_conf_cases() {
        let gt = row_points(vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.5, 2.0)]);
        let one = Grid::filled(2, 1, 1.0);
        assert_eq!(
            loss_pointmap_conf(
                &[gt.clone()],
                &[gt.clone()],
                &[one.clone()],
                ns(1.0),
                ns(1.0),
                0.2,
                &P
            )
            .unwrap(),
            0.0
        );
        let pred = row_points(vec![Vec3::new(1.1, 2.0, 3.0), Vec3::new(-1.0, 0.0, 2.0)]);
        let with_unit = loss_pointmap_conf(
            &[pred.clone()],
            &[gt.clone()],
            &[one],
            ns(1.0),
            ns(1.0),
            0.2,
            &P,
        )
        .unwrap();
        let plain =
            loss_local_pointmap(&[pred.clone()], &[gt.clone()], ns(1.0), ns(1.0), 0.0, &P).unwrap();
        assert_abs_diff_eq!(with_unit, plain, epsilon = 1e-15);

        let bad = Grid::filled(2, 1, 0.5);
        assert!(loss_pointmap_conf(&[pred], &[gt], &[bad], ns(1.0), ns(1.0), 0.2, &P).is_err());
    }

    #[test]
    fn pointmap_conf_stationary_point() {
        // C·k − α·ln C is minimized at C* = α / k.
        let gt = row_points(vec![Vec3::new(0.0, 0.0, 1.0)]);
        let pred = row_points(vec![Vec3::new(0.0, 0.0, 1.002)]);
        let k = robust_kernel(
            (f_log(&Vec3::new(0.0, 0.0, 1.0)) - f_log(&Vec3::new(0.0, 0.0, 1.002))).norm(),
            &P,
        );
        let alpha = 0.2;
        let c_star = alpha / k;
        assert!(c_star >= 1.0);
        let eval = |c: f64| {
            loss_pointmap_conf(
                &[pred.clone()],
                &[gt.clone()],
                &[Grid::filled(1, 1, c)],
                ns(1.0),
                ns(1.0),
                alpha,
                &P,
            )
            .unwrap()
        };
        let at = eval(c_star);
        assert!(at < eval(c_star * 1.01));
        assert!(at < eval(c_star * 0.99));
    }

    #[test]
    fn scale_loss_cases() {
        let m = MetricScale::new(2.0).unwrap();
        assert_eq!(loss_scale(ns(3.0), m, ns(1.5), &P), 0.0);
        // m·z̃ → 0 limit: ln(1 + e − 1) = 1.
        let tiny = MetricScale::new(1e-300).unwrap();
        assert_abs_diff_eq!(
            loss_scale(ns(std::f64::consts::E - 1.0), tiny, ns(1.0), &P),
            robust_kernel(1.0, &P),
            epsilon = 1e-12
        );
        assert_eq!(
            loss_scale_grad(ns(3.0), m, ns(1.0), &P).d_pred_norm_scale,
            0.0
        );
    }

    #[test]
    fn normal_loss_cases() {
        let plane = |f: &dyn Fn(f64, f64) -> Vec3| {
            PointMap::new(
                Grid::from_fn(4, 4, |u, v| f(u as f64, v as f64)),
                Grid::filled(4, 4, true),
            )
            .unwrap()
        };
        let xy = plane(&|u, v| Vec3::new(u, v, 5.0));
        let xz = plane(&|u, v| Vec3::new(u, 1.0, 5.0 + v));
        let r = loss_normal(&[xy.clone()], &[xy.clone()]).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.pixels, 9);
        assert_abs_diff_eq!(
            loss_normal(&[xz], &[xy.clone()]).unwrap().value,
            1.0,
            epsilon = 1e-12
        );

        let bumpy = plane(&|u, v| Vec3::new(u, v, 5.0 + 0.3 * (u * v).sin()));
        let shifted = plane(&|u, v| Vec3::new(u + 2.0, v - 1.0, 8.0 + 0.3 * (u * v).sin()));
        let a = loss_normal(&[bumpy.clone()], &[xy.clone()]).unwrap().value;
        let b = loss_normal(&[shifted], &[xy]).unwrap().value;
        assert!(a > 0.0);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);

        let none = PointMap::new(Grid::filled(3, 3, Vec3::z()), Grid::filled(3, 3, false)).unwrap();
        assert!(loss_normal(&[none.clone()], &[none]).unwrap().is_empty());
    }

    #[test]
    fn gradient_matching_cases() {
        let gt = Grid::from_fn(8, 6, |u, v| 1.0 + 0.2 * u as f64 + 0.05 * (v * v) as f64);
        let ok = Grid::filled(8, 6, true);
        assert_eq!(
            loss_gradient_matching(&[gt.clone()], &[gt.clone()], &[ok.clone()], 4).unwrap(),
            0.0
        );
        let scaled = gt.map(|z| 3.3 * z);
        assert_abs_diff_eq!(
            loss_gradient_matching(&[scaled], &[gt.clone()], &[ok.clone()], 4).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        // log-space ramp of slope s along x.
        let s = 0.07;
        let ramp = Grid::from_fn(8, 6, |u, v| gt.get(u, v) * (s * u as f64).exp());
        assert_abs_diff_eq!(
            loss_gradient_matching(&[ramp], &[gt], &[ok], 1).unwrap(),
            s,
            epsilon = 1e-12
        );
    }

    #[test]
    fn mask_loss_cases() {
        let g = Grid::from_vec(2, 2, vec![true, false, true, true]).unwrap();
        let exact = g.map(|b| if *b { 1.0 } else { 0.0 });
        assert!(loss_mask(&[exact], &[g.clone()]).unwrap() <= 1e-6);
        let half = Grid::filled(2, 2, 0.5);
        assert_abs_diff_eq!(
            loss_mask(&[half], &[g]).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );
    }
}

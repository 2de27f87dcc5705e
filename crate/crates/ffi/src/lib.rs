//! C ABI over `mapfactor`.
//!
//! Every function returns an [`MfStatus`]. On failure a message describing
//! the error is available from [`mf_last_error_message`] on the calling
//! thread until the next call into the library. Scenes are opaque
//! [`MfScene`] handles released with [`mf_scene_free`]. Panics never cross
//! the boundary; they surface as `MF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mapfactor::geometry::FactoredScene;
use mapfactor::io;
use mapfactor::losses::{
    robust_kernel, robust_kernel_grad, total_loss, LossConfig, RobustKernelParams,
};
use mapfactor::metrics::{evaluate_scene, EvalConfig};
use mapfactor::synth::{gen_scene, SceneSample, SynthParams};
use mapfactor::viewgraph::{build_adjacency, covisibility, random_walk_sample, CovisGraph};
use mapfactor::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Degenerate = 4,
    InsufficientComponent = 5,
    NumericOverflow = 6,
    RetryExhausted = 7,
    Io = 8,
    Format = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Opaque ground-truth scene handle.
pub struct MfScene {
    sample: SceneSample,
}

/// Loss terms and the weighted total, in report order.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfLossReport {
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

/// Benchmark metrics; undefined values (too few views) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MfMetricReport {
    pub depth_rel: f64,
    pub depth_tau: f64,
    pub points_rel: f64,
    pub points_tau: f64,
    pub ate_rmse: f64,
    pub pose_auc5: f64,
    pub pose_rra_deg: f64,
    pub pose_rta_deg: f64,
    pub ray_err_deg: f64,
    pub scale_rel: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: MfStatus,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.category() {
            "shape-mismatch" => MfStatus::ShapeMismatch,
            "degenerate" | "rank-deficient" => MfStatus::Degenerate,
            "insufficient-component" => MfStatus::InsufficientComponent,
            "numeric-overflow" => MfStatus::NumericOverflow,
            "retry-exhausted" => MfStatus::RetryExhausted,
            "io" => MfStatus::Io,
            "format" | "json" => MfStatus::Format,
            _ => MfStatus::InvalidArgument,
        };
        Failure {
            status,
            msg: format!("{}: {e}", e.category()),
        }
    }
}

fn failure(status: MfStatus, msg: impl Into<String>) -> Failure {
    Failure {
        status,
        msg: msg.into(),
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> MfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MfStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(fail.msg);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| failure(MfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| failure(MfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_slice<'a, T>(
    p: *mut T,
    len: usize,
    needed: usize,
    name: &str,
) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(failure(MfStatus::NullPointer, format!("{name} is null")));
    }
    if len < needed {
        return Err(failure(
            MfStatus::BufferTooSmall,
            format!("{name} holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(failure(MfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| failure(MfStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn robust_params(alpha: f64, c: f64) -> Result<RobustKernelParams, Failure> {
    Ok(RobustKernelParams::new(alpha, c)?)
}

/// Message for the most recent failure on this thread, or NULL after a
/// successful call. The pointer stays valid until the next library call on
/// the same thread.
#[no_mangle]
pub extern "C" fn mf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates an analytic scene with unit metric scale and a ground plane.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle owned by
/// the caller.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_synth(
    seed: u64,
    n_views: usize,
    width: usize,
    height: usize,
    n_spheres: usize,
    out: *mut *mut MfScene,
) -> MfStatus {
    run(|| {
        let out = out_ref(out, "out")?;
        let params = SynthParams {
            n_views,
            width,
            height,
            n_spheres,
            seed,
            ..Default::default()
        };
        let (_, sample) = gen_scene(&params)?;
        *out = Box::into_raw(Box::new(MfScene { sample }));
        Ok(())
    })
}

/// # Safety
/// `dir` must be a NUL-terminated path; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_load(dir: *const c_char, out: *mut *mut MfScene) -> MfStatus {
    run(|| {
        let dir = path_arg(dir, "dir")?;
        let out = out_ref(out, "out")?;
        let sample = io::read_sample(&dir)?;
        *out = Box::into_raw(Box::new(MfScene { sample }));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_save(scene: *const MfScene, dir: *const c_char) -> MfStatus {
    run(|| {
        let scene = deref(scene, "scene")?;
        let dir = path_arg(dir, "dir")?;
        Ok(io::write_sample(&dir, &scene.sample)?)
    })
}

/// Releases a scene. NULL is accepted.
///
/// # Safety
/// `scene` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_free(scene: *mut MfScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_view_count(scene: *const MfScene, out: *mut usize) -> MfStatus {
    run(|| {
        *out_ref(out, "out")? = deref(scene, "scene")?.sample.n_views();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_view_size(
    scene: *const MfScene,
    view: usize,
    width: *mut usize,
    height: *mut usize,
) -> MfStatus {
    run(|| {
        let s = &deref(scene, "scene")?.sample;
        let v = s.views.get(view).ok_or_else(|| {
            failure(
                MfStatus::InvalidArgument,
                format!("view {view} of {}", s.n_views()),
            )
        })?;
        *out_ref(width, "width")? = v.width();
        *out_ref(height, "height")? = v.height();
        Ok(())
    })
}

/// Metric world points of one view, row-major `x, y, z` per pixel
/// (`3·width·height` doubles); invalid pixels are zero. `validity`, if not
/// NULL, receives `width·height` flags.
///
/// # Safety
/// Buffers must hold at least the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn mf_scene_world_points(
    scene: *const MfScene,
    view: usize,
    xyz: *mut f64,
    xyz_len: usize,
    validity: *mut u8,
    validity_len: usize,
) -> MfStatus {
    run(|| {
        let s = &deref(scene, "scene")?.sample;
        if view >= s.n_views() {
            return Err(failure(
                MfStatus::InvalidArgument,
                format!("view {view} of {}", s.n_views()),
            ));
        }
        let f = s.to_factored()?;
        let map =
            mapfactor::geometry::metric_upgrade(&f.views[view].world_points()?, s.metric_scale);
        let n = map.points().len();
        let out = out_slice(xyz, xyz_len, 3 * n, "xyz")?;
        for (o, p) in out.chunks_exact_mut(3).zip(map.points()) {
            o.copy_from_slice(p.as_slice());
        }
        if !validity.is_null() {
            let out = out_slice(validity, validity_len, n, "validity")?;
            for (o, ok) in out.iter_mut().zip(map.validity()) {
                *o = u8::from(*ok);
            }
        }
        Ok(())
    })
}

/// Row-major `n × n` covisibility fractions.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mf_covisibility(
    scene: *const MfScene,
    rel_depth_tol: f64,
    out: *mut f64,
    out_len: usize,
) -> MfStatus {
    run(|| {
        let s = &deref(scene, "scene")?.sample;
        let g = covisibility(s, rel_depth_tol)?;
        let out = out_slice(out, out_len, g.n * g.n, "out")?;
        for (o, v) in out.iter_mut().zip(g.fraction.iter().flatten()) {
            *o = *v;
        }
        Ok(())
    })
}

/// Samples `n_views` connected views from a row-major `n × n` covisibility
/// matrix.
///
/// # Safety
/// `fraction` must hold `n·n` doubles and `out` at least `out_len` entries.
#[no_mangle]
pub unsafe extern "C" fn mf_random_walk_sample(
    fraction: *const f64,
    n: usize,
    threshold: f64,
    n_views: usize,
    seed: u64,
    out: *mut usize,
    out_len: usize,
) -> MfStatus {
    run(|| {
        if fraction.is_null() {
            return Err(failure(MfStatus::NullPointer, "fraction is null"));
        }
        let flat = std::slice::from_raw_parts(fraction, n * n);
        let rows = flat.chunks(n.max(1)).take(n).map(<[f64]>::to_vec).collect();
        let g = CovisGraph::new(rows)?;
        let picked = random_walk_sample(&build_adjacency(&g, threshold), n_views, seed)?;
        out_slice(out, out_len, picked.len(), "out")?.copy_from_slice(&picked);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_robust_kernel(x: f64, alpha: f64, c: f64, out: *mut f64) -> MfStatus {
    run(|| {
        let p = robust_params(alpha, c)?;
        *out_ref(out, "out")? = robust_kernel(x, &p);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_robust_kernel_grad(
    x: f64,
    alpha: f64,
    c: f64,
    out: *mut f64,
) -> MfStatus {
    run(|| {
        let p = robust_params(alpha, c)?;
        *out_ref(out, "out")? = robust_kernel_grad(x, &p);
        Ok(())
    })
}

fn as_prediction(s: &SceneSample) -> Result<FactoredScene, Failure> {
    Ok(s.to_factored()?)
}

/// Total training loss of `pred` (used with unit confidence and its hard
/// mask) against `gt`, with default weights.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_total_loss(
    pred: *const MfScene,
    gt: *const MfScene,
    synthetic: bool,
    out: *mut MfLossReport,
) -> MfStatus {
    run(|| {
        let p = as_prediction(&deref(pred, "pred")?.sample)?;
        let g = &deref(gt, "gt")?.sample;
        let r = total_loss(
            &p,
            g,
            &LossConfig {
                synthetic,
                ..Default::default()
            },
        )?;
        *out_ref(out, "out")? = MfLossReport {
            pointmap: r.pointmap,
            rays: r.rays,
            rot: r.rot,
            translation: r.translation,
            depth: r.depth,
            lpm: r.lpm,
            scale: r.scale,
            normal: r.normal,
            gm: r.gm,
            mask: r.mask,
            total: r.total,
        };
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mf_evaluate(
    pred: *const MfScene,
    gt: *const MfScene,
    align_points: bool,
    out: *mut MfMetricReport,
) -> MfStatus {
    run(|| {
        let p = as_prediction(&deref(pred, "pred")?.sample)?;
        let g = &deref(gt, "gt")?.sample;
        let r = evaluate_scene(
            &p,
            g,
            &EvalConfig {
                align_points,
                ..Default::default()
            },
        )?;
        *out_ref(out, "out")? = MfMetricReport {
            depth_rel: r.depth_rel,
            depth_tau: r.depth_tau,
            points_rel: r.points_rel,
            points_tau: r.points_tau,
            ate_rmse: r.ate_rmse.unwrap_or(f64::NAN),
            pose_auc5: r.pose_auc5.unwrap_or(f64::NAN),
            pose_rra_deg: r.pose_rra_deg.unwrap_or(f64::NAN),
            pose_rta_deg: r.pose_rta_deg.unwrap_or(f64::NAN),
            ray_err_deg: r.ray_err_deg,
            scale_rel: r.scale_rel,
        };
        Ok(())
    })
}

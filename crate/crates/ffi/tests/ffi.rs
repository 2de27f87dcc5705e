use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mapfactor_ffi::*;

fn last_error() -> String {
    let p = mf_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn synth(seed: u64, n: usize) -> *mut MfScene {
    let mut s = ptr::null_mut();
    let st = unsafe { mf_scene_synth(seed, n, 32, 24, 3, &mut s) };
    assert_eq!(st, MfStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn scene_lifecycle_and_queries() {
    let s = synth(1, 3);
    let mut n = 0usize;
    assert_eq!(unsafe { mf_scene_view_count(s, &mut n) }, MfStatus::Ok);
    assert_eq!(n, 3);
    let (mut w, mut h) = (0usize, 0usize);
    assert_eq!(
        unsafe { mf_scene_view_size(s, 2, &mut w, &mut h) },
        MfStatus::Ok
    );
    assert_eq!((w, h), (32, 24));
    assert_eq!(
        unsafe { mf_scene_view_size(s, 3, &mut w, &mut h) },
        MfStatus::InvalidArgument
    );
    assert!(last_error().contains("view 3"));

    let mut xyz = vec![0.0; 3 * 32 * 24];
    let mut valid = vec![0u8; 32 * 24];
    let st = unsafe {
        mf_scene_world_points(
            s,
            0,
            xyz.as_mut_ptr(),
            xyz.len(),
            valid.as_mut_ptr(),
            valid.len(),
        )
    };
    assert_eq!(st, MfStatus::Ok);
    assert!(mf_last_error_message().is_null());
    assert!(valid.contains(&1));
    for (p, ok) in xyz.chunks(3).zip(&valid) {
        assert_eq!(*ok == 0, p == [0.0, 0.0, 0.0]);
    }
    let st = unsafe { mf_scene_world_points(s, 0, xyz.as_mut_ptr(), 10, ptr::null_mut(), 0) };
    assert_eq!(st, MfStatus::BufferTooSmall);
    unsafe { mf_scene_free(s) };
    unsafe { mf_scene_free(ptr::null_mut()) };
}

#[test]
fn null_pointers_are_reported() {
    assert_eq!(
        unsafe { mf_scene_synth(0, 2, 16, 16, 2, ptr::null_mut()) },
        MfStatus::NullPointer
    );
    assert!(last_error().contains("out"));
    let mut n = 0usize;
    assert_eq!(
        unsafe { mf_scene_view_count(ptr::null(), &mut n) },
        MfStatus::NullPointer
    );
    assert_eq!(
        unsafe { mf_scene_load(ptr::null(), ptr::null_mut()) },
        MfStatus::NullPointer
    );
}

#[test]
fn invalid_arguments_map_to_status() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { mf_scene_synth(0, 0, 16, 16, 2, &mut s) },
        MfStatus::InvalidArgument
    );
    let mut v = 0.0;
    assert_eq!(
        unsafe { mf_robust_kernel(1.0, 0.5, -1.0, &mut v) },
        MfStatus::InvalidArgument
    );
    let missing = CString::new("/nonexistent/scene/dir").unwrap();
    assert_eq!(
        unsafe { mf_scene_load(missing.as_ptr(), &mut s) },
        MfStatus::Io
    );
    assert!(last_error().starts_with("io:"));
}

#[test]
fn kernel_matches_library() {
    let p = mapfactor::losses::RobustKernelParams::default();
    for x in [-0.3, 0.0, 0.05, 2.0] {
        let (mut v, mut g) = (0.0, 0.0);
        assert_eq!(
            unsafe { mf_robust_kernel(x, 0.5, 0.05, &mut v) },
            MfStatus::Ok
        );
        assert_eq!(
            unsafe { mf_robust_kernel_grad(x, 0.5, 0.05, &mut g) },
            MfStatus::Ok
        );
        assert_eq!(v, mapfactor::losses::robust_kernel(x, &p));
        assert_eq!(g, mapfactor::losses::robust_kernel_grad(x, &p));
    }
}

#[test]
fn covisibility_sampling_loss_and_eval() {
    let s = synth(4, 4);
    let mut m = vec![0.0; 16];
    assert_eq!(
        unsafe { mf_covisibility(s, 0.05, m.as_mut_ptr(), m.len()) },
        MfStatus::Ok
    );
    for i in 0..4 {
        assert_eq!(m[i * 4 + i], 1.0);
    }
    let mut picked = vec![usize::MAX; 1];
    assert_eq!(
        unsafe { mf_random_walk_sample(m.as_ptr(), 4, 0.25, 1, 9, picked.as_mut_ptr(), 1) },
        MfStatus::Ok
    );
    assert!(picked[0] < 4);
    let mut too_many = vec![0usize; 8];
    let st = unsafe { mf_random_walk_sample(m.as_ptr(), 4, 0.25, 8, 9, too_many.as_mut_ptr(), 8) };
    assert_eq!(st, MfStatus::InsufficientComponent);

    let mut loss = MfLossReport::default();
    assert_eq!(
        unsafe { mf_total_loss(s, s, true, &mut loss) },
        MfStatus::Ok
    );
    assert!(loss.total.abs() < 1e-6, "{loss:?}");
    let mut rep = MfMetricReport::default();
    assert_eq!(unsafe { mf_evaluate(s, s, false, &mut rep) }, MfStatus::Ok);
    assert_eq!(rep.depth_rel, 0.0);
    assert_eq!(rep.depth_tau, 1.0);
    assert!(rep.ate_rmse < 1e-9);

    let other = synth(5, 3);
    assert_eq!(
        unsafe { mf_total_loss(other, s, false, &mut loss) },
        MfStatus::ShapeMismatch
    );
    unsafe {
        mf_scene_free(s);
        mf_scene_free(other);
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("scene").to_str().unwrap()).unwrap();
    let s = synth(2, 2);
    assert_eq!(unsafe { mf_scene_save(s, path.as_ptr()) }, MfStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { mf_scene_load(path.as_ptr(), &mut back) },
        MfStatus::Ok
    );
    let mut rep = MfMetricReport::default();
    assert_eq!(
        unsafe { mf_evaluate(back, s, false, &mut rep) },
        MfStatus::Ok
    );
    assert!(rep.depth_rel < 1e-6);
    unsafe {
        mf_scene_free(s);
        mf_scene_free(back);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(mf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/mapfactor.h")
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(header_path()).unwrap();
    for f in [
        "mf_last_error_message",
        "mf_version",
        "mf_scene_synth",
        "mf_scene_load",
        "mf_scene_save",
        "mf_scene_free",
        "mf_scene_view_count",
        "mf_scene_view_size",
        "mf_scene_world_points",
        "mf_covisibility",
        "mf_random_walk_sample",
        "mf_robust_kernel",
        "mf_robust_kernel_grad",
        "mf_total_loss",
        "mf_evaluate",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct MfScene MfScene;"));
}

/// Compiles a C program against the generated header and the static
/// library, then runs it.
#[test]
fn c_program_links_and_runs() {
    let target = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = target.join("libmapfactor_ffi.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "mapfactor.h"
int main(void) {
    MfScene *s = NULL;
    if (mf_scene_synth(3, 2, 16, 16, 2, &s) != MF_STATUS_OK) return 1;
    size_t n = 0;
    if (mf_scene_view_count(s, &n) != MF_STATUS_OK || n != 2) return 2;
    double rho = 0.0;
    if (mf_robust_kernel(0.05, 0.5, 0.05, &rho) != MF_STATUS_OK) return 3;
    MfLossReport r;
    if (mf_total_loss(s, s, true, &r) != MF_STATUS_OK) return 4;
    if (mf_scene_view_count(NULL, &n) != MF_STATUS_NULL_POINTER) return 5;
    if (mf_last_error_message() == NULL) return 6;
    mf_scene_free(s);
    printf("%.17g %.3g\n", rho, r.total);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("prog");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_path().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    let rho: f64 = text.split_whitespace().next().unwrap().parse().unwrap();
    // x = c: 3·((1/1.5 + 1)^(1/4) − 1).
    let want = 3.0 * ((1.0f64 / 1.5 + 1.0).powf(0.25) - 1.0);
    assert!((rho - want).abs() < 1e-15, "{text}");
}

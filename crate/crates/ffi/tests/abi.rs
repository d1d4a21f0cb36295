use std::ffi::{CStr, CString};
use std::ptr;

use gibbs_tree_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn kernel(name: &str, n: usize) -> *mut GtKernel {
    let mut k = ptr::null_mut();
    let st = gt_kernel_new_preset(cs(name).as_ptr(), n, cs("gauss-split").as_ptr(), &mut k);
    assert_eq!(st, GtStatus::Ok);
    k
}

unsafe fn values(f: *const GtField) -> (Vec<f64>, f64) {
    let n = gt_field_len(f);
    let mut buf = vec![0.0; n];
    let mut z = f64::NAN;
    assert_eq!(gt_field_values(f, buf.as_mut_ptr(), n, &mut z), GtStatus::Ok);
    (buf, z)
}

#[test]
fn preset_kernel_and_zero_mean() {
    unsafe {
        let k = kernel("ehr12-k2", 64);
        assert_eq!(gt_kernel_n_nodes(k), 64);
        let (mut nodes, mut weights) = (vec![0.0; 64], vec![0.0; 64]);
        assert_eq!(gt_kernel_grid(k, nodes.as_mut_ptr(), weights.as_mut_ptr(), 64), GtStatus::Ok);
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let (mut holds, mut dev) = (false, f64::NAN);
        assert_eq!(gt_kernel_zero_mean(k, 1e-8, &mut holds, &mut dev), GtStatus::Ok);
        assert!(holds && dev < 1e-8);
        gt_kernel_free(k);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut k = ptr::null_mut();
        let st = gt_kernel_new_preset(cs("nope").as_ptr(), 64, cs("gauss-split").as_ptr(), &mut k);
        assert_eq!(st, GtStatus::Config);
        assert!(k.is_null());
        let msg = CStr::from_ptr(gt_last_error()).to_str().unwrap();
        assert!(msg.contains("nope"), "{msg}");

        let st = gt_kernel_new_preset(ptr::null(), 64, cs("gauss-split").as_ptr(), &mut k);
        assert_eq!(st, GtStatus::NullPointer);

        let st = gt_kernel_new_expression(cs("t*u").as_ptr(), 0.0, 1.0, 16, cs("gauss-split").as_ptr(), &mut k);
        assert_eq!(st, GtStatus::Config);

        let k = kernel("ehr12-k2", 16);
        assert_eq!(gt_kernel_n_nodes(ptr::null()), 0);
        let v = [1.0; 16];
        let mut f = ptr::null_mut();
        assert_eq!(gt_field_new(v.as_ptr(), 16, 1.0, &mut f), GtStatus::Ok);
        let mut g = ptr::null_mut();
        assert_eq!(gt_invert_ka(k, 2, f, 1e-10, 50, &mut g), GtStatus::Contract);
        assert!(g.is_null());
        assert_eq!(gt_field_new(v.as_ptr(), 16, 0.0, &mut f), GtStatus::Ok);
        assert!(gt_last_error().is_null());
        gt_field_free(f);
        gt_kernel_free(k);
    }
}

#[test]
fn fixed_points_and_vertex_fields() {
    unsafe {
        let k = kernel("ehr12-k2", 32);
        let mut list = ptr::null_mut();
        assert_eq!(gt_find_ti(k, 2, 1e-10, 10_000, &mut list), GtStatus::Ok);
        assert_eq!(gt_field_list_len(list), 3);
        let (mut h, mut eta) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(gt_field_list_get(list, 1, &mut h), GtStatus::Ok);
        assert_eq!(gt_field_list_get(list, 2, &mut eta), GtStatus::Ok);
        let mut bad = ptr::null_mut();
        assert_eq!(gt_field_list_get(list, 3, &mut bad), GtStatus::Contract);

        let mut img = ptr::null_mut();
        assert_eq!(gt_apply_ka(k, 2, h, &mut img), GtStatus::Ok);
        let (a, _) = values(h);
        let (b, z) = values(img);
        assert_eq!(z, 0.0);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));

        let mut ti = ptr::null_mut();
        assert_eq!(gt_vertex_field_ti(h, 2, 3, false, &mut ti), GtStatus::Ok);
        assert_eq!(gt_vertex_field_len(ti), 15);
        let mut res = f64::NAN;
        assert_eq!(gt_residual(k, ti, &mut res), GtStatus::Ok);
        assert!(res < 1e-9);

        let mut lifted = ptr::null_mut();
        assert_eq!(gt_art_lift(k, ti, 3, 3, 1e-8, &mut lifted), GtStatus::Ok);
        assert_eq!(gt_residual(k, lifted, &mut res), GtStatus::Ok);
        assert!(res < 1e-9);
        let mut leaf = ptr::null_mut();
        assert_eq!(gt_vertex_field_get(lifted, cs("2/0").as_ptr(), &mut leaf), GtStatus::Ok);
        assert!(values(leaf).0.iter().all(|&v| v == 0.0));

        let mut bg = ptr::null_mut();
        assert_eq!(gt_bg_field(k, 2, h, eta, 0.3, 5, 1e-8, &mut bg), GtStatus::Ok);
        assert_eq!(gt_residual(k, bg, &mut res), GtStatus::Ok);
        assert!(res < 1e-9);

        let (mut alpha, mut pw) = (f64::NAN, f64::NAN);
        assert_eq!(gt_estimate_contraction(k, 50, 1.0, 7, &mut alpha, &mut pw), GtStatus::Ok);
        assert!(alpha > 0.0 && alpha < 1.0);

        for p in [leaf, img, h, eta] {
            gt_field_free(p);
        }
        for p in [ti, lifted, bg] {
            gt_vertex_field_free(p);
        }
        gt_field_list_free(list);
        gt_kernel_free(k);
    }
}

#[test]
fn zachary_and_measure() {
    unsafe {
        let k = kernel("ehr12-k2", 32);
        let z = [0.0; 32];
        let mut zeta0 = ptr::null_mut();
        assert_eq!(gt_field_new(z.as_ptr(), 32, 0.0, &mut zeta0), GtStatus::Ok);
        let (mut vf, mut complete) = (ptr::null_mut(), false);
        assert_eq!(gt_zachary(k, 2, zeta0, 3, 1e-11, 100, &mut vf, &mut complete), GtStatus::Ok);
        assert!(complete);
        assert_eq!(gt_vertex_field_len(vf), 15);

        let mut log_z = f64::NAN;
        assert_eq!(gt_log_partition(k, vf, &mut log_z), GtStatus::Ok);
        assert!(log_z.abs() < 1e-12);
        let (mut err, mut pass) = (f64::NAN, false);
        assert_eq!(gt_check_compatibility(k, vf, 20, 1, 1e-8, &mut err, &mut pass), GtStatus::Ok);
        assert!(pass && err < 1e-8);

        let mut root = ptr::null_mut();
        assert_eq!(gt_marginal(k, vf, cs("").as_ptr(), &mut root), GtStatus::Ok);
        assert!(values(root).0.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let mut leaf = ptr::null_mut();
        assert_eq!(gt_marginal(k, vf, cs("0/1/1").as_ptr(), &mut leaf), GtStatus::Ok);
        assert_eq!(gt_marginal(k, vf, cs("0/1/1/0").as_ptr(), &mut leaf), GtStatus::Contract);

        gt_field_free(root);
        gt_field_free(leaf);
        gt_field_free(zeta0);
        gt_vertex_field_free(vf);
        gt_kernel_free(k);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gibbs_tree.h")).unwrap();
    for f in ["gt_kernel_new_preset", "gt_find_ti", "gt_bg_field", "gt_zachary", "gt_marginal", "gt_last_error"] {
        assert!(header.contains(f), "{f} missing from header");
    }
    assert!(header.contains("typedef struct GtKernel GtKernel;"));
}

#[test]
fn c_program_links_against_the_static_library() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libgibbs_tree_ffi.a");
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let out_dir = tempfile_dir();
    let bin = out_dir.join("smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = std::process::Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout} {}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("fixed_points=3"), "{stdout}");
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::path::PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c-smoke");
    std::fs::create_dir_all(&d).unwrap();
    d
}

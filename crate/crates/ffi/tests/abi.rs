use std::ffi::{CStr, CString};
use std::ptr;

use varspde_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(vsp_last_error()) }
        .to_string_lossy()
        .into_owned()
}

const CONFIG: &str = r#"
kind = "solve-linear"
seed = 7
[triple]
domain = "interval"
dim = 3
[pair]
family = "laplacian"
[noise]
modes = 1
steps = 10
[initial]
u0 = [1.0, 0.5]
[forcing]
g = [[0.2, 0.0, 0.0]]
[numerics]
paths = 4
"#;

#[test]
fn triple_norms_match_weights() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(
            vsp_triple_new(VspDomain::Interval, 4, 1, &mut t),
            VspStatus::Ok
        );
        assert_eq!(vsp_triple_len(t), 4);
        let mut ev = [0.0; 4];
        assert_eq!(vsp_triple_eigenvalues(t, ev.as_mut_ptr(), 4), VspStatus::Ok);
        let pi2 = std::f64::consts::PI.powi(2);
        for (k, l) in ev.iter().enumerate() {
            assert!((l - pi2 * ((k + 1) * (k + 1)) as f64).abs() < 1e-12);
        }
        let e2 = [0.0, 1.0, 0.0, 0.0];
        let mut v = 0.0;
        assert_eq!(
            vsp_norm(t, e2.as_ptr(), 4, VspSpace::V, 0.0, 0.0, &mut v),
            VspStatus::Ok
        );
        assert!((v - (1.0 + 4.0 * pi2).sqrt()).abs() < 1e-12);
        assert_eq!(
            vsp_norm(t, e2.as_ptr(), 4, VspSpace::ComplexInterp, 0.5, 0.0, &mut v),
            VspStatus::Ok
        );
        assert!((v - (1.0 + 4.0 * pi2).powf(0.25)).abs() < 1e-12);
        assert_eq!(
            vsp_norm(t, e2.as_ptr(), 3, VspSpace::H, 0.0, 0.0, &mut v),
            VspStatus::Shape
        );
        assert!(!last_error().is_empty());
        assert_eq!(
            vsp_triple_eigenvalues(t, ev.as_mut_ptr(), 2),
            VspStatus::BufferTooSmall
        );
        vsp_triple_free(t);
    }
}

#[test]
fn null_and_range_errors() {
    unsafe {
        assert_eq!(
            vsp_triple_new(VspDomain::Interval, 4, 1, ptr::null_mut()),
            VspStatus::NullPointer
        );
        assert!(last_error().contains("out"));
        let mut t = ptr::null_mut();
        assert_eq!(
            vsp_triple_new(VspDomain::Interval, 0, 1, &mut t),
            VspStatus::InvalidArgument
        );
        assert!(t.is_null());
        assert_eq!(
            vsp_psi(
                2.0,
                1.0,
                0.5,
                ptr::null_mut(),
                ptr::null_mut(),
                ptr::null_mut()
            ),
            VspStatus::InvalidArgument
        );
        vsp_triple_free(ptr::null_mut());
        vsp_config_free(ptr::null_mut());
        vsp_ensemble_free(ptr::null_mut());
        assert_eq!(vsp_triple_len(ptr::null()), 0);
    }
}

#[test]
fn psi_and_projection() {
    unsafe {
        let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
        assert_eq!(
            vsp_psi(4.0, 1.0, 0.5, &mut p, &mut d1, &mut d2),
            VspStatus::Ok
        );
        assert!((p - 0.0625).abs() < 1e-15 && (d1 - 0.5).abs() < 1e-15 && (d2 - 3.0).abs() < 1e-15);
        assert_eq!(
            vsp_psi(4.0, 1.0, 3.0, ptr::null_mut(), ptr::null_mut(), &mut d2),
            VspStatus::Ok
        );
        assert_eq!(d2, 12.0);
        let mut y = [3.0, 4.0];
        let y_ptr = y.as_mut_ptr();
        assert_eq!(vsp_project_ball(y_ptr, 2, 1.0, y_ptr), VspStatus::Ok);
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
        assert_eq!(
            vsp_project_ball(y.as_ptr(), 2, 0.0, y_ptr),
            VspStatus::InvalidArgument
        );
    }
}

#[test]
fn config_solve_and_run() {
    unsafe {
        let text = CString::new(CONFIG).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(
            vsp_config_parse(text.as_ptr(), false, &mut cfg),
            VspStatus::Ok
        );
        let mut issues = 9;
        assert_eq!(vsp_config_validate(cfg, &mut issues), VspStatus::Ok);
        assert_eq!(issues, 0);

        let mut e = ptr::null_mut();
        assert_eq!(vsp_config_solve(cfg, 1, &mut e), VspStatus::Ok);
        let (mut paths, mut times, mut len) = (0, 0, 0);
        assert_eq!(
            vsp_ensemble_shape(e, &mut paths, &mut times, &mut len),
            VspStatus::Ok
        );
        assert_eq!((paths, times, len), (4, 11, 3));
        let mut grid = vec![0.0; times];
        assert_eq!(
            vsp_ensemble_grid(e, grid.as_mut_ptr(), times),
            VspStatus::Ok
        );
        assert_eq!(grid[10], 1.0);
        let mut path = vec![0.0; times * len];
        assert_eq!(
            vsp_ensemble_path(e, 3, path.as_mut_ptr(), path.len()),
            VspStatus::Ok
        );
        assert_eq!(&path[..3], &[1.0, 0.5, 0.0]);
        assert_eq!(
            vsp_ensemble_path(e, 4, path.as_mut_ptr(), path.len()),
            VspStatus::InvalidArgument
        );

        let mut e2 = ptr::null_mut();
        assert_eq!(vsp_config_solve(cfg, 3, &mut e2), VspStatus::Ok);
        let mut other = vec![0.0; times * len];
        assert_eq!(
            vsp_ensemble_path(e2, 3, other.as_mut_ptr(), other.len()),
            VspStatus::Ok
        );
        assert_eq!(path, other);
        vsp_ensemble_free(e);
        vsp_ensemble_free(e2);

        let dir = tempfile::tempdir().unwrap();
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut code = -1;
        assert_eq!(
            vsp_config_run(cfg, out.as_ptr(), 0, &mut code),
            VspStatus::Ok
        );
        assert_eq!(code, 0);
        assert!(dir.path().join("manifest.json").exists());
        vsp_config_free(cfg);
    }
}

#[test]
fn invalid_configs_report_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("kind = \"solve-linear\"\nseed = \"x\"").unwrap();
        assert_eq!(
            vsp_config_parse(bad.as_ptr(), false, &mut cfg),
            VspStatus::Config
        );
        assert!(last_error().contains("line 2"), "{}", last_error());

        let text = CString::new(CONFIG.replace("steps = 10", "dt = -0.1")).unwrap();
        assert_eq!(
            vsp_config_parse(text.as_ptr(), false, &mut cfg),
            VspStatus::Ok
        );
        let mut issues = 0;
        assert_eq!(vsp_config_validate(cfg, &mut issues), VspStatus::Ok);
        assert_eq!(issues, 1);
        assert!(last_error().contains("noise.dt"));
        let dir = tempfile::tempdir().unwrap();
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut code = 0;
        assert_eq!(
            vsp_config_run(cfg, out.as_ptr(), 0, &mut code),
            VspStatus::Config
        );
        assert_eq!(code, 2);
        assert!(dir.path().join("error.json").exists());
        vsp_config_free(cfg);

        let missing = CString::new("/nonexistent/run.toml").unwrap();
        assert_eq!(
            vsp_config_load(missing.as_ptr(), &mut cfg),
            VspStatus::Config
        );
    }
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/varspde.h")).unwrap();
    for name in [
        "vsp_last_error",
        "vsp_triple_new",
        "vsp_norm",
        "vsp_psi",
        "vsp_project_ball",
        "vsp_config_parse",
        "vsp_config_run",
        "vsp_config_solve",
        "vsp_ensemble_path",
        "VSP_STATUS_NUMERIC = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    assert!(
        unsafe { CStr::from_ptr(vsp_version()) }.to_str().unwrap() == env!("CARGO_PKG_VERSION")
    );
}

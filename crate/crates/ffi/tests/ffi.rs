use std::ffi::{CStr, CString};
use std::ptr;

use slowbeam_ffi::*;

fn last_error() -> String {
    let p = sb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn closed_forms_match_the_library() {
    let mut u = 0.0;
    let status = unsafe { sb_dipole_potential_depth(200e-30, 1.0, 100e-6, &mut u) };
    assert_eq!(status, SbStatus::Ok);
    assert_eq!(u, slowbeam::optics::dipole_potential_depth(200e-30, 1.0, 100e-6));

    let mut n = 0.0;
    assert_eq!(unsafe { sb_photons_absorbed(15e6, 3e-23, 5e-9, 100e-6, 1064e-9, &mut n) }, SbStatus::Ok);
    assert!((760.0..=775.0).contains(&n), "{n}");

    let mut v = 0.0;
    let m = slowbeam::phys::amu_to_kg(5053.0);
    assert_eq!(unsafe { sb_effusive_speed(m, 585.0, &mut v) }, SbStatus::Ok);
    assert!((v - 43.9).abs() < 0.1, "{v}");
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut out = 0.0;
    let s = unsafe { sb_dipole_potential_depth(200e-30, 1.0, 0.0, &mut out) };
    assert_eq!(s, SbStatus::InvalidArgument);
    assert!(last_error().contains("waist"));

    let s = unsafe { sb_dipole_potential_depth(200e-30, 1.0, 1e-4, ptr::null_mut()) };
    assert_eq!(s, SbStatus::NullPointer);

    let s = unsafe { sb_effusive_speed(-1.0, 300.0, &mut out) };
    assert_eq!(s, SbStatus::InvalidArgument);
}

#[test]
fn config_parse_errors_are_config_status() {
    let mut cfg = ptr::null_mut();
    let text = CString::new("[selector]\nfwhm_rel = 1.5\n").unwrap();
    assert_eq!(unsafe { sb_config_parse(text.as_ptr(), &mut cfg) }, SbStatus::Config);
    assert!(cfg.is_null());
    assert!(last_error().contains("fwhm_rel"));

    let path = CString::new("/nonexistent/slowbeam.toml").unwrap();
    assert_eq!(unsafe { sb_config_load(path.as_ptr(), &mut cfg) }, SbStatus::Config);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = sb_config_default();
    unsafe {
        assert_eq!(sb_config_set_seed(cfg, 42), SbStatus::Ok);
        assert_eq!(sb_config_set_seed(cfg, u64::MAX), SbStatus::InvalidArgument);
        let s = sb_config_to_toml(cfg);
        assert!(!s.is_null());
        let mut back = ptr::null_mut();
        assert_eq!(sb_config_parse(s, &mut back), SbStatus::Ok);
        let again = sb_config_to_toml(back);
        assert_eq!(CStr::from_ptr(s), CStr::from_ptr(again));
        assert!(CStr::from_ptr(s).to_str().unwrap().contains("seed = 42"));
        sb_string_free(s);
        sb_string_free(again);
        sb_config_free(back);
        sb_config_free(cfg);
    }
}

#[test]
fn focus_handles() {
    let text = CString::new("seed = 3\n[focus]\nn_particles = 400\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(sb_config_parse(text.as_ptr(), &mut cfg), SbStatus::Ok);
        let (mut base, mut lens) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(sb_focus_run(cfg, 0.0, &mut base), SbStatus::Ok);
        assert_eq!(sb_focus_run(cfg, 1.2e5, &mut lens), SbStatus::Ok);
        assert_eq!(sb_focus_particles(lens), 400);
        let mut gain = 0.0;
        assert_eq!(sb_focus_gain(lens, base, &mut gain), SbStatus::Ok);
        assert!(gain > 1.0, "{gain}");
        let mut v = [0.0; 3];
        assert_eq!(sb_focus_final_velocity(lens, 0, v.as_mut_ptr()), SbStatus::Ok);
        assert!(v[2] > 40.0);
        assert_eq!(sb_focus_final_velocity(lens, 400, v.as_mut_ptr()), SbStatus::InvalidArgument);
        sb_focus_free(base);
        sb_focus_free(lens);
        sb_config_free(cfg);
    }
}

#[test]
fn cooling_handles() {
    let text = CString::new("[cooling]\nn = 50\nt_end = 5e-6\n").unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(sb_config_parse(text.as_ptr(), &mut cfg), SbStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(sb_cooling_run(cfg, 1e3, &mut run), SbStatus::Ok);
        let n = sb_cooling_trace_len(run);
        assert!(n > 2);
        let (mut t, mut theta) = (0.0, 0.0);
        assert_eq!(
            sb_cooling_trace_sample(run, n - 1, &mut t, ptr::null_mut(), ptr::null_mut(), &mut theta),
            SbStatus::Ok
        );
        assert!((t - 5e-6).abs() < 1e-12, "{t}");
        assert!((0.0..=1.0).contains(&theta));
        let mut ratio = 0.0;
        assert_eq!(sb_cooling_ke_ratio(run, &mut ratio), SbStatus::Ok);
        assert!(ratio.is_finite() && ratio > 0.0);
        sb_cooling_free(run);
        sb_config_free(cfg);
    }
}

#[test]
fn null_handles_are_tolerated() {
    unsafe {
        sb_config_free(ptr::null_mut());
        sb_focus_free(ptr::null_mut());
        sb_cooling_free(ptr::null_mut());
        sb_string_free(ptr::null_mut());
        assert_eq!(sb_focus_particles(ptr::null()), 0);
        assert!(sb_config_to_toml(ptr::null()).is_null());
        let mut out = ptr::null_mut();
        assert_eq!(sb_focus_run(ptr::null(), 0.0, &mut out), SbStatus::NullPointer);
    }
    let v = unsafe { CStr::from_ptr(sb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/slowbeam.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler, skipped");
        return;
    };
    assert!(status.success());
}

use std::ffi::{CStr, CString};
use std::ptr;

use superball_ffi::*;

fn space(p: f64, cuts: &[usize]) -> *mut SbSpace {
    let mut s = ptr::null_mut();
    let st = unsafe { sb_space_new(p, cuts.as_ptr(), cuts.len(), &mut s) };
    assert_eq!(st, SbStatus::Ok);
    assert!(!s.is_null());
    s
}

fn last_error() -> String {
    let p = sb_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn norm_and_distance() {
    let s = space(2.0, &[0, 2]);
    assert_eq!(unsafe { sb_space_dim(s) }, 2);
    let x = [3.0, 4.0];
    let mut r = 0.0;
    assert_eq!(unsafe { sb_norm(s, x.as_ptr(), 2, &mut r) }, SbStatus::Ok);
    assert!((r - 5.0).abs() < 1e-14);
    let y = [0.5, 0.5];
    let z = [9.5, 9.5];
    assert_eq!(unsafe { sb_distance(s, y.as_ptr(), z.as_ptr(), 2, 10.0, &mut r) }, SbStatus::Ok);
    assert!((r - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(unsafe { sb_distance(s, y.as_ptr(), z.as_ptr(), 2, 0.0, &mut r) }, SbStatus::Ok);
    assert!((r - 9.0 * 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(unsafe { sb_unit_ball_volume(s, &mut r) }, SbStatus::Ok);
    assert!((r - std::f64::consts::PI).abs() < 1e-13);
    unsafe { sb_space_free(s) };
}

#[test]
fn errors_are_reported() {
    let mut s = ptr::null_mut();
    let cuts = [0usize, 1];
    assert_eq!(unsafe { sb_space_new(0.5, cuts.as_ptr(), 2, &mut s) }, SbStatus::InvalidInput);
    assert!(s.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { sb_space_new(2.0, ptr::null(), 2, &mut s) }, SbStatus::NullPointer);
    assert!(last_error().contains("cuts"));

    let sp = space(2.0, &[0, 2]);
    let x = [1.0, 2.0, 3.0];
    let mut r = 0.0;
    assert_eq!(unsafe { sb_norm(sp, x.as_ptr(), 3, &mut r) }, SbStatus::InvalidInput);
    assert_eq!(unsafe { sb_norm(sp, x.as_ptr(), 2, ptr::null_mut()) }, SbStatus::NullPointer);
    unsafe {
        sb_space_free(sp);
        sb_space_free(ptr::null_mut());
        sb_certificate_free(ptr::null_mut());
        sb_string_free(ptr::null_mut());
    }
}

#[test]
fn constants() {
    let mut c = SbConstantChain::default();
    assert_eq!(unsafe { sb_constant_chain(2.0, &mut c) }, SbStatus::Ok);
    assert!(c.c_p > 1.9 && c.c_p < 2.0);
    assert!((c.c_gap - (2.0 - c.c_p)).abs() < 1e-15);
    let mut b = SbDensityBound::default();
    assert_eq!(unsafe { sb_density_lower_bound(16, 2.0, &mut b) }, SbStatus::Ok);
    assert_eq!(b.n, 16);
    assert!(b.bound > 0.0);
    let mut w = 0.0;
    assert_eq!(unsafe { sb_lambert_w(std::f64::consts::E, &mut w) }, SbStatus::Ok);
    assert!((w - 1.0).abs() < 1e-14);
    assert_eq!(unsafe { sb_lambert_w(-1.0, &mut w) }, SbStatus::InvalidInput);
}

#[test]
fn simulate_small_torus() {
    let s = space(2.0, &[0, 1]);
    let mut out = SbChainSummary::default();
    let st = unsafe { sb_simulate(s, 20.0, 1.0, 20_000, 2_000, 3, &mut out) };
    assert_eq!(st, SbStatus::Ok, "{}", last_error());
    assert!(out.alpha_hat > 0.0 && out.alpha_hat < 1.0);
    assert!((out.volume - 20.0).abs() < 1e-12);
    unsafe { sb_space_free(s) };
}

#[test]
fn pack_round_trip_and_verify() {
    let s = space(1.5, &[0, 1, 2]);
    let mut r_unit = 0.0;
    assert_eq!(unsafe { sb_r_unit(s, &mut r_unit) }, SbStatus::Ok);
    let mut cert = ptr::null_mut();
    let st = unsafe { sb_pack(s, 3.0 * r_unit, 0.0, &mut cert) };
    assert_eq!(st, SbStatus::Ok, "{}", last_error());
    let len = unsafe { sb_certificate_len(cert) };
    assert!(len >= 1);
    let mut v = SbVerification::default();
    assert_eq!(unsafe { sb_certificate_verify(cert, &mut v) }, SbStatus::Ok);
    assert!(v.valid && v.all_inside);
    assert_eq!(v.count as usize, len);

    let mut buf = vec![0.0; 2 * len];
    assert_eq!(unsafe { sb_certificate_centers(cert, buf.as_mut_ptr(), 1) }, SbStatus::InvalidInput);
    assert_eq!(unsafe { sb_certificate_centers(cert, buf.as_mut_ptr(), buf.len()) }, SbStatus::Ok);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { sb_certificate_to_json(cert, &mut json) }, SbStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { sb_string_free(json) };

    let c = CString::new(text.clone()).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { sb_certificate_from_json(c.as_ptr(), &mut back) }, SbStatus::Ok);
    assert_eq!(unsafe { sb_certificate_len(back) }, len);

    // two centers on top of each other
    let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["centers"] = serde_json::json!([[0.0, 0.0], [0.01, 0.0]]);
    doc["min_pairwise_distance"] = serde_json::Value::Null;
    let bad = CString::new(doc.to_string()).unwrap();
    let mut bad_cert = ptr::null_mut();
    assert_eq!(unsafe { sb_certificate_from_json(bad.as_ptr(), &mut bad_cert) }, SbStatus::Ok);
    assert_eq!(unsafe { sb_certificate_verify(bad_cert, &mut v) }, SbStatus::Violation);
    assert!(!v.valid);

    let junk = CString::new("{not json").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { sb_certificate_from_json(junk.as_ptr(), &mut none) }, SbStatus::InvalidInput);
    assert!(none.is_null());

    unsafe {
        sb_certificate_free(cert);
        sb_certificate_free(back);
        sb_certificate_free(bad_cert);
        sb_space_free(s);
    }
}

#[test]
fn header_is_generated() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/superball.h")).unwrap();
    for name in ["sb_space_new", "sb_pack", "sb_certificate_verify", "sb_last_error", "SB_STATUS_VIOLATION"] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

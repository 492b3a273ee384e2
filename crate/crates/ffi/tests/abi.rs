use std::ffi::CString;
use std::ptr;

use hmm_forget_ffi::*;

const LGSSM: &str = "[model]\nkind = \"lgssm\"\nphi = 0.5\nsigma = 1.0\nbeta = 1.0\n";
const FINITE: &str = "[model]\nkind = \"finite_state\"\ntransition = [[0.9, 0.1], [0.2, 0.8]]\nemission = { form = \"discrete\", probs = [[0.5, 0.5], [0.1, 0.9]] }\n";

fn model(doc: &str) -> *mut HfModel {
    let text = CString::new(doc).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hf_model_from_toml(text.as_ptr(), &mut m) }, HfStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { hf_last_error(buf.as_mut_ptr(), buf.len()) };
    let s: Vec<u8> = buf.iter().take(n.min(255)).map(|&c| c as u8).collect();
    String::from_utf8(s).unwrap()
}

#[test]
fn densities_and_constants() {
    let m = model(LGSSM);
    let mut v = 0.0;
    unsafe {
        assert_eq!(hf_transition_density(m, 0.0, 0.0, &mut v), HfStatus::Ok);
        assert!((v - 0.3989422804014327).abs() < 1e-15);
        assert_eq!(hf_drift(m, 3.0, &mut v), HfStatus::Ok);
        assert_eq!(v, 1.0);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(hf_certify_ld_interval(m, -1.0, 1.0, 64, &mut lo, &mut hi), HfStatus::Ok);
        assert!((hi - 0.7978845608028654).abs() < 1e-12);
        assert!((lo - 0.2590351913317835).abs() < 1e-12);
        assert_eq!(hf_rho(lo, hi, &mut v), HfStatus::Ok);
        assert!((v - 0.8946007754381357).abs() < 1e-12);
        hf_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("[model]\nkind = \"tobit\"\nphi = 2.0\nsigma = 1.0\nbeta = 1.0\n").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { hf_model_from_toml(bad.as_ptr(), &mut m) }, HfStatus::Config);
    assert!(m.is_null());
    assert!(last_error().contains("model"), "{}", last_error());
    let mut v = 0.0;
    assert_eq!(unsafe { hf_rho(0.5, 0.25, &mut v) }, HfStatus::InvalidInput);
    assert_eq!(unsafe { hf_drift(ptr::null(), 0.0, &mut v) }, HfStatus::NullPointer);
    let fm = model(FINITE);
    assert_eq!(unsafe { hf_likelihood(fm, 0.0, 5.0, &mut v) }, HfStatus::InvalidInput);
    assert_eq!(unsafe { hf_certify_ld_interval(fm, 0.0, 1.0, 8, &mut v, &mut v) }, HfStatus::InvalidInput);
    unsafe { hf_model_free(fm) };
}

#[test]
fn finite_filter_matches_bayes() {
    let m = model(FINITE);
    let init = [0.5, 0.5];
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(hf_filter_new(m, 0.0, 0.0, 0, init.as_ptr(), 2, 1.0, &mut f), HfStatus::Ok);
        let mut w = [0.0; 2];
        assert_eq!(hf_filter_weights(f, w.as_mut_ptr(), 2), HfStatus::Ok);
        assert!((w[0] - 0.5 / 1.4).abs() < 1e-15);
        assert_eq!(hf_filter_step(f, 0.0), HfStatus::Ok);
        // predicted (0.9 w0 + 0.2 w1, 0.1 w0 + 0.8 w1), times (0.5, 0.1)
        let p0 = 0.9 * (0.5 / 1.4) + 0.2 * (0.9 / 1.4);
        let p1 = 0.1 * (0.5 / 1.4) + 0.8 * (0.9 / 1.4);
        assert_eq!(hf_filter_weights(f, w.as_mut_ptr(), 2), HfStatus::Ok);
        assert!((w[0] - 0.5 * p0 / (0.5 * p0 + 0.1 * p1)).abs() < 1e-14);
        let mut small = [0.0; 1];
        assert_eq!(hf_filter_weights(f, small.as_mut_ptr(), 1), HfStatus::BufferTooSmall);
        let (mut lz, mut n) = (0.0, 0usize);
        assert_eq!(hf_filter_log_z(f, &mut lz, &mut n), HfStatus::Ok);
        assert_eq!(n, 1);
        assert!((lz - (0.7 * (0.5 * p0 + 0.1 * p1)).ln()).abs() < 1e-14);
        hf_filter_free(f);
        hf_model_free(m);
    }
}

#[test]
fn two_filter_distance_agrees_with_handles() {
    let m = model(LGSSM);
    let k = 200;
    let (lo, hi) = (-8.0, 8.0);
    let node = |i: usize| lo + (i as f64 + 0.5) * (hi - lo) / k as f64;
    let a: Vec<f64> = (0..k).map(|i| (-0.5 * (node(i) + 2.0).powi(2)).exp()).collect();
    let b: Vec<f64> = (0..k).map(|i| (-0.5 * (node(i) - 2.0).powi(2)).exp()).collect();
    let obs = [0.3, -0.1, 0.8, 0.2, 0.0];
    let mut tv = [0.0; 5];
    unsafe {
        assert_eq!(
            hf_run_two_filters_tv(m, lo, hi, k, a.as_ptr(), b.as_ptr(), k, obs.as_ptr(), obs.len(), tv.as_mut_ptr()),
            HfStatus::Ok
        );
        let (mut fa, mut fb) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(hf_filter_new(m, lo, hi, k, a.as_ptr(), k, obs[0], &mut fa), HfStatus::Ok);
        assert_eq!(hf_filter_new(m, lo, hi, k, b.as_ptr(), k, obs[0], &mut fb), HfStatus::Ok);
        for (i, &y) in obs.iter().enumerate() {
            if i > 0 {
                assert_eq!(hf_filter_step(fa, y), HfStatus::Ok);
                assert_eq!(hf_filter_step(fb, y), HfStatus::Ok);
            }
            let mut d = 0.0;
            assert_eq!(hf_filter_tv(fa, fb, &mut d), HfStatus::Ok);
            assert!((d - tv[i]).abs() < 1e-12, "{i}: {d} vs {}", tv[i]);
        }
        assert!(tv.windows(2).all(|w| w[1] < w[0]));
        let mut wrong = ptr::null_mut();
        assert_eq!(hf_filter_new(m, lo, hi, k, a.as_ptr(), 10, 0.0, &mut wrong), HfStatus::InvalidInput);
        assert!(wrong.is_null());
        hf_filter_free(fa);
        hf_filter_free(fb);
        hf_model_free(m);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hmm_forget.h")).unwrap();
    for f in [
        "hf_last_error",
        "hf_model_from_toml",
        "hf_model_free",
        "hf_transition_density",
        "hf_likelihood",
        "hf_drift",
        "hf_filter_new",
        "hf_filter_step",
        "hf_filter_len",
        "hf_filter_weights",
        "hf_filter_log_z",
        "hf_filter_tv",
        "hf_filter_free",
        "hf_rho",
        "hf_certify_ld_interval",
        "hf_run_two_filters_tv",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
}

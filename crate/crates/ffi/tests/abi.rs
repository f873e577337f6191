use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use spenra_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(spenra_last_error()) }.to_string_lossy().into_owned()
}

fn series(values: &[f64]) -> *mut SpenraSeries {
    let mut s = ptr::null_mut();
    let st = unsafe { spenra_series_new(values.as_ptr(), ptr::null(), values.len(), &mut s) };
    assert_eq!(st, SpenraStatus::Ok);
    s
}

#[test]
fn series_round_trip_and_buffer_sizing() {
    let v = [0.5, 1.0, 1.5, 0.7];
    let t = [0.5, 1.5, 3.0, 3.7];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(spenra_series_new(v.as_ptr(), t.as_ptr(), 4, &mut s), SpenraStatus::Ok);
        assert_eq!(spenra_series_len(s), 4);
        assert!(spenra_series_has_times(s));

        let mut len = 0;
        let mut small = [0.0; 2];
        assert_eq!(spenra_series_values(s, small.as_mut_ptr(), 2, &mut len), SpenraStatus::BufferTooSmall);
        assert_eq!(len, 4);
        let mut buf = [0.0; 4];
        assert_eq!(spenra_series_values(s, buf.as_mut_ptr(), 4, &mut len), SpenraStatus::Ok);
        assert_eq!(buf, v);
        assert_eq!(spenra_series_times(s, buf.as_mut_ptr(), 4, &mut len), SpenraStatus::Ok);
        assert_eq!(buf, t);
        spenra_series_free(s);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(spenra_series_new(ptr::null(), ptr::null(), 3, &mut s), SpenraStatus::NullPointer);
        assert!(last_error().contains("values"));
        let bad = [1.0, f64::NAN];
        assert_eq!(spenra_series_new(bad.as_ptr(), ptr::null(), 2, &mut s), SpenraStatus::InvalidInput);
        assert!(s.is_null());

        let path = CString::new("/nonexistent/spenra.csv").unwrap();
        assert_eq!(spenra_series_from_csv(path.as_ptr(), &mut s), SpenraStatus::Io);
        assert!(!last_error().is_empty());

        let v: Vec<f64> = (0..20).map(|i| i as f64 * 1.7).collect();
        let mut out = 0.0;
        assert_eq!(spenra_sampen(v.as_ptr(), v.len(), 2, 0.1, &mut out), SpenraStatus::Computation);
        assert!(last_error().contains("0.1"));

        // handles tolerate null
        spenra_series_free(ptr::null_mut());
        spenra_report_free(ptr::null_mut());
        spenra_entropy_free(ptr::null_mut());
        assert_eq!(spenra_series_len(ptr::null()), 0);
    }
}

#[test]
fn classic_estimators_match_library() {
    let v: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 101.0).sin()).collect();
    let s = spenra::Series::new(v.clone()).unwrap();
    let mut out = 0.0;
    unsafe {
        assert_eq!(spenra_apen(v.as_ptr(), v.len(), 2, 0.2, &mut out), SpenraStatus::Ok);
        assert_eq!(out, spenra::classic::apen(&s, 2, 0.2).unwrap());
        assert_eq!(spenra_sampen(v.as_ptr(), v.len(), 2, 0.2, &mut out), SpenraStatus::Ok);
        assert_eq!(out, spenra::classic::sampen(&s, 2, 0.2).unwrap());
        assert_eq!(spenra_phi_normalized(v.as_ptr(), v.len(), 2, 0.5, &mut out), SpenraStatus::Ok);
        assert_eq!(out, spenra::classic::phi(&s, 2, 0.5).unwrap());
        assert_eq!(spenra_loo_rate(v.as_ptr(), v.len(), 1, 0.3, true, &mut out), SpenraStatus::Ok);
        assert_eq!(out, spenra::classic::loo_entropy_rate_uniform(&s, 1, 0.3, true).unwrap());
    }
}

#[test]
fn estimate_constant_series() {
    let s = series(&[2.0; 40]);
    let k = [0.5, 0.5];
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(spenra_estimate(s, k.as_ptr(), 2, 1e-8, &mut e), SpenraStatus::Ok);
        assert_eq!(spenra_entropy_len(e), 39);
        let mut h = 0.0;
        assert_eq!(spenra_entropy_time_averaged(e, &mut h), SpenraStatus::Ok);
        assert!((h - spenra::entropy::gaussian_entropy(0.5)).abs() < 1e-7);
        let mut buf = vec![0.0; 39];
        let mut len = 0;
        assert_eq!(spenra_entropy_values(e, buf.as_mut_ptr(), buf.len(), &mut len), SpenraStatus::Ok);
        assert_eq!(len, 39);
        spenra_entropy_free(e);

        assert_eq!(spenra_estimate(s, k.as_ptr(), 1, 1e-8, &mut e), SpenraStatus::InvalidInput);
        spenra_series_free(s);
    }
}

#[test]
fn selection_on_short_markov_series() {
    let mut s = ptr::null_mut();
    let mut r = ptr::null_mut();
    unsafe {
        assert_eq!(spenra_generate_markov2(120, 5, &mut s), SpenraStatus::Ok);
        assert_eq!(spenra_series_len(s), 120);
        assert_eq!(spenra_select_order(s, 2, 5, 1, &mut r), SpenraStatus::Ok);
        let p = spenra_report_chosen_order(r);
        assert!((1..=2).contains(&p));
        let mut k = [0.0; 3];
        let mut len = 0;
        assert_eq!(spenra_report_bandwidths(r, 2, k.as_mut_ptr(), 3, &mut len), SpenraStatus::Ok);
        assert_eq!(len, 3);
        assert!(k.iter().all(|v| *v > 0.0));
        let (mut cv0, mut cvl) = (0.0, 0.0);
        assert_eq!(spenra_report_scores(r, 1, &mut cv0, &mut cvl), SpenraStatus::Ok);
        assert!(cv0.is_finite() && cvl.is_finite());
        assert_eq!(spenra_report_scores(r, 3, &mut cv0, &mut cvl), SpenraStatus::InvalidInput);

        let mut e = ptr::null_mut();
        assert_eq!(spenra_estimate_from_report(s, r, 1e-6, &mut e), SpenraStatus::Ok);
        assert_eq!(spenra_entropy_len(e), 120 - p);
        spenra_entropy_free(e);

        let mut too_short = ptr::null_mut();
        assert_eq!(spenra_select_order(s, 2, 60, 1, &mut too_short), SpenraStatus::InsufficientData);
        spenra_report_free(r);
        spenra_series_free(s);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/spenra.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split_once("extern \"C\" fn ").map(|(_, rest)| rest.split('(').next().unwrap()))
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(dir.join("include/spenra.h"))
        .status()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(status.success());
}

use std::ffi::{CStr, CString};
use std::ptr;

use graphtc_ffi::*;

fn last_error() -> String {
    let p = gtc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(pairs: &[(&str, &str)]) -> *mut GtcConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { gtc_config_new(&mut cfg) }, GtcStatus::Ok);
    for (k, v) in pairs {
        let (k, v) = (CString::new(*k).unwrap(), CString::new(*v).unwrap());
        assert_eq!(unsafe { gtc_config_set(cfg, k.as_ptr(), v.as_ptr()) }, GtcStatus::Ok);
    }
    cfg
}

/// Every entry of a rank-one 4×3×2 tensor is observed.
fn full_rank_one() -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let (n1, n2, n3) = (4, 3, 2);
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    let mut dense = vec![0.0; n1 * n2 * n3];
    for k in 0..n3 {
        for j in 0..n2 {
            for i in 0..n1 {
                let v = (i as f64 + 1.0) * (j as f64 - 0.5) * (1.0 + k as f64);
                idx.extend([i, j, k]);
                vals.push(v);
                dense[i + n1 * (j + n2 * k)] = v;
            }
        }
    }
    (idx, vals, dense)
}

#[test]
fn completes_fully_observed_tensor() {
    let cfg = config(&[("rank", "1"), ("max_iter", "500"), ("lambda_g", "0"), ("lambda_1", "0")]);
    let (idx, vals, dense) = full_rank_one();
    let mut obs = ptr::null_mut();
    assert_eq!(
        unsafe { gtc_observed_new(4, 3, 2, idx.as_ptr(), vals.as_ptr(), vals.len(), &mut obs) },
        GtcStatus::Ok
    );
    let (mut a, mut b, mut c, mut n) = (0, 0, 0, 0);
    assert_eq!(unsafe { gtc_observed_shape(obs, &mut a, &mut b, &mut c, &mut n) }, GtcStatus::Ok);
    assert_eq!((a, b, c, n), (4, 3, 2, 24));

    let mut out = ptr::null_mut();
    let mut iterations = 0;
    let status = unsafe { gtc_complete(cfg, obs, ptr::null(), ptr::null(), &mut out, &mut iterations) };
    assert_eq!(status, GtcStatus::Ok, "{}", last_error());
    assert!(iterations >= 1);
    assert_eq!(unsafe { gtc_tensor_dims(out, &mut a, &mut b, &mut c) }, GtcStatus::Ok);
    assert_eq!((a, b, c), (4, 3, 2));
    let mut buf = vec![0.0; 24];
    assert_eq!(unsafe { gtc_tensor_copy(out, buf.as_mut_ptr(), 24) }, GtcStatus::Ok);
    let err: f64 = buf.iter().zip(&dense).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = dense.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(err / norm < 1e-4, "relative error {}", err / norm);
    assert_eq!(unsafe { gtc_tensor_copy(out, buf.as_mut_ptr(), 23) }, GtcStatus::DimensionMismatch);

    unsafe {
        gtc_tensor_free(out);
        gtc_observed_free(obs);
        gtc_config_free(cfg);
    }
}

#[test]
fn graphs_and_coo_input() {
    let coo = CString::new("2 2 2\n1 1 1 1.0\n2 2 2 4.0\n").unwrap();
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { gtc_observed_from_coo(coo.as_ptr(), &mut obs) }, GtcStatus::Ok);
    let events = [0usize, 1, 0, 0, 1, 1];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gtc_graph_new(2, 2, events.as_ptr(), 2, &mut g) }, GtcStatus::Ok);
    let cfg = config(&[("rank", "1"), ("max_iter", "20")]);
    let mut out = ptr::null_mut();
    let status = unsafe { gtc_complete(cfg, obs, g, g, &mut out, ptr::null_mut()) };
    assert_eq!(status, GtcStatus::Ok, "{}", last_error());
    unsafe {
        gtc_tensor_free(out);
        gtc_graph_free(g);
        gtc_observed_free(obs);
        gtc_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    let bad = CString::new("rank = 2\nbogus = 1\n").unwrap();
    assert_eq!(unsafe { gtc_config_parse(bad.as_ptr(), &mut cfg) }, GtcStatus::InvalidConfig);
    assert!(last_error().contains("bogus"));
    assert!(cfg.is_null());

    assert_eq!(unsafe { gtc_config_new(ptr::null_mut()) }, GtcStatus::NullPointer);

    let coo = CString::new("2 2 2\n3 1 1 1.0\n").unwrap();
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { gtc_observed_from_coo(coo.as_ptr(), &mut obs) }, GtcStatus::DataError);
    assert!(last_error().contains("line 2"), "{}", last_error());

    let events = [0usize, 5, 0];
    let mut g = ptr::null_mut();
    assert_ne!(unsafe { gtc_graph_new(2, 1, events.as_ptr(), 1, &mut g) }, GtcStatus::Ok);

    let cfg = config(&[]);
    let cmd = CString::new("plot").unwrap();
    let dir = CString::new("/nonexistent").unwrap();
    assert_eq!(unsafe { gtc_run(cmd.as_ptr(), cfg, dir.as_ptr()) }, GtcStatus::InvalidConfig);
    let key = CString::new("rank").unwrap();
    let val = CString::new("two").unwrap();
    assert_eq!(unsafe { gtc_config_set(cfg, key.as_ptr(), val.as_ptr()) }, GtcStatus::InvalidConfig);
    unsafe { gtc_config_free(cfg) };

    unsafe {
        gtc_config_free(ptr::null_mut());
        gtc_observed_free(ptr::null_mut());
        gtc_string_free(ptr::null_mut());
    }
}

#[test]
fn config_text_round_trip_and_run() {
    let cfg = config(&[("trials", "3"), ("seed", "7")]);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { gtc_config_to_text(cfg, &mut text) }, GtcStatus::Ok);
    let body = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    unsafe { gtc_string_free(text) };
    assert!(body.contains("trials = 3"));

    let mut again = ptr::null_mut();
    let c = CString::new(body).unwrap();
    assert_eq!(unsafe { gtc_config_parse(c.as_ptr(), &mut again) }, GtcStatus::Ok);

    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let cmd = CString::new("theory-check").unwrap();
    assert_eq!(unsafe { gtc_run(cmd.as_ptr(), again, out.as_ptr()) }, GtcStatus::Ok, "{}", last_error());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.contains("passed,true"), "{metrics}");
    unsafe {
        gtc_config_free(again);
        gtc_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/graphtc.h")).unwrap();
    let version = unsafe { CStr::from_ptr(gtc_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
    for name in [
        "gtc_last_error",
        "gtc_version",
        "gtc_config_new",
        "gtc_config_parse",
        "gtc_config_set",
        "gtc_config_to_text",
        "gtc_config_free",
        "gtc_string_free",
        "gtc_observed_new",
        "gtc_observed_from_coo",
        "gtc_observed_shape",
        "gtc_observed_free",
        "gtc_graph_new",
        "gtc_graph_free",
        "gtc_complete",
        "gtc_tensor_dims",
        "gtc_tensor_copy",
        "gtc_tensor_free",
        "gtc_run",
        "GTC_STATUS_NOT_CONVERGED = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(dir) = tempfile::tempdir() else { return };
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"graphtc.h\"\nint main(void) { GtcConfig *c = 0; return gtc_config_new(&c) == GTC_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    match std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include]).arg(&src).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler found, header syntax not checked"),
    }
}

//! Drives the C ABI exactly as a foreign binding would: through raw
//! pointers and status codes.

use std::ffi::{CStr, CString};

use freeflex_capi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ffx_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_is_non_empty() {
    let v = unsafe { CStr::from_ptr(ffx_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn reference_device_pullin_roundtrip() {
    let mut dev: *mut FfxDevice = std::ptr::null_mut();
    let st = unsafe { ffx_device_reference(0.7e-6, 0.44e-6, &mut dev) };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    assert!(!dev.is_null());

    let mut v_pi = 0.0f64;
    let mut peak = 0.0f64;
    let st = unsafe {
        ffx_find_pullin(
            dev,
            FfxElectrodes::Internal,
            10.0,
            120,
            &mut v_pi,
            &mut peak,
        )
    };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    assert!(v_pi > 1.0 && v_pi < 10.0, "v_pi = {v_pi}");
    assert!(peak < 0.0, "onset peak should point down, got {peak}");

    let mut v_po = 0.0f64;
    let st = unsafe { ffx_find_pullout(dev, FfxElectrodes::Internal, 0.0, 120, &mut v_po) };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    assert!(v_po > 0.0 && v_po <= v_pi);

    unsafe { ffx_device_free(dev) };
}

#[test]
fn invalid_device_reports_config_error() {
    let mut dev: *mut FfxDevice = std::ptr::null_mut();
    // Stop height above the gap is rejected by validation.
    let st = unsafe { ffx_device_reference(0.5e-6, 0.9e-6, &mut dev) };
    assert_eq!(st, FfxStatus::InvalidConfig);
    assert!(last_error().contains("stop height"));
    assert!(dev.is_null());
}

#[test]
fn null_arguments_rejected() {
    let st = unsafe { ffx_device_reference(1e-6, 0.5e-6, std::ptr::null_mut()) };
    assert_eq!(st, FfxStatus::InvalidArgument);
    let mut v = 0.0;
    let st = unsafe {
        ffx_find_pullin(
            std::ptr::null(),
            FfxElectrodes::External,
            10.0,
            0,
            &mut v,
            std::ptr::null_mut(),
        )
    };
    assert_eq!(st, FfxStatus::InvalidArgument);
}

#[test]
fn device_from_toml_text() {
    let toml = CString::new(
        std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/switch_07um.toml"
        ))
        .expect("shipped config exists"),
    )
    .unwrap();
    let mut dev: *mut FfxDevice = std::ptr::null_mut();
    let st = unsafe { ffx_device_from_toml(toml.as_ptr(), &mut dev) };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    unsafe { ffx_device_free(dev) };
}

#[test]
fn fit_rf_matches_closed_form() {
    let mut r = 0.0f64;
    let mut c = 0.0f64;
    let st = unsafe { ffx_fit_rf(-30.0, 10e9, -0.45, 10e9, 50.0, &mut r, &mut c) };
    assert_eq!(st, FfxStatus::Ok);
    assert!((r - 0.8164).abs() < 0.8164 * 5e-3);
    assert!((c - 0.2103e-12).abs() < 0.2103e-12 * 5e-3);

    let mut db = 0.0f64;
    let st = unsafe { ffx_shunt_s21_db(r, 0.0, c, 50.0, 1, 10e9, &mut db) };
    assert_eq!(st, FfxStatus::Ok);
    assert!((db + 30.0).abs() < 0.01, "isolation {db}");
    let st = unsafe { ffx_shunt_s21_db(r, 0.0, c, 50.0, 0, 10e9, &mut db) };
    assert_eq!(st, FfxStatus::Ok);
    assert!((db + 0.45).abs() < 0.01, "insertion {db}");
}

#[test]
fn unreachable_rf_target_reports_model_error() {
    let st = unsafe {
        ffx_fit_rf(
            5.0,
            10e9,
            -0.45,
            10e9,
            50.0,
            std::ptr::null_mut(),
            std::ptr::null_mut(),
        )
    };
    assert_eq!(st, FfxStatus::ModelError);
    assert!(last_error().contains("unreachable"));
}

#[test]
fn unstick_scenario_via_ffi() {
    let mut dev: *mut FfxDevice = std::ptr::null_mut();
    let st = unsafe { ffx_device_reference(0.7e-6, 0.44e-6, &mut dev) };
    assert_eq!(st, FfxStatus::Ok);
    let mut stuck = -1i32;
    let mut v_unstick = 0.0f64;
    let st = unsafe { ffx_unstick(dev, 2.0, 0.0, 12.0, 160, &mut stuck, &mut v_unstick) };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    assert_eq!(stuck, 1);
    assert!(v_unstick > 0.0 && v_unstick < 12.0);
    // A weak offset releases by itself.
    let st = unsafe { ffx_unstick(dev, 1.0, 0.0, 12.0, 160, &mut stuck, &mut v_unstick) };
    assert_eq!(st, FfxStatus::Ok, "{}", last_error());
    assert_eq!(stuck, 0);
    unsafe { ffx_device_free(dev) };
}

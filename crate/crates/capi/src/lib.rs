//! C ABI for the freeflex simulator: opaque device handles, status codes,
//! and a thread-local last-error message. Designed for language bindings;
//! the generated header lands in `include/freeflex.h`.
//!
//! Conventions: every fallible function returns [`FfxStatus`] and writes its
//! results through out-pointers, which are only written on `Ok`. Pointers
//! must be non-null and, for handles, come from this library.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use freeflex::device::{presets, validate_spec, ElectrodeKind, ValidatedSpec};
use freeflex::electrostatic::ActuationState;
use freeflex::rf::{fit_lumped, shunt_sparams, SwitchCircuit, SwitchState};
use freeflex::solver::{find_pullin, find_pullout_with_base, SolverSettings};
use freeflex::stiction::{stuck_state, unstick_voltage, AdhesionModel, StuckOutcome};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfxStatus {
    Ok = 0,
    /// A pointer argument was null or otherwise unusable.
    InvalidArgument = 1,
    /// Configuration text failed to parse or validate.
    InvalidConfig = 2,
    /// The solver failed (no convergence, no pull-in below the cap, ...).
    SolverFailed = 3,
    /// The model rejected the inputs (bad grid, unreachable target, ...).
    ModelError = 4,
    /// A panic was caught at the boundary; state may be stale.
    Internal = 5,
}

/// Electrode group selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FfxElectrodes {
    Internal = 0,
    External = 1,
}

impl From<FfxElectrodes> for ElectrodeKind {
    fn from(e: FfxElectrodes) -> Self {
        match e {
            FfxElectrodes::Internal => ElectrodeKind::Internal,
            FfxElectrodes::External => ElectrodeKind::External,
        }
    }
}

/// Opaque validated device handle.
pub struct FfxDevice {
    device: ValidatedSpec,
}

/// Last error message of the current thread; valid until the next failing
/// call on this thread. Never null.
#[no_mangle]
pub extern "C" fn ffx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ffx_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

fn guard<F: FnOnce() -> FfxStatus>(f: F) -> FfxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            FfxStatus::Internal
        }
    }
}

/// Builds the calibrated reference switch. `gap_m` is the air gap to the
/// dielectric top, `stop_height_m` the travel to the ohmic contact surface.
///
/// # Safety
/// `out` must be a valid pointer to an `FfxDevice*` slot.
#[no_mangle]
pub unsafe extern "C" fn ffx_device_reference(
    gap_m: f64,
    stop_height_m: f64,
    out: *mut *mut FfxDevice,
) -> FfxStatus {
    guard(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return FfxStatus::InvalidArgument;
        }
        match validate_spec(presets::switch_device(gap_m, stop_height_m)) {
            Ok(device) => {
                *out = Box::into_raw(Box::new(FfxDevice { device }));
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::InvalidConfig
            }
        }
    })
}

/// Parses a scenario TOML (the same schema the CLI reads) and returns its
/// validated device.
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn ffx_device_from_toml(
    toml_text: *const c_char,
    out: *mut *mut FfxDevice,
) -> FfxStatus {
    guard(|| {
        if toml_text.is_null() || out.is_null() {
            set_error("null pointer argument");
            return FfxStatus::InvalidArgument;
        }
        let text = match CStr::from_ptr(toml_text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not valid UTF-8");
                return FfxStatus::InvalidArgument;
            }
        };
        let config = match freeflex::config::ScenarioConfig::from_toml_str(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(&e.to_string());
                return FfxStatus::InvalidConfig;
            }
        };
        match validate_spec(config.device) {
            Ok(device) => {
                *out = Box::into_raw(Box::new(FfxDevice { device }));
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::InvalidConfig
            }
        }
    })
}

/// Frees a device handle. Null is ignored.
///
/// # Safety
/// `device` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ffx_device_free(device: *mut FfxDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

fn settings(n_elements: u32) -> SolverSettings {
    let mut s = SolverSettings::default();
    if n_elements > 0 {
        s.n_elements = n_elements as usize;
    }
    s
}

/// Pull-in voltage of one electrode group; also reports the peak stable
/// displacement at onset (signed, toward the substrate negative).
///
/// # Safety
/// `device` must be a live handle; out-pointers valid or null (skipped).
#[no_mangle]
pub unsafe extern "C" fn ffx_find_pullin(
    device: *const FfxDevice,
    electrodes: FfxElectrodes,
    v_max: f64,
    n_elements: u32,
    out_v_pullin: *mut f64,
    out_peak_displacement_m: *mut f64,
) -> FfxStatus {
    guard(|| {
        let Some(dev) = device.as_ref() else {
            set_error("device handle is null");
            return FfxStatus::InvalidArgument;
        };
        match find_pullin(&dev.device, electrodes.into(), v_max, &settings(n_elements)) {
            Ok(pi) => {
                if !out_v_pullin.is_null() {
                    *out_v_pullin = pi.v_pullin;
                }
                if !out_peak_displacement_m.is_null() {
                    *out_peak_displacement_m = pi.peak_displacement;
                }
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::SolverFailed
            }
        }
    })
}

/// Pull-out (release) voltage of one electrode group with an optional
/// internal charging offset held during the descent.
///
/// # Safety
/// As for [`ffx_find_pullin`].
#[no_mangle]
pub unsafe extern "C" fn ffx_find_pullout(
    device: *const FfxDevice,
    electrodes: FfxElectrodes,
    v_charge_internal: f64,
    n_elements: u32,
    out_v_pullout: *mut f64,
) -> FfxStatus {
    guard(|| {
        let Some(dev) = device.as_ref() else {
            set_error("device handle is null");
            return FfxStatus::InvalidArgument;
        };
        let base = ActuationState {
            v_charge_internal,
            ..ActuationState::rest()
        };
        match find_pullout_with_base(&dev.device, electrodes.into(), &base, &settings(n_elements)) {
            Ok(po) => {
                if !out_v_pullout.is_null() {
                    *out_v_pullout = po.v_pullout;
                }
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::SolverFailed
            }
        }
    })
}

/// Classifies the zero-drive state under an internal charging offset and,
/// when stuck, finds the external unstick voltage. `out_stuck` receives 0/1;
/// `out_v_unstick` is written only for stuck states.
///
/// # Safety
/// As for [`ffx_find_pullin`].
#[no_mangle]
pub unsafe extern "C" fn ffx_unstick(
    device: *const FfxDevice,
    v_charge_internal: f64,
    adhesion_n: f64,
    v_ext_max: f64,
    n_elements: u32,
    out_stuck: *mut i32,
    out_v_unstick: *mut f64,
) -> FfxStatus {
    guard(|| {
        let Some(dev) = device.as_ref() else {
            set_error("device handle is null");
            return FfxStatus::InvalidArgument;
        };
        let s = settings(n_elements);
        let adhesion = AdhesionModel {
            pull_off_per_contact: adhesion_n,
        };
        match stuck_state(&dev.device, v_charge_internal, &adhesion, &s) {
            Ok(StuckOutcome::Stuck(stuck)) => {
                match unstick_voltage(&dev.device, &stuck, v_ext_max, &s) {
                    Ok(v) => {
                        if !out_stuck.is_null() {
                            *out_stuck = 1;
                        }
                        if !out_v_unstick.is_null() {
                            *out_v_unstick = v;
                        }
                        FfxStatus::Ok
                    }
                    Err(e) => {
                        set_error(&e.to_string());
                        FfxStatus::SolverFailed
                    }
                }
            }
            Ok(StuckOutcome::NotStuck(_)) => {
                if !out_stuck.is_null() {
                    *out_stuck = 0;
                }
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::SolverFailed
            }
        }
    })
}

/// Closed-form lumped-circuit fit to isolation/insertion targets.
///
/// # Safety
/// Out-pointers must be valid or null (skipped).
#[no_mangle]
pub unsafe extern "C" fn ffx_fit_rf(
    isolation_db: f64,
    isolation_freq_hz: f64,
    insertion_db: f64,
    insertion_freq_hz: f64,
    z0: f64,
    out_r_down_ohm: *mut f64,
    out_c_up_f: *mut f64,
) -> FfxStatus {
    guard(|| {
        match fit_lumped(
            (isolation_db, isolation_freq_hz),
            (insertion_db, insertion_freq_hz),
            z0,
        ) {
            Ok(c) => {
                if !out_r_down_ohm.is_null() {
                    *out_r_down_ohm = c.r_down;
                }
                if !out_c_up_f.is_null() {
                    *out_c_up_f = c.c_up;
                }
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::ModelError
            }
        }
    })
}

/// |S21| in dB of the shunt switch at one frequency.
/// `down` selects the closed (1) or open (0) state.
///
/// # Safety
/// `out_s21_db` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn ffx_shunt_s21_db(
    r_down_ohm: f64,
    l_down_h: f64,
    c_up_f: f64,
    z0: f64,
    down: i32,
    freq_hz: f64,
    out_s21_db: *mut f64,
) -> FfxStatus {
    guard(|| {
        let circuit = SwitchCircuit {
            r_down: r_down_ohm,
            l_down: l_down_h,
            c_up: c_up_f,
            z0,
        };
        let state = if down != 0 {
            SwitchState::Down
        } else {
            SwitchState::Up
        };
        match shunt_sparams(&circuit, state, &[freq_hz]) {
            Ok(r) => {
                if !out_s21_db.is_null() {
                    *out_s21_db = r.s21_db(0);
                }
                FfxStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                FfxStatus::ModelError
            }
        }
    })
}

// Copyright 2026 flsim Contributors
// SPDX-License-Identifier: Apache-2.0

//! C ABI for the flsim simulator.
//!
//! Conventions:
//! - every fallible call returns an [`FlsimStatus`]; `FLSIM_STATUS_OK` is 0;
//! - handles are opaque pointers created by `flsim_*_new`/`_from_json` and
//!   released by the matching `_free`;
//! - strings returned through `char**` are UTF-8, allocated by this library,
//!   and must be released with `flsim_string_free`;
//! - the last error message of the calling thread is available from
//!   `flsim_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use flsim::atomic::{named_state, StateLabel};
use flsim::dynamics::PropagatorCache;
use flsim::experiment::{run_experiment_to_dir, ExperimentConfig, ExperimentKind};
use flsim::protocol::{pure_state, ConversionKind, ProtocolRunner};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

/// Result codes shared by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlsimStatus {
    /// Success.
    Ok = 0,
    /// Malformed or inconsistent configuration.
    InvalidConfig = 1,
    /// Numerical failure inside the solvers.
    Numerical = 2,
    /// Filesystem failure.
    Io = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// An internal panic was caught at the boundary.
    Panic = 6,
}

fn set_last_error(msg: &str) {
    let cstring = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn classify(err: &flsim::experiment::ExperimentError) -> FlsimStatus {
    match err.exit_code() {
        1 => FlsimStatus::InvalidConfig,
        _ => match err {
            flsim::experiment::ExperimentError::Io { .. } => FlsimStatus::Io,
            _ => FlsimStatus::Numerical,
        },
    }
}

/// Opaque experiment configuration handle.
pub struct FlsimConfig {
    inner: ExperimentConfig,
}

/// Opaque result of a conversion run.
pub struct FlsimConversionResult {
    target_population: f64,
    purity: f64,
    simulated_time_s: f64,
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, FlsimStatus> {
    if ptr.is_null() {
        return Err(FlsimStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| FlsimStatus::InvalidUtf8)
}

fn guard<F: FnOnce() -> FlsimStatus>(f: F) -> FlsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic caught at the FFI boundary");
            FlsimStatus::Panic
        }
    }
}

/// Library version as a static, borrowed C string.
#[no_mangle]
pub extern "C" fn flsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Last error message of this thread, or null when no error was recorded.
/// The returned pointer stays valid until the next failing call on the same
/// thread; do not free it.
#[no_mangle]
pub extern "C" fn flsim_last_error() -> *const c_char {
    LAST_ERROR
        .with(|slot| slot.borrow().as_ref().map(|s| s.as_ptr()))
        .unwrap_or(std::ptr::null())
}

/// Releases a string allocated by this library.
///
/// # Safety
/// `ptr` must come from an flsim call that transfers string ownership and
/// must not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn flsim_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(unsafe { CString::from_raw(ptr) });
    }
}

/// Creates a configuration with the reference parameter set.
#[no_mangle]
pub extern "C" fn flsim_config_default(out: *mut *mut FlsimConfig) -> FlsimStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return FlsimStatus::NullPointer;
        }
        let handle = Box::new(FlsimConfig { inner: ExperimentConfig::default() });
        unsafe { *out = Box::into_raw(handle) };
        FlsimStatus::Ok
    })
}

/// Parses a configuration from a JSON document (unknown keys rejected).
///
/// # Safety
/// `json` must point to a NUL-terminated string; `out` must be a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn flsim_config_from_json(
    json: *const c_char,
    out: *mut *mut FlsimConfig,
) -> FlsimStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return FlsimStatus::NullPointer;
        }
        let text = match unsafe { cstr_arg(json) } {
            Ok(t) => t,
            Err(status) => {
                set_last_error("config JSON pointer is null or not UTF-8");
                return status;
            }
        };
        match ExperimentConfig::from_json(text) {
            Ok(cfg) => {
                unsafe { *out = Box::into_raw(Box::new(FlsimConfig { inner: cfg })) };
                FlsimStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                FlsimStatus::InvalidConfig
            }
        }
    })
}

/// Serializes a configuration back to JSON; the caller frees the string.
///
/// # Safety
/// `config` must be a live handle; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn flsim_config_to_json(
    config: *const FlsimConfig,
    out_json: *mut *mut c_char,
) -> FlsimStatus {
    guard(|| {
        if config.is_null() || out_json.is_null() {
            set_last_error("null handle");
            return FlsimStatus::NullPointer;
        }
        let cfg = unsafe { &*config };
        let json = serde_json::to_string_pretty(&cfg.inner).expect("config serializes");
        unsafe { *out_json = CString::new(json).expect("no NUL in JSON").into_raw() };
        FlsimStatus::Ok
    })
}

/// Releases a configuration handle.
///
/// # Safety
/// `config` must come from a `flsim_config_*` constructor and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn flsim_config_free(config: *mut FlsimConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Runs a named experiment, writing CSV tables and the JSON sidecar under
/// `out_dir`. On success `out_files_json` (when non-null) receives a JSON
/// array of the written paths; the caller frees it with
/// `flsim_string_free`.
///
/// # Safety
/// `config` must be a live handle; `experiment` and `out_dir` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn flsim_run_experiment(
    config: *const FlsimConfig,
    experiment: *const c_char,
    out_dir: *const c_char,
    out_files_json: *mut *mut c_char,
) -> FlsimStatus {
    guard(|| {
        if config.is_null() {
            set_last_error("config handle is null");
            return FlsimStatus::NullPointer;
        }
        let name = match unsafe { cstr_arg(experiment) } {
            Ok(s) => s,
            Err(status) => {
                set_last_error("experiment name pointer is null or not UTF-8");
                return status;
            }
        };
        let dir = match unsafe { cstr_arg(out_dir) } {
            Ok(s) => s,
            Err(status) => {
                set_last_error("output directory pointer is null or not UTF-8");
                return status;
            }
        };
        let Some(kind) = ExperimentKind::parse(name) else {
            set_last_error(&format!("unknown experiment '{name}'"));
            return FlsimStatus::InvalidConfig;
        };
        let cfg = unsafe { &*config };
        match run_experiment_to_dir(kind, &cfg.inner, Path::new(dir)) {
            Ok(files) => {
                if !out_files_json.is_null() {
                    let names: Vec<String> =
                        files.iter().map(|p| p.display().to_string()).collect();
                    let json = serde_json::to_string(&names).expect("paths serialize");
                    unsafe {
                        *out_files_json = CString::new(json).expect("no NUL").into_raw();
                    }
                }
                FlsimStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Runs one interconversion (1 = GHZ→W, 2 = W→GHZ) for the configured cycle
/// count and returns an opaque result handle.
///
/// # Safety
/// `config` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn flsim_run_conversion(
    config: *const FlsimConfig,
    conversion: i32,
    out: *mut *mut FlsimConversionResult,
) -> FlsimStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_last_error("null handle");
            return FlsimStatus::NullPointer;
        }
        let kind = match conversion {
            1 => ConversionKind::GhzToW,
            2 => ConversionKind::WToGhz,
            other => {
                set_last_error(&format!("conversion must be 1 or 2, got {other}"));
                return FlsimStatus::InvalidConfig;
            }
        };
        let cfg = unsafe { &*config };
        let result = (|| -> Result<FlsimConversionResult, flsim::experiment::ExperimentError> {
            let protocol = cfg.inner.build_protocol(kind)?;
            let cache = PropagatorCache::new();
            let mut runner = ProtocolRunner::new(&protocol, &cache);
            let rho0 = pure_state(kind.initial_label());
            let run = runner.run_cycles(&rho0, cfg.inner.n_cycles, 1, None)?;
            let target = named_state(kind.target_label());
            Ok(FlsimConversionResult {
                target_population: run.final_population(&target),
                purity: flsim::dynamics::purity(run.trajectory.final_state()),
                simulated_time_s: protocol.period() * cfg.inner.n_cycles as f64,
            })
        })();
        match result {
            Ok(r) => {
                unsafe { *out = Box::into_raw(Box::new(r)) };
                FlsimStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

/// Final population of the conversion target state.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flsim_conversion_target_population(
    result: *const FlsimConversionResult,
) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { &*result }.target_population
}

/// Purity of the final state.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flsim_conversion_purity(result: *const FlsimConversionResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { &*result }.purity
}

/// Total simulated time in seconds.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flsim_conversion_simulated_time(
    result: *const FlsimConversionResult,
) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    unsafe { &*result }.simulated_time_s
}

/// Releases a conversion result handle.
///
/// # Safety
/// `result` must come from `flsim_run_conversion` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn flsim_conversion_result_free(result: *mut FlsimConversionResult) {
    if !result.is_null() {
        drop(unsafe { Box::from_raw(result) });
    }
}

/// Overlap ⟨target|ρ_ss|target⟩ and purity of the Floquet steady state for a
/// conversion (1 = GHZ→W, 2 = W→GHZ) at the configured parameters.
///
/// # Safety
/// `config` must be a live handle; the out pointers, when non-null, must be
/// valid destinations.
#[no_mangle]
pub unsafe extern "C" fn flsim_steady_state_figures(
    config: *const FlsimConfig,
    conversion: i32,
    out_population: *mut f64,
    out_purity: *mut f64,
    out_spectral_gap_rad_s: *mut f64,
) -> FlsimStatus {
    guard(|| {
        if config.is_null() {
            set_last_error("config handle is null");
            return FlsimStatus::NullPointer;
        }
        let kind = match conversion {
            1 => ConversionKind::GhzToW,
            2 => ConversionKind::WToGhz,
            other => {
                set_last_error(&format!("conversion must be 1 or 2, got {other}"));
                return FlsimStatus::InvalidConfig;
            }
        };
        let cfg = unsafe { &*config };
        let result = (|| -> Result<_, flsim::experiment::ExperimentError> {
            let protocol = cfg.inner.build_protocol(kind)?;
            let cache = PropagatorCache::new();
            Ok(flsim::protocol::analyze_protocol_spectrum(&protocol, &cache)?)
        })();
        match result {
            Ok(spec) => {
                unsafe {
                    if !out_population.is_null() {
                        *out_population = spec.target_population;
                    }
                    if !out_purity.is_null() {
                        *out_purity = spec.purity;
                    }
                    if !out_spectral_gap_rad_s.is_null() {
                        *out_spectral_gap_rad_s = spec.spectral_gap;
                    }
                }
                FlsimStatus::Ok
            }
            Err(e) => {
                set_last_error(&e.to_string());
                classify(&e)
            }
        }
    })
}

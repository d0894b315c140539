//! C ABI over the rough-euler library.
//!
//! Conventions: every fallible call returns an [`RgeStatus`]; out
//! parameters are written only on `RGE_STATUS_OK`. Handles are opaque
//! and must be released with the matching `_free` function. The last
//! error message is kept per thread and read with
//! [`rge_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rough_euler::rough_path::{GeometricRoughPathGrid, PiecewiseLinearPath};
use rough_euler::solver::SolverError;

/// Status codes mirroring the CLI exit classes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RgeStatus {
    Ok = 0,
    /// Invalid configuration or argument.
    InvalidInput = 1,
    /// I/O or file-format failure.
    Io = 2,
    /// An experiment criterion failed.
    CriteriaFailed = 3,
    /// Numerical failure: blow-up or unsplittable step.
    Numerical = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 6,
    /// Index out of range.
    IndexOutOfRange = 7,
    /// Internal panic; consult the last error message.
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).unwrap_or_default();
    });
}

fn solver_status(e: &SolverError) -> RgeStatus {
    match e {
        SolverError::Config(_) | SolverError::RoughPath(_) | SolverError::Spectral(_) => {
            RgeStatus::InvalidInput
        }
        SolverError::UnsplittableStep { .. } | SolverError::BlowUp { .. } => RgeStatus::Numerical,
        SolverError::Io(_) => RgeStatus::Io,
    }
}

fn guard<F: FnOnce() -> RgeStatus>(f: F) -> RgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(msg);
            RgeStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, RgeStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(RgeStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        set_error(format!("invalid utf-8: {e}"));
        RgeStatus::InvalidUtf8
    })
}

/// Opaque piecewise-linear driver path.
pub struct RgePath(PiecewiseLinearPath);

/// Opaque canonical level-2 lift on a time grid.
pub struct RgeRoughPath(GeometricRoughPathGrid);

/// Last error message for the calling thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rge_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Samples a dyadic piecewise-linear Brownian path (see the library's
/// seeding scheme; identical seeds refine consistently across levels).
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn rge_path_brownian(
    seed: u64,
    level: u32,
    t_final: f64,
    dim: usize,
    out: *mut *mut RgePath,
) -> RgeStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return RgeStatus::NullPointer;
        }
        match rough_euler::rough_path::brownian_dyadic_path(seed, level, t_final, dim) {
            Ok(path) => {
                *out = Box::into_raw(Box::new(RgePath(path)));
                RgeStatus::Ok
            }
            Err(e) => {
                set_error(e);
                RgeStatus::InvalidInput
            }
        }
    })
}

/// Reads a path from CSV with header `t,z_1,...,z_K`.
///
/// # Safety
/// `csv_path` must be a valid C string; `out` as in [`rge_path_brownian`].
#[no_mangle]
pub unsafe extern "C" fn rge_path_from_csv(
    csv_path: *const c_char,
    out: *mut *mut RgePath,
) -> RgeStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return RgeStatus::NullPointer;
        }
        let file = match cstr(csv_path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match rough_euler::io::read_path_csv(Path::new(file)) {
            Ok(path) => {
                *out = Box::into_raw(Box::new(RgePath(path)));
                RgeStatus::Ok
            }
            Err(e) => {
                set_error(e);
                RgeStatus::Io
            }
        }
    })
}

/// Number of breakpoints of the path (segments + 1).
///
/// # Safety
/// `path` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_path_points(path: *const RgePath) -> usize {
    if path.is_null() {
        return 0;
    }
    (*path).0.times().len()
}

/// Driver dimension K.
///
/// # Safety
/// `path` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_path_dim(path: *const RgePath) -> usize {
    if path.is_null() {
        return 0;
    }
    (*path).0.dim()
}

/// # Safety
/// `path` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rge_path_free(path: *mut RgePath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Canonically lifts a path to its level-2 rough path on the same grid.
///
/// # Safety
/// `path` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rge_path_lift(
    path: *const RgePath,
    out: *mut *mut RgeRoughPath,
) -> RgeStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            set_error("null pointer");
            return RgeStatus::NullPointer;
        }
        let lift = GeometricRoughPathGrid::canonical_lift(&(*path).0);
        *out = Box::into_raw(Box::new(RgeRoughPath(lift)));
        RgeStatus::Ok
    })
}

/// Number of grid intervals of the lift.
///
/// # Safety
/// `lift` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_intervals(lift: *const RgeRoughPath) -> usize {
    if lift.is_null() {
        return 0;
    }
    (*lift).0.num_intervals()
}

/// Driver dimension K of the lift.
///
/// # Safety
/// `lift` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_dim(lift: *const RgeRoughPath) -> usize {
    if lift.is_null() {
        return 0;
    }
    (*lift).0.dim()
}

/// Increment over grid span [i, j]: writes K entries of Z to `z_out`
/// and K×K row-major entries of the second level to `zz_out`
/// (`zz[l*K+k] = ∫ Z^l dz^k`).
///
/// # Safety
/// `z_out` must hold K doubles and `zz_out` K·K doubles.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_increment(
    lift: *const RgeRoughPath,
    i: usize,
    j: usize,
    z_out: *mut f64,
    zz_out: *mut f64,
) -> RgeStatus {
    guard(|| {
        if lift.is_null() || z_out.is_null() || zz_out.is_null() {
            set_error("null pointer");
            return RgeStatus::NullPointer;
        }
        match (*lift).0.increment(i, j) {
            Ok(inc) => {
                std::ptr::copy_nonoverlapping(inc.z.as_ptr(), z_out, inc.z.len());
                std::ptr::copy_nonoverlapping(inc.zz.as_ptr(), zz_out, inc.zz.len());
                RgeStatus::Ok
            }
            Err(e) => {
                set_error(e);
                RgeStatus::IndexOutOfRange
            }
        }
    })
}

/// Largest Chen defect entry over all grid triples of the lift.
///
/// # Safety
/// `lift` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_max_chen_defect(lift: *const RgeRoughPath) -> f64 {
    if lift.is_null() {
        return f64::NAN;
    }
    (*lift).0.max_chen_defect()
}

/// Largest geometricity defect entry over all grid pairs of the lift.
///
/// # Safety
/// `lift` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_max_geometricity_defect(
    lift: *const RgeRoughPath,
) -> f64 {
    if lift.is_null() {
        return f64::NAN;
    }
    (*lift).0.max_geometricity_defect()
}

/// # Safety
/// `lift` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rge_roughpath_free(lift: *mut RgeRoughPath) {
    if !lift.is_null() {
        drop(Box::from_raw(lift));
    }
}

/// Summary of a completed simulation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct RgeSimSummary {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub final_time: f64,
    pub final_l2_vorticity: f64,
    pub final_sup_vorticity: f64,
    pub bkm_integral: f64,
    pub harmonic_constant: [f64; 2],
    /// 1 when the run stopped at the blow-up ceiling.
    pub blew_up: i32,
}

/// Parses a JSON solver configuration, runs it, and writes the standard
/// output layout (diagnostics.csv, snapshots/, report.json) into
/// `out_dir`. `summary` may be null.
///
/// # Safety
/// `config_json` and `out_dir` must be valid C strings.
#[no_mangle]
pub unsafe extern "C" fn rge_simulate_json(
    config_json: *const c_char,
    out_dir: *const c_char,
    summary: *mut RgeSimSummary,
) -> RgeStatus {
    guard(|| {
        let config_text = match cstr(config_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let out_path = match cstr(out_dir) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = match rough_euler::io::parse_solver_config(config_text.as_bytes()) {
            Ok(c) => c,
            Err(e) => {
                set_error(e);
                return RgeStatus::InvalidInput;
            }
        };
        let run = match rough_euler::solver::run(&config) {
            Ok(r) => r,
            Err(e) => {
                let status = solver_status(&e);
                set_error(e);
                return status;
            }
        };
        if let Err(e) = rough_euler::io::write_run_outputs(Path::new(out_path), &run) {
            set_error(e);
            return RgeStatus::Io;
        }
        if !summary.is_null() {
            *summary = RgeSimSummary {
                accepted_steps: run.accepted_steps,
                rejected_steps: run.rejected_steps,
                final_time: run.final_state.t,
                final_l2_vorticity: run.final_state.omega.l2_norm(),
                final_sup_vorticity: rough_euler::spectral::sup_norm(&run.final_state.omega),
                bkm_integral: run.final_state.bkm_integral,
                harmonic_constant: run.final_state.h_acc,
                blew_up: run.blow_up.is_some() as i32,
            };
        }
        if run.blow_up.is_some() {
            set_error("run stopped at the blow-up ceiling");
            return RgeStatus::Numerical;
        }
        RgeStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    #[test]
    fn brownian_lift_round_trip() {
        unsafe {
            let mut path: *mut RgePath = ptr::null_mut();
            let status = rge_path_brownian(9, 4, 1.0, 2, &mut path);
            assert_eq!(status, RgeStatus::Ok);
            assert_eq!(rge_path_dim(path), 2);
            assert_eq!(rge_path_points(path), 17);

            let mut lift: *mut RgeRoughPath = ptr::null_mut();
            assert_eq!(rge_path_lift(path, &mut lift), RgeStatus::Ok);
            assert_eq!(rge_roughpath_intervals(lift), 16);
            assert_eq!(rge_roughpath_dim(lift), 2);

            let mut z = [0.0_f64; 2];
            let mut zz = [0.0_f64; 4];
            assert_eq!(
                rge_roughpath_increment(lift, 0, 16, z.as_mut_ptr(), zz.as_mut_ptr()),
                RgeStatus::Ok
            );
            // Geometricity of the whole-span increment.
            let sym01 = 0.5 * (zz[1] + zz[2]);
            assert!((sym01 - 0.5 * z[0] * z[1]).abs() < 1e-12);
            assert!(rge_roughpath_max_chen_defect(lift) <= 1e-12);
            assert!(rge_roughpath_max_geometricity_defect(lift) <= 1e-12);

            assert_eq!(
                rge_roughpath_increment(lift, 0, 99, z.as_mut_ptr(), zz.as_mut_ptr()),
                RgeStatus::IndexOutOfRange
            );
            let msg = CStr::from_ptr(rge_last_error_message());
            assert!(msg.to_str().unwrap().contains("out of range"));

            rge_roughpath_free(lift);
            rge_path_free(path);
        }
    }

    #[test]
    fn invalid_inputs_are_reported() {
        unsafe {
            let mut path: *mut RgePath = ptr::null_mut();
            assert_eq!(
                rge_path_brownian(1, 3, -1.0, 2, &mut path),
                RgeStatus::InvalidInput
            );
            assert_eq!(
                rge_path_brownian(1, 3, 1.0, 2, ptr::null_mut()),
                RgeStatus::NullPointer
            );
            let missing = CString::new("/nonexistent/path.csv").unwrap();
            assert_eq!(
                rge_path_from_csv(missing.as_ptr(), &mut path),
                RgeStatus::Io
            );
        }
    }

    #[test]
    fn simulate_json_writes_outputs() {
        let dir = std::env::temp_dir().join(format!("rge_ffi_{}", std::process::id()));
        let config = r#"{
            "grid_n": 32,
            "t_final": 0.05,
            "dt_max": 0.0025,
            "driver": {"type": "brownian", "level": 4, "seed": 5},
            "xi": [{"modes": [{"n": [1, 0], "coeff_cos": [0.0, 0.2], "coeff_sin": [0.0, 0.0]}]}],
            "init": {"type": "taylor_green", "amp": 1.0}
        }"#;
        let config_c = CString::new(config).unwrap();
        let out_c = CString::new(dir.to_str().unwrap()).unwrap();
        let mut summary = RgeSimSummary::default();
        let status =
            unsafe { rge_simulate_json(config_c.as_ptr(), out_c.as_ptr(), &mut summary) };
        assert_eq!(status, RgeStatus::Ok);
        assert!(summary.accepted_steps >= 20);
        assert_eq!(summary.blew_up, 0);
        assert!((summary.final_l2_vorticity - 1.0).abs() < 1e-3);
        assert!(dir.join("diagnostics.csv").exists());
        assert!(dir.join("report.json").exists());
        assert!(dir.join("snapshots/omega_00000.rge2").exists());
        std::fs::remove_dir_all(&dir).ok();

        let bad = CString::new("{\"grid_n\": 63}").unwrap();
        let status = unsafe { rge_simulate_json(bad.as_ptr(), out_c.as_ptr(), &mut summary) };
        assert_eq!(status, RgeStatus::InvalidInput);
    }
}

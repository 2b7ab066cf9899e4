//! C ABI over the rbandit library.
//!
//! Every function returns an [`RbStatus`]; on failure the message is kept in
//! thread-local storage and read back with [`rb_last_error`]. Handles are
//! opaque and owned by the caller until passed to the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rbandit::aroe::solver::{solve_instance, SolvedAroe, SolverOptions};
use rbandit::belief::InformationState;
use rbandit::experiment::{run_experiment, ExperimentConfig, RunOptions};
use rbandit::markov::{stationary_distribution, validate_instance, BanditInstance, InstanceSpec, ValidationMode};
use rbandit::sim::{finite_horizon_oracle, OracleOptions};
use rbandit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed JSON, bad matrices, non-ergodic arms, bad configs.
    Validation = 3,
    /// Argument outside the instance (arm index, state, tau).
    Domain = 4,
    BufferTooSmall = 5,
    Convergence = 6,
    Numerical = 7,
    /// Grid or oracle exceeds its size cap.
    TooLarge = 8,
    Io = 9,
    Other = 10,
    Panic = 11,
}

/// Validated bandit instance.
pub struct RbInstance(BanditInstance);

/// Solved average-reward equation on a belief grid.
pub struct RbSolution(SolvedAroe);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> RbStatus {
    match e {
        Error::RowSum { .. } | Error::NegativeEntry { .. } | Error::Ergodicity { .. } | Error::Config(_) => {
            RbStatus::Validation
        }
        Error::Domain(_) | Error::ImpossibleObservation { .. } => RbStatus::Domain,
        Error::Convergence { .. } => RbStatus::Convergence,
        Error::Numerical(_) => RbStatus::Numerical,
        Error::GridTooLarge { .. } | Error::OracleTooLarge { .. } => RbStatus::TooLarge,
        Error::Io(_) => RbStatus::Io,
        Error::Fit(_) | Error::NoData(_) => RbStatus::Other,
    }
}

struct Fail(RbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RbStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RbStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RbStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(RbStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|e| Fail(RbStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn read_info(s: *const usize, tau: *const u64, k: usize) -> Result<InformationState, Fail> {
    non_null(s, "s")?;
    non_null(tau, "tau")?;
    let s = std::slice::from_raw_parts(s, k).to_vec();
    let tau = std::slice::from_raw_parts(tau, k).to_vec();
    Ok(InformationState::new(s, tau)?)
}

unsafe fn write_slice(values: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    non_null(out, "out")?;
    if len < values.len() {
        return Err(Fail(RbStatus::BufferTooSmall, format!("need {} slots, got {len}", values.len())));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn rb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `{"arms": [{"transition": [[..]], "rewards": [..]}, ..]}`.
/// `diagnostic` != 0 skips the ergodicity check.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rb_instance_from_json(json: *const c_char, diagnostic: i32, out: *mut *mut RbInstance) -> RbStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(json, "json")?;
        let spec: InstanceSpec = serde_json::from_str(text).map_err(|e| Fail(RbStatus::Validation, e.to_string()))?;
        let mode = if diagnostic != 0 { ValidationMode::Diagnostic } else { ValidationMode::Strict };
        let inst = validate_instance(&spec, mode)?;
        *out = Box::into_raw(Box::new(RbInstance(inst)));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from `rb_instance_from_json` or be null.
#[no_mangle]
pub unsafe extern "C" fn rb_instance_free(inst: *mut RbInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_instance_num_arms(inst: *const RbInstance, out: *mut usize) -> RbStatus {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(out, "out")?;
        *out = (*inst).0.k();
        Ok(())
    })
}

/// # Safety
/// `inst` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_instance_arm_size(inst: *const RbInstance, arm: usize, out: *mut usize) -> RbStatus {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(out, "out")?;
        let sizes = (*inst).0.sizes();
        *out = *sizes.get(arm).ok_or_else(|| Fail(RbStatus::Domain, format!("no arm {arm}")))?;
        Ok(())
    })
}

/// Stationary distribution of `arm` into `out[0..len]`.
///
/// # Safety
/// `inst` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rb_stationary(inst: *const RbInstance, arm: usize, out: *mut f64, len: usize) -> RbStatus {
    guard(|| {
        non_null(inst, "inst")?;
        let p = (*inst).0.transitions();
        let m = p.get(arm).ok_or_else(|| Fail(RbStatus::Domain, format!("no arm {arm}")))?;
        write_slice(&stationary_distribution(m)?, out, len)
    })
}

/// Solves the average-reward equation on the grid with threshold `tau0`.
///
/// # Safety
/// `inst` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_solve(inst: *const RbInstance, tau0: u32, out: *mut *mut RbSolution) -> RbStatus {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(out, "out")?;
        let i = &(*inst).0;
        let s = solve_instance(&i.transitions(), &i.rewards(), tau0, &SolverOptions::default())?;
        *out = Box::into_raw(Box::new(RbSolution(s)));
        Ok(())
    })
}

/// # Safety
/// `sol` must come from `rb_solve` or be null.
#[no_mangle]
pub unsafe extern "C" fn rb_solution_free(sol: *mut RbSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_solution_gain(sol: *const RbSolution, out: *mut f64) -> RbStatus {
    guard(|| {
        non_null(sol, "sol")?;
        non_null(out, "out")?;
        *out = (*sol).0.gain();
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rb_solution_grid_size(sol: *const RbSolution, out: *mut usize) -> RbStatus {
    guard(|| {
        non_null(sol, "sol")?;
        non_null(out, "out")?;
        *out = (*sol).0.grid().len();
        Ok(())
    })
}

/// Per-arm right-hand-side values at the information state (s, tau), both
/// of length `k`, into `out[0..len]`.
///
/// # Safety
/// `sol` must be a live handle; `s` and `tau` must hold `k` entries; `out`
/// must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rb_solution_action_values(
    sol: *const RbSolution,
    s: *const usize,
    tau: *const u64,
    k: usize,
    out: *mut f64,
    len: usize,
) -> RbStatus {
    guard(|| {
        non_null(sol, "sol")?;
        let sol = &(*sol).0;
        let info = read_info(s, tau, k)?;
        let sizes: Vec<usize> = sol.grid().sizes().to_vec();
        info.check_shape(&sizes)?;
        write_slice(&sol.action_values(&info), out, len)
    })
}

/// Optimal expected reward over `horizon` steps from (s, tau) with known
/// dynamics.
///
/// # Safety
/// `inst` must be a live handle; `s` and `tau` must hold `k` entries; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rb_oracle_value(
    inst: *const RbInstance,
    s: *const usize,
    tau: *const u64,
    k: usize,
    horizon: u32,
    out: *mut f64,
) -> RbStatus {
    guard(|| {
        non_null(inst, "inst")?;
        non_null(out, "out")?;
        let i = &(*inst).0;
        let info = read_info(s, tau, k)?;
        let opts = OracleOptions { keep_policy: false, ..Default::default() };
        *out = finite_horizon_oracle(&i.transitions(), &i.rewards(), &info, horizon, opts)?.value;
        Ok(())
    })
}

/// Runs an experiment from its JSON config. `out_dir` may be null to use the
/// config's directory; `workers` = 0 uses all cores. On success `*manifest`
/// receives the manifest as JSON, released with `rb_string_free`.
///
/// # Safety
/// `config_json` and non-null `out_dir` must be NUL-terminated; `manifest`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rb_run_experiment(
    config_json: *const c_char,
    out_dir: *const c_char,
    workers: usize,
    manifest: *mut *mut c_char,
) -> RbStatus {
    guard(|| {
        non_null(manifest, "manifest")?;
        let config = ExperimentConfig::from_json(read_str(config_json, "config_json")?)?;
        let output_dir = if out_dir.is_null() { None } else { Some(PathBuf::from(read_str(out_dir, "out_dir")?)) };
        let out = run_experiment(&config, &RunOptions { workers, seed: None, output_dir })?;
        let text = serde_json::to_string(&out.manifest).map_err(|e| Fail(RbStatus::Other, e.to_string()))?;
        *manifest = CString::new(text).map_err(|e| Fail(RbStatus::Other, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn rb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

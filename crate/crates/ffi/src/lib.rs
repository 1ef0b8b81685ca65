//! C ABI over the simulator.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a `RuStatus`; on
//! failure `ru_last_error` describes the most recent error on the calling
//! thread. Strings returned to C are released with `ru_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ris_urllc::baselines::{run_scheme, SchemeId};
use ris_urllc::experiments::emit::{to_csv, to_json, to_trace_csv};
use ris_urllc::experiments::{run_sweep, trial_seed, ConfigFile, SweepResult};
use ris_urllc::solver::complexity_counters;
use ris_urllc::{rate, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Singular = 4,
    Runtime = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuScheme {
    Proposed = 0,
    IdealPhase = 1,
    ShannonRate = 2,
    ShannonIdealPhase = 3,
    BinarySearch = 4,
    RandomPhase = 5,
    WithoutRis = 6,
}

impl From<RuScheme> for SchemeId {
    fn from(s: RuScheme) -> Self {
        SchemeId::ALL[s as usize]
    }
}

impl From<SchemeId> for RuScheme {
    fn from(s: SchemeId) -> Self {
        match s {
            SchemeId::Proposed => RuScheme::Proposed,
            SchemeId::IdealPhase => RuScheme::IdealPhase,
            SchemeId::ShannonRate => RuScheme::ShannonRate,
            SchemeId::ShannonIdealPhase => RuScheme::ShannonIdealPhase,
            SchemeId::BinarySearch => RuScheme::BinarySearch,
            SchemeId::RandomPhase => RuScheme::RandomPhase,
            SchemeId::WithoutRis => RuScheme::WithoutRis,
        }
    }
}

/// One aggregated output row. Missing means are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RuRow {
    pub scheme: RuScheme,
    pub sweep_value: f64,
    pub mean_sum_rate: f64,
    pub std_error: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_outer_iters: f64,
    pub mean_phase_evaluations: f64,
}

/// Outcome of one solve on one channel draw.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RuSolveSummary {
    pub sum_rate: f64,
    pub outer_iterations: u64,
    pub inner_iterations: u64,
    pub phase_evaluations: u64,
    pub converged: bool,
}

/// A parsed experiment config with pending overrides.
pub struct RuExperiment {
    file: ConfigFile,
}

/// Aggregated rows of one sweep.
pub struct RuResult {
    inner: SweepResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> RuStatus {
    match err {
        Error::InvalidGeometry(_) | Error::InvalidArgument(_) | Error::Domain { .. } => RuStatus::InvalidArgument,
        Error::Config(_) => RuStatus::Config,
        Error::Singular { .. } => RuStatus::Singular,
        Error::Io { .. } => RuStatus::Io,
        Error::Bracket { .. } | Error::Json(_) => RuStatus::Runtime,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (RuStatus, String)>) -> RuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RuStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside ris-urllc".into());
            RuStatus::Panic
        }
    }
}

fn fail(err: Error) -> (RuStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (RuStatus, String) {
    (RuStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (RuStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (RuStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (RuStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn boxed_out<T>(out: *mut *mut T, value: T) -> Result<(), (RuStatus, String)> {
    write_out(out, Box::into_raw(Box::new(value)))
}

unsafe fn string_out(out: *mut *mut c_char, s: String) -> Result<(), (RuStatus, String)> {
    let c = CString::new(s).map_err(|_| (RuStatus::Runtime, "output contains a nul byte".into()))?;
    write_out(out, c.into_raw())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ru_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a TOML config from a nul-terminated string.
///
/// # Safety
/// `text` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_from_str(text: *const c_char, out: *mut *mut RuExperiment) -> RuStatus {
    guard(|| {
        let text = read_str(text, "config text")?;
        let file = ConfigFile::parse(text).map_err(fail)?;
        file.resolve().map_err(fail)?;
        boxed_out(out, RuExperiment { file })
    })
}

/// Loads a TOML config file.
///
/// # Safety
/// `path` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_load(path: *const c_char, out: *mut *mut RuExperiment) -> RuStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        let file = ConfigFile::load(Path::new(path)).map_err(fail)?;
        file.resolve().map_err(fail)?;
        boxed_out(out, RuExperiment { file })
    })
}

/// # Safety
/// `exp` must come from `ru_experiment_load` or `ru_experiment_from_str`, or be null.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_free(exp: *mut RuExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

unsafe fn with_experiment(
    exp: *mut RuExperiment,
    f: impl FnOnce(&mut RuExperiment) -> Result<(), (RuStatus, String)>,
) -> RuStatus {
    guard(|| match exp.as_mut() {
        Some(e) => f(e),
        None => Err(null("experiment")),
    })
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_set_seed(exp: *mut RuExperiment, seed: u64) -> RuStatus {
    with_experiment(exp, |e| {
        e.file.run.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_set_trials(exp: *mut RuExperiment, trials: u64) -> RuStatus {
    with_experiment(exp, |e| {
        if trials == 0 || trials > i64::MAX as u64 {
            return Err((RuStatus::InvalidArgument, format!("trials must be positive, got {trials}")));
        }
        e.file.run.trials = trials as i64;
        Ok(())
    })
}

/// Worker threads for `ru_experiment_run`; 0 selects the default.
///
/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_set_threads(exp: *mut RuExperiment, threads: usize) -> RuStatus {
    with_experiment(exp, |e| {
        e.file.run.threads = (threads > 0).then_some(threads);
        Ok(())
    })
}

/// Runs the configured sweep. Output settings in the config are ignored;
/// render the result with `ru_result_to_csv` or `ru_result_to_json`.
///
/// # Safety
/// `exp` must be a live experiment handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_run(exp: *mut RuExperiment, out: *mut *mut RuResult) -> RuStatus {
    with_experiment(exp, |e| {
        let cfg = e.file.resolve().map_err(fail)?;
        let inner = run_sweep(&cfg).map_err(fail)?;
        boxed_out(out, RuResult { inner })
    })
}

/// Solves trial `trial` of the experiment's base system with one scheme.
///
/// # Safety
/// `exp` must be a live experiment handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_experiment_solve(
    exp: *mut RuExperiment,
    scheme: RuScheme,
    trial: u64,
    out: *mut RuSolveSummary,
) -> RuStatus {
    with_experiment(exp, |e| {
        let cfg = e.file.resolve().map_err(fail)?;
        let sys = cfg.base;
        let t = sys.trial(trial_seed(cfg.root_seed, trial)).map_err(fail)?;
        let state = run_scheme(scheme.into(), &t.channels, &t.theta0, &sys.solver, &t.params, t.seed)
            .map_err(fail)?;
        let report = complexity_counters(&state);
        write_out(
            out,
            RuSolveSummary {
                sum_rate: state.rate.total,
                outer_iterations: report.outer_iterations,
                inner_iterations: report.inner_iterations,
                phase_evaluations: report.phase_evaluations,
                converged: state.converged,
            },
        )
    })
}

/// # Safety
/// `res` must come from `ru_experiment_run`, or be null.
#[no_mangle]
pub unsafe extern "C" fn ru_result_free(res: *mut RuResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `res` must be a live result handle or null.
#[no_mangle]
pub unsafe extern "C" fn ru_result_row_count(res: *const RuResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.rows.len())
}

/// # Safety
/// `res` must be a live result handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_result_row(res: *const RuResult, index: usize, out: *mut RuRow) -> RuStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("result"))?;
        let rows = &res.inner.rows;
        let r = rows.get(index).ok_or_else(|| {
            (RuStatus::InvalidArgument, format!("row {index} out of range ({} rows)", rows.len()))
        })?;
        write_out(
            out,
            RuRow {
                scheme: r.scheme.into(),
                sweep_value: r.sweep_value,
                mean_sum_rate: r.mean_sum_rate.unwrap_or(f64::NAN),
                std_error: r.stderr.unwrap_or(f64::NAN),
                trials: r.trials,
                failures: r.failures,
                mean_outer_iters: r.mean_outer_iters.unwrap_or(f64::NAN),
                mean_phase_evaluations: r.complexity.phase_evaluations,
            },
        )
    })
}

/// Renders the result as CSV; `trace` selects the per-iteration layout.
///
/// # Safety
/// `res` must be a live result handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_result_to_csv(res: *const RuResult, trace: bool, out: *mut *mut c_char) -> RuStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("result"))?;
        let text = if trace { to_trace_csv(&res.inner) } else { to_csv(&res.inner) };
        string_out(out, text)
    })
}

/// # Safety
/// `res` must be a live result handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_result_to_json(res: *const RuResult, out: *mut *mut c_char) -> RuStatus {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("result"))?;
        string_out(out, to_json(&res.inner).map_err(fail)?)
    })
}

/// # Safety
/// `s` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn ru_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Stable lowercase name of a scheme; never null.
#[no_mangle]
pub extern "C" fn ru_scheme_name(scheme: RuScheme) -> *const c_char {
    let name: &'static CStr = match scheme {
        RuScheme::Proposed => c"proposed",
        RuScheme::IdealPhase => c"ideal_phase",
        RuScheme::ShannonRate => c"shannon_rate",
        RuScheme::ShannonIdealPhase => c"shannon_ideal_phase",
        RuScheme::BinarySearch => c"binary_search",
        RuScheme::RandomPhase => c"random_phase",
        RuScheme::WithoutRis => c"without_ris",
    };
    name.as_ptr()
}

/// Inverse Gaussian tail function for `eps` in (0, 1).
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_q_inv(eps: f64, out: *mut f64) -> RuStatus {
    guard(|| write_out(out, rate::q_inv(eps).map_err(fail)?))
}

/// Finite-blocklength rate in bit/s/Hz; may be negative at low SINR.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ru_fbl_rate(sinr: f64, blocklength: f64, eps: f64, out: *mut f64) -> RuStatus {
    guard(|| write_out(out, rate::fbl_rate(sinr, blocklength, eps).map_err(fail)?))
}

/// Channel dispersion in bit^2; NaN for a negative SINR.
#[no_mangle]
pub extern "C" fn ru_dispersion(sinr: f64) -> f64 {
    if sinr >= 0.0 {
        rate::dispersion(sinr)
    } else {
        f64::NAN
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_mapping_round_trips() {
        for s in SchemeId::ALL {
            assert_eq!(SchemeId::from(RuScheme::from(s)), s);
            let name = unsafe { CStr::from_ptr(ru_scheme_name(s.into())) };
            assert_eq!(name.to_str().unwrap(), s.label());
        }
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), RuStatus::Config);
        assert_eq!(status_of(&Error::Domain { what: "eps", value: 2.0 }), RuStatus::InvalidArgument);
        assert_eq!(
            status_of(&Error::Singular { condition: 1e9, threshold: 1e6 }),
            RuStatus::Singular
        );
        assert_eq!(status_of(&Error::io("p", std::io::Error::other("x"))), RuStatus::Io);
    }

    #[test]
    fn panics_become_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, RuStatus::Panic);
        assert!(!ru_last_error().is_null());
    }
}

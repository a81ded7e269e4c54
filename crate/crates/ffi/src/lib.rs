//! C ABI over `maslov_sturm`: opaque problem/analysis handles, integer status
//! codes and a thread-local last-error message.
//!
//! Every function returns an `MsStatus`; outputs go through pointer arguments.
//! Handles are freed with their `_free` function; strings returned by the
//! library with `ms_string_free`.

use maslov_sturm::cli::{self, AnalyzeOptions, Analysis};
use maslov_sturm::perturb::{perturbation_stability_with, PerturbOptions};
use maslov_sturm::quadruple::Quadruple;
use maslov_sturm::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes; the parse/admissibility/final-focal values match the CLI
/// exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    /// numerical failure (cluster, charting, symplecticity, …)
    Numerical = 1,
    Parse = 2,
    Admissibility = 3,
    FinalInstantFocal = 4,
    NullPointer = 5,
    InvalidUtf8 = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A validated problem (quadruple).
pub struct MsProblem {
    q: Quadruple,
}

/// Result of `ms_analyze`.
pub struct MsAnalysis {
    a: Analysis,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match cli::exit_code(e) {
        2 => MsStatus::Parse,
        3 => MsStatus::Admissibility,
        4 => MsStatus::FinalInstantFocal,
        _ => MsStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), MsStatus>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

fn lib<T>(r: maslov_sturm::Result<T>) -> Result<T, MsStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, MsStatus> {
    if p.is_null() {
        set_error("null string argument".into());
        return Err(MsStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8".into());
        MsStatus::InvalidUtf8
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, MsStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        MsStatus::NullPointer
    })
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, MsStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        MsStatus::NullPointer
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

/// Message of the last failed call on this thread, or NULL. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse a problem file's JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out_problem` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_from_json(json: *const c_char, out_problem: *mut *mut MsProblem) -> MsStatus {
    guard(|| {
        let o = out(out_problem)?;
        *o = ptr::null_mut();
        let q = lib(cli::parse_problem(str_arg(json)?))?;
        *o = Box::into_raw(Box::new(MsProblem { q }));
        Ok(())
    })
}

/// A built-in problem: "harmonic", "counterexample", "evaporation" or
/// "evaporation-perturbed".
///
/// # Safety
/// `name` must be a nul-terminated string; `out_problem` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_builtin(name: *const c_char, out_problem: *mut *mut MsProblem) -> MsStatus {
    guard(|| {
        let o = out(out_problem)?;
        *o = ptr::null_mut();
        let name = str_arg(name)?;
        let base = name.strip_suffix("-perturbed").unwrap_or(name);
        let problems = lib(cli::builtin_problems(base))?;
        let q = problems.into_iter().find(|(id, _)| id == name).map(|(_, q)| q).ok_or_else(|| {
            set_error(format!("`{name}` has no problem file"));
            MsStatus::Parse
        })?;
        *o = Box::into_raw(Box::new(MsProblem { q }));
        Ok(())
    })
}

/// The problem serialized as problem-file JSON; free with `ms_string_free`.
///
/// # Safety
/// `problem` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_to_json(problem: *const MsProblem, out_json: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let o = out(out_json)?;
        *o = into_c_string(cli::to_json_string(&cli::problem_json(&handle(problem)?.q)));
        Ok(())
    })
}

/// Dimension n of the problem.
///
/// # Safety
/// `problem` must be a live handle; `out_n` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_dim(problem: *const MsProblem, out_n: *mut usize) -> MsStatus {
    guard(|| {
        *out(out_n)? = handle(problem)?.q.n();
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_problem_free(problem: *mut MsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Focal instants and Maslov index (steps = 0 and tol <= 0 select the
/// defaults 4096 and 1e-9); `spectral` additionally runs the spectral check.
///
/// # Safety
/// `problem` must be a live handle; `out_analysis` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_analyze(
    problem: *const MsProblem,
    steps: usize,
    tol: f64,
    spectral: bool,
    out_analysis: *mut *mut MsAnalysis,
) -> MsStatus {
    guard(|| {
        let o = out(out_analysis)?;
        *o = ptr::null_mut();
        let q = &handle(problem)?.q;
        let d = AnalyzeOptions::default();
        let opts = AnalyzeOptions {
            steps: if steps == 0 { d.steps } else { steps },
            tol: if tol > 0.0 { tol } else { d.tol },
            spectral,
        };
        let a = lib(cli::analyze("problem", q, &opts))?;
        *o = Box::into_raw(Box::new(MsAnalysis { a }));
        Ok(())
    })
}

/// Maslov index μ and focal index i_foc.
///
/// # Safety
/// `analysis` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_indices(analysis: *const MsAnalysis, out_mu: *mut i64, out_i_foc: *mut i64) -> MsStatus {
    guard(|| {
        let a = &handle(analysis)?.a;
        *out(out_mu)? = a.maslov.mu;
        *out(out_i_foc)? = maslov_sturm::focal::focal_index(&a.maslov.records);
        Ok(())
    })
}

/// Number of focal records.
///
/// # Safety
/// `analysis` must be a live handle; `out_count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_focal_count(analysis: *const MsAnalysis, out_count: *mut usize) -> MsStatus {
    guard(|| {
        *out(out_count)? = handle(analysis)?.a.maslov.records.len();
        Ok(())
    })
}

/// Focal record `index`: instant, multiplicity, signature, degenerate flag.
///
/// # Safety
/// `analysis` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_focal_record(
    analysis: *const MsAnalysis,
    index: usize,
    out_t: *mut f64,
    out_multiplicity: *mut usize,
    out_signature: *mut i64,
    out_degenerate: *mut bool,
) -> MsStatus {
    guard(|| {
        let recs = &handle(analysis)?.a.maslov.records;
        let r = recs.get(index).ok_or_else(|| {
            set_error(format!("focal record {index} out of range ({} records)", recs.len()));
            MsStatus::OutOfRange
        })?;
        *out(out_t)? = r.t;
        *out(out_multiplicity)? = r.multiplicity;
        *out(out_signature)? = r.signature;
        *out(out_degenerate)? = r.degenerate_flag;
        Ok(())
    })
}

/// Spectral index; `out_available` is false unless the analysis ran with
/// `spectral`.
///
/// # Safety
/// `analysis` must be a live handle; the outputs valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_spectral_index(
    analysis: *const MsAnalysis,
    out_available: *mut bool,
    out_i_spec: *mut i64,
) -> MsStatus {
    guard(|| {
        let s = &handle(analysis)?.a.spectral;
        *out(out_available)? = s.is_some();
        *out(out_i_spec)? = s.as_ref().map_or(0, |s| s.i_spec);
        Ok(())
    })
}

/// The JSON report (sorted keys); free with `ms_string_free`.
///
/// # Safety
/// `analysis` must be a live handle; `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_report_json(analysis: *const MsAnalysis, out_json: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let o = out(out_json)?;
        *o = into_c_string(cli::to_json_string(&handle(analysis)?.a.report));
        Ok(())
    })
}

/// The t,det_A,n_plus_in_current_chart,segment_id trace; free with
/// `ms_string_free`.
///
/// # Safety
/// `analysis` must be a live handle; `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_trace_csv(analysis: *const MsAnalysis, out_csv: *mut *mut c_char) -> MsStatus {
    guard(|| {
        let o = out(out_csv)?;
        *o = into_c_string(cli::trace_csv(&handle(analysis)?.a.maslov));
        Ok(())
    })
}

/// # Safety
/// `analysis` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_analysis_free(analysis: *mut MsAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// Perturbation sweep: number of admissible trials and of trials with μ
/// unchanged. Optionally the full sweep as JSON (pass NULL to skip).
///
/// # Safety
/// `problem` must be a live handle; the counts valid pointers; `out_json`
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_perturb(
    problem: *const MsProblem,
    epsilon: f64,
    trials: usize,
    seed: u64,
    out_admissible: *mut usize,
    out_mu_unchanged: *mut usize,
    out_json: *mut *mut c_char,
) -> MsStatus {
    guard(|| {
        let q = &handle(problem)?.q;
        if !(epsilon >= 0.0) {
            set_error(format!("epsilon {epsilon} must be non-negative"));
            return Err(MsStatus::OutOfRange);
        }
        let rep = lib(perturbation_stability_with(q, epsilon, trials, seed, &PerturbOptions::default()))?;
        *out(out_admissible)? = rep.admissible;
        *out(out_mu_unchanged)? = rep.mu_unchanged;
        if let Some(o) = out_json.as_mut() {
            *o = into_c_string(cli::to_json_string(&cli::perturbation_json(&rep)));
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

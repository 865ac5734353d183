//! C interface to the unit-commitment solver.
//!
//! Handles are opaque and owned by the caller once returned; each has a
//! matching `_free`. Every fallible call returns a [`ScucStatus`] and, on
//! failure, leaves a message readable through [`scuc_last_error_message`]
//! on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;
use std::time::Duration;

use scuc_core::instance::Instance;
use scuc_core::network::SensitivitySet;
use scuc_core::pipeline::{run, RunMode, RunSettings, RunStatus};
use scuc_core::schedule::Schedule;
use scuc_core::separation::{SeparationConfig, SeparationMode, Workers};
use scuc_core::validate::{check_schedule, Tolerances};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScucStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// malformed or inconsistent instance or schedule data
    InvalidData = 3,
    InvalidArgument = 4,
    Io = 5,
    /// no feasible schedule exists
    Infeasible = 6,
    /// the time limit passed before any schedule was found
    NoIncumbent = 7,
    SolverFailure = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScucMode {
    Monolithic = 0,
    Td = 1,
    TdR = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScucSeparation {
    Dynamic = 0,
    Filtering = 1,
    Enumerate = 2,
}

/// Solve settings. Start from [`scuc_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScucSolveOptions {
    pub mode: ScucMode,
    pub separation: ScucSeparation,
    pub s_i: u32,
    pub s_r: u32,
    pub dt: u32,
    pub ds: u32,
    pub gap_sub: f64,
    pub gap_final: f64,
    pub time_limit_seconds: f64,
    /// 0 uses the available parallelism
    pub threads: u32,
    pub rins: bool,
    pub rins_window: u32,
    pub rins_stride: u32,
}

/// Parsed and validated problem data.
pub struct ScucInstance {
    instance: Arc<Instance>,
}

/// A schedule bound to the instance it was solved or parsed for.
pub struct ScucSchedule {
    instance: Arc<Instance>,
    schedule: Schedule,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: ScucStatus, message: impl Into<String>) -> ScucStatus {
    set_error(message);
    status
}

fn guard<F>(f: F) -> ScucStatus
where
    F: FnOnce() -> ScucStatus,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ScucStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ScucStatus> {
    if p.is_null() {
        return Err(fail(ScucStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ScucStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn scuc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn scuc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn scuc_solve_options_default() -> ScucSolveOptions {
    ScucSolveOptions {
        mode: ScucMode::TdR,
        separation: ScucSeparation::Dynamic,
        s_i: 6,
        s_r: 6,
        dt: 6,
        ds: 2,
        gap_sub: 0.01,
        gap_final: 0.001,
        time_limit_seconds: 3600.0,
        threads: 0,
        rins: false,
        rins_window: 12,
        rins_stride: 9,
    }
}

/// Parses an instance from a NUL-terminated JSON document.
///
/// # Safety
/// `json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_instance_from_json(json: *const c_char, out: *mut *mut ScucInstance) -> ScucStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScucStatus::NullPointer, "out is null");
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Instance::from_json_str(text) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(ScucInstance {
                    instance: Arc::new(instance),
                }));
                ScucStatus::Ok
            }
            Err(e) => fail(ScucStatus::InvalidData, e.to_string()),
        }
    })
}

/// Reads and parses an instance file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_instance_from_file(path: *const c_char, out: *mut *mut ScucInstance) -> ScucStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScucStatus::NullPointer, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => return fail(ScucStatus::Io, format!("cannot read {path}: {e}")),
        };
        match Instance::from_json_bytes(&bytes) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(ScucInstance {
                    instance: Arc::new(instance),
                }));
                ScucStatus::Ok
            }
            Err(e) => fail(ScucStatus::InvalidData, e.to_string()),
        }
    })
}

/// # Safety
/// `instance` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn scuc_instance_free(instance: *mut ScucInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Sizes of the instance. Any output pointer may be null.
///
/// # Safety
/// `instance` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn scuc_instance_dims(
    instance: *const ScucInstance,
    buses: *mut usize,
    generators: *mut usize,
    lines: *mut usize,
    contingencies: *mut usize,
    horizon: *mut usize,
) -> ScucStatus {
    guard(|| {
        let Some(h) = instance.as_ref() else {
            return fail(ScucStatus::NullPointer, "instance is null");
        };
        let i = &h.instance;
        for (p, v) in [
            (buses, i.num_buses()),
            (generators, i.num_generators()),
            (lines, i.num_lines()),
            (contingencies, i.num_contingencies()),
            (horizon, i.horizon),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        ScucStatus::Ok
    })
}

fn settings(o: &ScucSolveOptions) -> Result<RunSettings, ScucStatus> {
    if !(o.time_limit_seconds > 0.0 && o.time_limit_seconds.is_finite()) {
        return Err(fail(ScucStatus::InvalidArgument, "time_limit_seconds must be positive"));
    }
    let workers = match o.threads {
        0 => Workers::available(),
        n => Workers::new(n as usize),
    }
    .map_err(|e| fail(ScucStatus::SolverFailure, e.to_string()))?;
    Ok(RunSettings {
        mode: match o.mode {
            ScucMode::Monolithic => RunMode::Monolithic,
            ScucMode::Td => RunMode::Td,
            ScucMode::TdR => RunMode::TdR,
        },
        separation: match o.separation {
            ScucSeparation::Dynamic => SeparationMode::Dynamic,
            ScucSeparation::Filtering => SeparationMode::Filtering,
            ScucSeparation::Enumerate => SeparationMode::Enumerate,
        },
        s_i: o.s_i as usize,
        s_r: o.s_r as usize,
        dt: o.dt as usize,
        ds: o.ds as usize,
        gap_sub: o.gap_sub,
        gap_final: o.gap_final,
        time_limit: Duration::from_secs_f64(o.time_limit_seconds),
        rins: o.rins.then_some((o.rins_window as usize, o.rins_stride as usize)),
        config: SeparationConfig {
            workers,
            ..SeparationConfig::default()
        },
    })
}

/// Solves the instance. `options` may be null for the defaults. On
/// [`ScucStatus::Ok`] a schedule handle is stored in `out`; on
/// `Infeasible` or `NoIncumbent` `out` is set to null.
///
/// # Safety
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_solve(
    instance: *const ScucInstance,
    options: *const ScucSolveOptions,
    out: *mut *mut ScucSchedule,
) -> ScucStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScucStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(h) = instance.as_ref() else {
            return fail(ScucStatus::NullPointer, "instance is null");
        };
        let opts = options.as_ref().copied().unwrap_or_else(|| scuc_solve_options_default());
        let settings = match settings(&opts) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let sens = match SensitivitySet::build_with_index(&h.instance, 0) {
            Ok(s) => s,
            Err(e) => return fail(ScucStatus::InvalidData, e.to_string()),
        };
        let result = match run(&h.instance, &sens, &settings) {
            Ok(r) => r,
            Err(e) => return fail(ScucStatus::SolverFailure, e.to_string()),
        };
        match (result.status, result.schedule) {
            (RunStatus::Feasible, Some(schedule)) => {
                *out = Box::into_raw(Box::new(ScucSchedule {
                    instance: Arc::clone(&h.instance),
                    schedule,
                }));
                ScucStatus::Ok
            }
            (RunStatus::Infeasible, _) => fail(ScucStatus::Infeasible, "no feasible schedule exists"),
            _ => fail(ScucStatus::NoIncumbent, "time limit reached without a schedule"),
        }
    })
}

/// Parses a schedule file's JSON against `instance`.
///
/// # Safety
/// `instance` must be a live handle, `json` a valid C string and `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_schedule_from_json(
    instance: *const ScucInstance,
    json: *const c_char,
    out: *mut *mut ScucSchedule,
) -> ScucStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScucStatus::NullPointer, "out is null");
        }
        let Some(h) = instance.as_ref() else {
            return fail(ScucStatus::NullPointer, "instance is null");
        };
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Schedule::from_json_str(text, &h.instance) {
            Ok(schedule) => {
                *out = Box::into_raw(Box::new(ScucSchedule {
                    instance: Arc::clone(&h.instance),
                    schedule,
                }));
                ScucStatus::Ok
            }
            Err(e) => fail(ScucStatus::InvalidData, e.to_string()),
        }
    })
}

/// # Safety
/// `schedule` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn scuc_schedule_free(schedule: *mut ScucSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Total objective in dollars.
///
/// # Safety
/// `schedule` must be a live handle and `objective` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_schedule_objective(schedule: *const ScucSchedule, objective: *mut f64) -> ScucStatus {
    guard(|| match (schedule.as_ref(), objective.is_null()) {
        (Some(s), false) => {
            *objective = s.schedule.objective.total;
            ScucStatus::Ok
        }
        _ => fail(ScucStatus::NullPointer, "schedule or objective is null"),
    })
}

/// Commitment and output of generator `generator` (zero-based) in period
/// `period` (one-based).
///
/// # Safety
/// `schedule` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn scuc_schedule_unit(
    schedule: *const ScucSchedule,
    generator: usize,
    period: usize,
    committed: *mut bool,
    power: *mut f64,
) -> ScucStatus {
    guard(|| {
        let Some(s) = schedule.as_ref() else {
            return fail(ScucStatus::NullPointer, "schedule is null");
        };
        let sch = &s.schedule;
        if generator >= sch.x.len() || period == 0 || period > sch.horizon() {
            return fail(
                ScucStatus::InvalidArgument,
                format!("generator {generator} period {period} outside the schedule"),
            );
        }
        if !committed.is_null() {
            *committed = sch.x[generator][period - 1] > 0.5;
        }
        if !power.is_null() {
            *power = sch.p[generator][period - 1];
        }
        ScucStatus::Ok
    })
}

/// Serializes the schedule file. Release the string with
/// [`scuc_string_free`].
///
/// # Safety
/// `schedule` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_schedule_to_json(schedule: *const ScucSchedule, out: *mut *mut c_char) -> ScucStatus {
    guard(|| {
        if out.is_null() {
            return fail(ScucStatus::NullPointer, "out is null");
        }
        let Some(s) = schedule.as_ref() else {
            return fail(ScucStatus::NullPointer, "schedule is null");
        };
        match CString::new(s.schedule.to_json_pretty(&s.instance)) {
            Ok(c) => {
                *out = c.into_raw();
                ScucStatus::Ok
            }
            Err(_) => fail(ScucStatus::SolverFailure, "schedule text contains NUL"),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn scuc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Checks every constraint of the schedule's instance. `violations` may be
/// null.
///
/// # Safety
/// `schedule` must be a live handle, `feasible` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn scuc_validate(schedule: *const ScucSchedule, feasible: *mut bool, violations: *mut usize) -> ScucStatus {
    guard(|| {
        let Some(s) = schedule.as_ref() else {
            return fail(ScucStatus::NullPointer, "schedule is null");
        };
        if feasible.is_null() {
            return fail(ScucStatus::NullPointer, "feasible is null");
        }
        let sens = match SensitivitySet::build_with_index(&s.instance, 0) {
            Ok(x) => x,
            Err(e) => return fail(ScucStatus::InvalidData, e.to_string()),
        };
        match check_schedule(&s.instance, &sens, &s.schedule, &Tolerances::default()) {
            Ok(r) => {
                *feasible = r.feasible;
                if !violations.is_null() {
                    *violations = r.violation_count;
                }
                ScucStatus::Ok
            }
            Err(e) => fail(ScucStatus::InvalidData, e.to_string()),
        }
    })
}

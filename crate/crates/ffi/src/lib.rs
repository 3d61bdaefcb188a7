//! C ABI over `ergolab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released by the matching `*_free`. Every fallible call
//! returns an [`ErgoStatus`]; the message of the last failure on the calling
//! thread is available through [`ergo_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ergolab::averaging::{apply_operator, cube_operator};
use ergolab::cli::{random_observable, run, ExperimentConfig, Kind};
use ergolab::sculptor::{sculpt, stage_reports, SculptPlan, StageReport};
use ergolab::space::{FiniteSystem, Observable};
use ergolab::towers::rokhlin_tower_1d;
use ergolab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Config = 4,
    Io = 5,
    Panic = 6,
    Other = 7,
}

/// A finite system.
pub struct ErgoSystem(FiniteSystem);

/// A real function on the atoms of a system.
pub struct ErgoObservable(Observable);

/// A sculpted function with its per-stage report.
pub struct ErgoPlan {
    plan: SculptPlan,
    reports: Vec<StageReport>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ErgoStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Infeasible(_) | Error::TowerNotReached { .. } | Error::NoAdmissibleShift { .. } | Error::EmptyShell { .. } => {
            ErgoStatus::Infeasible
        }
        Error::Config(_) => ErgoStatus::Config,
        Error::Io(_) => ErgoStatus::Io,
        Error::DimensionMismatch { .. }
        | Error::AtomOutOfRange { .. }
        | Error::SystemMismatch
        | Error::InvalidSystem(_)
        | Error::InvalidArgument(_)
        | Error::NonFinite(_)
        | Error::NonZeroMean(_)
        | Error::NotErgodic(_)
        | Error::SupportTooLarge { .. } => ErgoStatus::InvalidArgument,
        _ => ErgoStatus::Other,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ErgoStatus, String)>) -> ErgoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ErgoStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            ErgoStatus::Panic
        }
    }
}

fn lib<T>(r: ergolab::Result<T>) -> Result<T, (ErgoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ErgoStatus, String)> {
    p.as_ref().ok_or((ErgoStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (ErgoStatus, String)> {
    p.as_mut().ok_or((ErgoStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (ErgoStatus, String)> {
    if p.is_null() {
        return Err((ErgoStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (ErgoStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (ErgoStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((ErgoStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn ergo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ergo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Box torus with periods `dims[0..d]`; `d = 1` is the cycle.
///
/// # Safety
/// `dims` must point to `d` values and `system_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_system_torus(dims: *const usize, d: usize, system_out: *mut *mut ErgoSystem) -> ErgoStatus {
    guard(|| {
        let slot = out(system_out, "system_out")?;
        let dims = slice(dims, d, "dims")?;
        let sys = lib(FiniteSystem::torus(dims))?;
        *slot = Box::into_raw(Box::new(ErgoSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `system` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergo_system_free(system: *mut ErgoSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// # Safety
/// `system` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergo_system_atoms(system: *const ErgoSystem) -> usize {
    system.as_ref().map_or(0, |s| s.0.atoms())
}

/// Copies `len` values into a new observable on `system`.
///
/// # Safety
/// `values` must point to `len` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ergo_observable_new(
    system: *const ErgoSystem,
    values: *const f64,
    len: usize,
    observable_out: *mut *mut ErgoObservable,
) -> ErgoStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = out(observable_out, "observable_out")?;
        let f = lib(Observable::new(slice(values, len, "values")?.to_vec()))?;
        lib(sys.0.check_observable(&f))?;
        *slot = Box::into_raw(Box::new(ErgoObservable(f)));
        Ok(())
    })
}

/// Seeded uniform values on `[-1, 1]`, centered when `zero_mean` is nonzero.
///
/// # Safety
/// Handles must be live and `observable_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_observable_random(
    system: *const ErgoSystem,
    seed: u64,
    zero_mean: i32,
    observable_out: *mut *mut ErgoObservable,
) -> ErgoStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = out(observable_out, "observable_out")?;
        *slot = Box::into_raw(Box::new(ErgoObservable(random_observable(&sys.0, seed, zero_mean != 0))));
        Ok(())
    })
}

/// # Safety
/// `observable` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergo_observable_free(observable: *mut ErgoObservable) {
    if !observable.is_null() {
        drop(Box::from_raw(observable));
    }
}

/// Copies the values into `buf`, which must hold the observable's length.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ergo_observable_values(observable: *const ErgoObservable, buf: *mut f64, len: usize) -> ErgoStatus {
    guard(|| {
        let f = deref(observable, "observable")?;
        if len != f.0.len() {
            return Err((ErgoStatus::InvalidArgument, format!("buffer holds {len}, need {}", f.0.len())));
        }
        if len > 0 {
            if buf.is_null() {
                return Err((ErgoStatus::NullPointer, "buf is null".into()));
            }
            std::slice::from_raw_parts_mut(buf, len).copy_from_slice(f.0.values());
        }
        Ok(())
    })
}

/// Cube average `P_N f`.
///
/// # Safety
/// Handles must be live and `observable_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_cube_average(
    system: *const ErgoSystem,
    observable: *const ErgoObservable,
    n: usize,
    observable_out: *mut *mut ErgoObservable,
) -> ErgoStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let f = deref(observable, "observable")?;
        let slot = out(observable_out, "observable_out")?;
        let op = lib(cube_operator(n, sys.0.dim()))?;
        let p = lib(apply_operator(&op, &sys.0, &f.0))?;
        *slot = Box::into_raw(Box::new(ErgoObservable(p)));
        Ok(())
    })
}

/// Residual measure of the height-`n` tower on a cycle.
///
/// # Safety
/// `system` must be live and `mu_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_rokhlin_residual(system: *const ErgoSystem, n: usize, eps: f64, mu_out: *mut f64) -> ErgoStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = out(mu_out, "mu_out")?;
        *slot = lib(rokhlin_tower_1d(&sys.0, n, eps))?.tower.residual_measure();
        Ok(())
    })
}

/// Sculpts from an experiment config text holding a `[sculpt]` table.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn ergo_sculpt(
    system: *const ErgoSystem,
    config_toml: *const c_char,
    plan_out: *mut *mut ErgoPlan,
) -> ErgoStatus {
    guard(|| {
        let sys = deref(system, "system")?;
        let slot = out(plan_out, "plan_out")?;
        let cfg = lib(ExperimentConfig::from_toml(text(config_toml, "config_toml")?))?;
        let p = cfg.sculpt.ok_or((ErgoStatus::Config, "missing table `sculpt`".to_string()))?;
        let plan = lib(sculpt(&sys.0, &p.target, &p.plan))?;
        let reports = lib(stage_reports(&plan, 0))?;
        *slot = Box::into_raw(Box::new(ErgoPlan { plan, reports }));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ergo_plan_free(plan: *mut ErgoPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergo_plan_stages(plan: *const ErgoPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.plan.stages.len())
}

/// Scale `N_j` and W1 distance to the target for stage `j` (1-based).
/// The distance is NaN when the stage average vanishes.
///
/// # Safety
/// `plan` must be live and the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_plan_stage(
    plan: *const ErgoPlan,
    j: usize,
    n_out: *mut usize,
    w1_out: *mut f64,
    tail_out: *mut f64,
) -> ErgoStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        let r = j
            .checked_sub(1)
            .and_then(|i| p.reports.get(i))
            .ok_or((ErgoStatus::InvalidArgument, format!("no stage {j}")))?;
        *out(n_out, "n_out")? = r.n_j;
        *out(w1_out, "w1_out")? = r.dist_to_target.unwrap_or(f64::NAN);
        *out(tail_out, "tail_out")? = r.tail_ratio;
        Ok(())
    })
}

/// Composite function of the plan.
///
/// # Safety
/// `plan` must be live and `observable_out` writable.
#[no_mangle]
pub unsafe extern "C" fn ergo_plan_function(plan: *const ErgoPlan, observable_out: *mut *mut ErgoObservable) -> ErgoStatus {
    guard(|| {
        let p = deref(plan, "plan")?;
        *out(observable_out, "observable_out")? = Box::into_raw(Box::new(ErgoObservable(p.plan.f.clone())));
        Ok(())
    })
}

/// Same as the `ergolab` binary: validates, runs and writes into `out_dir`.
///
/// # Safety
/// All strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ergo_run_experiment(
    kind: *const c_char,
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> ErgoStatus {
    guard(|| {
        let kind: Kind = lib(text(kind, "kind")?.parse())?;
        let cfg = lib(ExperimentConfig::from_toml(text(config_toml, "config_toml")?))?;
        lib(run(&cfg, Some(kind), Path::new(text(out_dir, "out_dir")?)))?;
        Ok(())
    })
}

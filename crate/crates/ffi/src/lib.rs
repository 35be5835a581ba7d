//! C ABI over the midhaul planner.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an `MhStatus`;
//! on failure `mh_last_error` describes what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use midhaul::planner::{PlanError, Planner};
use midhaul::report::PlanReport;
use midhaul::trace::{parse_nodes, parse_trace};
use midhaul::{ArrayConfig, AssociationPlan, EvalOptions, PlannerMode, PrecoderKind, RadioParams, Scenario};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    InvalidData = 4,
    Uncoverable = 5,
    OutOfRange = 6,
    Internal = 7,
}

/// Loaded nodes and paths together with radio parameters.
pub struct MhScenario {
    scenario: Scenario,
}

/// Result of a planning run.
pub struct MhPlan {
    plan: AssociationPlan,
    radio: RadioParams,
}

/// Array and precoder settings for `mh_plan`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MhPlanOptions {
    pub cu_rows: u32,
    pub cu_cols: u32,
    pub du_rows: u32,
    pub du_cols: u32,
    /// 0 = SLNR, 1 = zero forcing.
    pub precoder: u32,
    /// 0 = greedy, 1 = exhaustive.
    pub mode: u32,
    pub inter_cu_interference: bool,
    pub connectivity_threshold_dbm: f64,
}

/// Per-link figures.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MhLink {
    pub slnr_db: f64,
    pub sinr_db: f64,
    pub rate_bps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn guard(f: impl FnOnce() -> Result<(), (MhStatus, String)>) -> MhStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MhStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MhStatus::Internal
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MhStatus, String)> {
    if p.is_null() {
        return Err((MhStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MhStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn open(path: &str) -> Result<File, (MhStatus, String)> {
    File::open(path).map_err(|e| (MhStatus::Io, format!("{path}: {e}")))
}

/// Last error message on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn mh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads nodes and trace CSV files with default radio parameters.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mh_scenario_load(
    nodes_path: *const c_char,
    trace_path: *const c_char,
    out: *mut *mut MhScenario,
) -> MhStatus {
    guard(|| {
        if out.is_null() {
            return Err((MhStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let nodes_path = path_arg(nodes_path, "nodes_path")?;
        let trace_path = path_arg(trace_path, "trace_path")?;
        let nodes =
            parse_nodes(open(nodes_path)?).map_err(|e| (MhStatus::InvalidData, format!("{nodes_path}: {e}")))?;
        let paths =
            parse_trace(open(trace_path)?).map_err(|e| (MhStatus::InvalidData, format!("{trace_path}: {e}")))?;
        let scenario = Scenario::new(nodes, paths, RadioParams::default(), 25)
            .map_err(|e| (MhStatus::InvalidData, e.to_string()))?;
        *out = Box::into_raw(Box::new(MhScenario { scenario }));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from `mh_scenario_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mh_scenario_free(s: *mut MhScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of CUs in the scenario, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn mh_scenario_cu_count(s: *const MhScenario) -> usize {
    s.as_ref().map_or(0, |s| s.scenario.cu_ids().len())
}

/// Number of DUs in the scenario, 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn mh_scenario_du_count(s: *const MhScenario) -> usize {
    s.as_ref().map_or(0, |s| s.scenario.du_ids().len())
}

/// Sets the per-link rate target in bit/s.
///
/// # Safety
/// `s` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn mh_scenario_set_rate_target(s: *mut MhScenario, rate_bps: f64) -> MhStatus {
    guard(|| {
        let s = s.as_mut().ok_or((MhStatus::NullArgument, "scenario is null".to_string()))?;
        let mut radio = s.scenario.radio;
        radio.rate_target_bps = rate_bps;
        radio.validate().map_err(|e| (MhStatus::InvalidArgument, e.to_string()))?;
        s.scenario.radio = radio;
        Ok(())
    })
}

/// Default planning options: 16x16 arrays, SLNR, greedy, -100 dBm threshold.
#[no_mangle]
pub extern "C" fn mh_plan_options_default() -> MhPlanOptions {
    let d = EvalOptions::default();
    MhPlanOptions {
        cu_rows: d.cu_array.rows as u32,
        cu_cols: d.cu_array.cols as u32,
        du_rows: d.du_array.rows as u32,
        du_cols: d.du_array.cols as u32,
        precoder: 0,
        mode: 0,
        inter_cu_interference: d.inter_cu_interference,
        connectivity_threshold_dbm: d.connectivity_threshold_dbm,
    }
}

fn eval_options(o: &MhPlanOptions) -> Result<(EvalOptions, PlannerMode), (MhStatus, String)> {
    let precoder = match o.precoder {
        0 => PrecoderKind::Slnr,
        1 => PrecoderKind::Zf,
        p => return Err((MhStatus::InvalidArgument, format!("unknown precoder {p}"))),
    };
    let mode = match o.mode {
        0 => PlannerMode::Greedy,
        1 => PlannerMode::Exhaustive,
        m => return Err((MhStatus::InvalidArgument, format!("unknown mode {m}"))),
    };
    let opts = EvalOptions {
        cu_array: ArrayConfig::new(o.cu_rows as usize, o.cu_cols as usize),
        du_array: ArrayConfig::new(o.du_rows as usize, o.du_cols as usize),
        precoder,
        inter_cu_interference: o.inter_cu_interference,
        connectivity_threshold_dbm: o.connectivity_threshold_dbm,
    };
    Ok((opts, mode))
}

fn plan_status(e: &PlanError) -> MhStatus {
    match e {
        PlanError::Uncoverable(_) => MhStatus::Uncoverable,
        PlanError::UnknownCu(_) | PlanError::Invalid(_) => MhStatus::InvalidArgument,
        PlanError::Precoding { source, .. } if matches!(source, midhaul::mimo::MimoError::ZfInfeasible { .. }) => {
            MhStatus::InvalidArgument
        }
        _ => MhStatus::Internal,
    }
}

/// Finds the smallest CU set meeting the rate target. An infeasible
/// outcome still yields a plan; check `mh_plan_feasible`.
///
/// # Safety
/// `s` must be a live scenario handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mh_plan(
    s: *const MhScenario,
    options: *const MhPlanOptions,
    out: *mut *mut MhPlan,
) -> MhStatus {
    guard(|| {
        if out.is_null() {
            return Err((MhStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let s = s.as_ref().ok_or((MhStatus::NullArgument, "scenario is null".to_string()))?;
        let o = options.as_ref().copied().unwrap_or_else(|| mh_plan_options_default());
        let (opts, mode) = eval_options(&o)?;
        let planner =
            Planner::new(&s.scenario, opts).map_err(|e| (plan_status(&e), e.to_string()))?;
        let plan = planner.plan_minimum(mode).map_err(|e| (plan_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(MhPlan {
            plan,
            radio: s.scenario.radio,
        }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `mh_plan` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_free(p: *mut MhPlan) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_feasible(p: *const MhPlan) -> bool {
    p.as_ref().is_some_and(|p| p.plan.feasible)
}

/// # Safety
/// `p` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_selected_count(p: *const MhPlan) -> usize {
    p.as_ref().map_or(0, |p| p.plan.selected.len())
}

/// # Safety
/// `p` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_link_count(p: *const MhPlan) -> usize {
    p.as_ref().map_or(0, |p| p.plan.links.len())
}

/// Minimum link rate in bit/s, 0 when a DU is unassigned.
///
/// # Safety
/// `p` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_min_rate_bps(p: *const MhPlan) -> f64 {
    p.as_ref().map_or(0.0, |p| p.plan.min_rate_bps())
}

/// Copies link `index` (links are ordered by DU id) into `out`.
///
/// # Safety
/// `p` must be a live plan handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_link(p: *const MhPlan, index: usize, out: *mut MhLink) -> MhStatus {
    guard(|| {
        let p = p.as_ref().ok_or((MhStatus::NullArgument, "plan is null".to_string()))?;
        let out = out.as_mut().ok_or((MhStatus::NullArgument, "out is null".to_string()))?;
        let l = p.plan.links.get(index).ok_or((
            MhStatus::OutOfRange,
            format!("link {index} out of range ({} links)", p.plan.links.len()),
        ))?;
        *out = MhLink {
            slnr_db: l.slnr_db,
            sinr_db: l.sinr_db,
            rate_bps: l.rate_bps,
        };
        Ok(())
    })
}

/// JSON report for the plan, or null on error. Free with `mh_string_free`.
///
/// # Safety
/// `p` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn mh_plan_report_json(p: *const MhPlan) -> *mut c_char {
    let mut s = ptr::null_mut();
    let status = guard(|| {
        let p = p.as_ref().ok_or((MhStatus::NullArgument, "plan is null".to_string()))?;
        let json = PlanReport::new(&p.plan, &p.radio).to_json();
        s = CString::new(json)
            .map_err(|_| (MhStatus::Internal, "report contains NUL".to_string()))?
            .into_raw();
        Ok(())
    });
    if status == MhStatus::Ok {
        s
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Achievable rate in bit/s for a linear SINR under default radio parameters.
#[no_mangle]
pub extern "C" fn mh_link_rate(sinr_linear: f64) -> f64 {
    midhaul::mimo::link_rate(sinr_linear, &RadioParams::default())
}

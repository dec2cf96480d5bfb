//! C ABI over `fieldtk`.
//!
//! Models and run reports are opaque handles owned by the caller and released
//! with the matching `*_free`. Every fallible call returns an [`FtkStatus`];
//! on failure the message is available from [`ftk_last_error`] on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fieldtk::cli::{execute_spec, Action, CommonOpts, Outcome, Suite};
use fieldtk::models::{load_model, parse_model, ModelKind, ModelSpec};
use fieldtk::FieldError;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Expression or model file syntax, undeclared identifiers.
    Parse = 3,
    /// Missing sections, bad grids, unknown suites and similar input errors.
    Config = 4,
    Dimension = 5,
    SingularHessian = 6,
    NonConvergence = 7,
    /// A function was evaluated outside its domain.
    Domain = 8,
    Io = 9,
    /// Any other numerical failure (off-graph points, boundary nodes).
    Numeric = 10,
    Panic = 11,
}

/// Loaded model file.
pub struct FtkModel {
    spec: ModelSpec,
}

/// Outcome of a check, derive, integrate or verify run.
pub struct FtkReport {
    outcome: Outcome,
    json: CString,
    payload: Option<CString>,
}

/// Optional run parameters. Pass NULL for the defaults.
#[repr(C)]
pub struct FtkOptions {
    /// Node counts per time axis, or NULL to use the model's grid.
    pub grid: *const usize,
    pub grid_len: usize,
    /// Tolerance override; NaN keeps each check's default.
    pub tol: f64,
    /// RK4 substeps per grid edge; 0 means 1.
    pub substeps: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).expect("nul bytes removed"));
}

fn status_of(e: &FieldError) -> FtkStatus {
    match e {
        FieldError::Syntax { .. } | FieldError::UndeclaredIdentifier(_) | FieldError::ModelParse { .. } => FtkStatus::Parse,
        FieldError::Config(_)
        | FieldError::InvalidGrid(_)
        | FieldError::IllegalCoordinate { .. }
        | FieldError::MissingAssignment(_) => FtkStatus::Config,
        FieldError::DimensionMismatch(_) | FieldError::ShapeMismatch(_) => FtkStatus::Dimension,
        FieldError::SingularHessian { .. } => FtkStatus::SingularHessian,
        FieldError::NonConvergence { .. } => FtkStatus::NonConvergence,
        FieldError::Domain { .. } => FtkStatus::Domain,
        FieldError::Io(_) => FtkStatus::Io,
        FieldError::AtNode { source, .. } => status_of(source),
        FieldError::OffGraph { .. } | FieldError::BoundaryNode { .. } => FtkStatus::Numeric,
    }
}

/// Runs `f`, records any error and converts panics.
fn guard(f: impl FnOnce() -> Result<(), (FtkStatus, String)>) -> FtkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FtkStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FtkStatus::Panic
        }
    }
}

fn field_err(e: FieldError) -> (FtkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FtkStatus, String) {
    (FtkStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FtkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (FtkStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn model_ref<'a>(m: *const FtkModel) -> Result<&'a FtkModel, (FtkStatus, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn opts_of(o: *const FtkOptions) -> Result<CommonOpts, (FtkStatus, String)> {
    let mut opts = CommonOpts { substeps: 1, ..Default::default() };
    if let Some(o) = o.as_ref() {
        if !o.grid.is_null() {
            opts.grid = Some(std::slice::from_raw_parts(o.grid, o.grid_len).to_vec());
        } else if o.grid_len != 0 {
            return Err(null("options.grid"));
        }
        if !o.tol.is_nan() {
            opts.tol = Some(o.tol);
        }
        if o.substeps > 0 {
            opts.substeps = o.substeps;
        }
    }
    Ok(opts)
}

fn store_model(spec: ModelSpec, out: *mut *mut FtkModel) {
    unsafe { *out = Box::into_raw(Box::new(FtkModel { spec })) };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ftk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or "" after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ftk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a model file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_load(path: *const c_char, out: *mut *mut FtkModel) -> FtkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = load_model(str_arg(path, "path")?).map_err(field_err)?;
        store_model(spec, out);
        Ok(())
    })
}

/// Parses model text held in memory.
///
/// # Safety
/// `text` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_parse(text: *const c_char, out: *mut *mut FtkModel) -> FtkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = parse_model(str_arg(text, "text")?).map_err(field_err)?;
        store_model(spec, out);
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_free(model: *mut FtkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Chart dimensions: k time axes, n fields, m algebroid rank (0 outside
/// algebroid models) and the total coordinate count. Any output may be NULL.
///
/// # Safety
/// Non-NULL pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_dims(
    model: *const FtkModel,
    k: *mut usize,
    n: *mut usize,
    m: *mut usize,
    dim: *mut usize,
) -> FtkStatus {
    guard(|| {
        let c = model_ref(model)?.spec.chart;
        let alg_m = if c.kind.is_algebroid() { c.m } else { 0 };
        for (p, v) in [(k, c.k), (n, c.n), (m, alg_m), (dim, c.dim())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Writes the NUL-terminated name of coordinate `index` into `buf`
/// (capacity `len`), truncating when it does not fit.
///
/// # Safety
/// `buf` must be writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_coordinate_name(
    model: *const FtkModel,
    index: usize,
    buf: *mut c_char,
    len: usize,
) -> FtkStatus {
    guard(|| {
        let names = model_ref(model)?.spec.chart.names();
        let name = names
            .get(index)
            .ok_or_else(|| (FtkStatus::Dimension, format!("coordinate {index} out of range 0..{}", names.len())))?;
        if buf.is_null() || len == 0 {
            return Err(null("buf"));
        }
        let n = name.len().min(len - 1);
        ptr::copy_nonoverlapping(name.as_ptr().cast(), buf, n);
        *buf.add(n) = 0;
        Ok(())
    })
}

/// Evaluates the model's Lagrangian (`which` = 0) or Hamiltonian (`which` = 1)
/// at a point of the model chart, coordinates in chart order.
///
/// # Safety
/// `x` must hold `len` values and `value` be writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_eval(
    model: *const FtkModel,
    which: i32,
    x: *const f64,
    len: usize,
    value: *mut f64,
) -> FtkStatus {
    guard(|| {
        let spec = &model_ref(model)?.spec;
        if x.is_null() {
            return Err(null("x"));
        }
        if value.is_null() {
            return Err(null("value"));
        }
        let f = match which {
            0 => spec.lagrangian(),
            1 => spec.hamiltonian(),
            _ => return Err((FtkStatus::Config, format!("which must be 0 or 1, got {which}"))),
        }
        .map_err(field_err)?;
        let names = spec.chart.names();
        if len != names.len() {
            return Err((FtkStatus::Dimension, format!("expected {} coordinates, got {len}", names.len())));
        }
        *value = f.eval_at(&names, std::slice::from_raw_parts(x, len)).map_err(field_err)?;
        Ok(())
    })
}

/// Model kind as written in the file (e.g. "lagrangian"). Static string.
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_model_kind(model: *const FtkModel) -> *const c_char {
    let kind = match model.as_ref() {
        Some(m) => m.spec.kind,
        None => return ptr::null(),
    };
    match kind {
        ModelKind::Lagrangian => c"lagrangian",
        ModelKind::Hamiltonian => c"hamiltonian",
        ModelKind::SkinnerRusk => c"skinner_rusk",
        ModelKind::AlgebroidLagrangian => c"algebroid_lagrangian",
        ModelKind::AlgebroidHamiltonian => c"algebroid_hamiltonian",
    }
    .as_ptr()
}

unsafe fn run(model: *const FtkModel, action: Action, opts: *const FtkOptions, out: *mut *mut FtkReport) -> FtkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let spec = &model_ref(model)?.spec;
        let opts = opts_of(opts)?;
        let outcome = execute_spec(action, spec, &opts).map_err(field_err)?;
        let json = CString::new(outcome.report.to_json()).map_err(|e| (FtkStatus::Numeric, e.to_string()))?;
        let payload = match &outcome.payload {
            Some(p) => Some(CString::new(p.as_str()).map_err(|e| (FtkStatus::Numeric, e.to_string()))?),
            None => None,
        };
        *out = Box::into_raw(Box::new(FtkReport { outcome, json, payload }));
        Ok(())
    })
}

/// Regularity, identity and structure checks.
///
/// # Safety
/// `model` must be live, `opts` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_check(model: *const FtkModel, opts: *const FtkOptions, out: *mut *mut FtkReport) -> FtkStatus {
    run(model, Action::Check, opts, out)
}

/// Derived expressions; the listing is the report payload.
///
/// # Safety
/// As for [`ftk_check`].
#[no_mangle]
pub unsafe extern "C" fn ftk_derive(model: *const FtkModel, opts: *const FtkOptions, out: *mut *mut FtkReport) -> FtkStatus {
    run(model, Action::Derive, opts, out)
}

/// Integrates over the grid; the CSV table is the report payload.
///
/// # Safety
/// As for [`ftk_check`].
#[no_mangle]
pub unsafe extern "C" fn ftk_integrate(model: *const FtkModel, opts: *const FtkOptions, out: *mut *mut FtkReport) -> FtkStatus {
    run(model, Action::Integrate, opts, out)
}

/// Runs a verification suite by name: legendre, skinner-rusk, tulczyjew,
/// structure, reduction, gradients or constraints.
///
/// # Safety
/// `suite` must be NUL-terminated; otherwise as for [`ftk_check`].
#[no_mangle]
pub unsafe extern "C" fn ftk_verify(
    model: *const FtkModel,
    suite: *const c_char,
    opts: *const FtkOptions,
    out: *mut *mut FtkReport,
) -> FtkStatus {
    let name = match str_arg(suite, "suite") {
        Ok(s) => s,
        Err((status, msg)) => {
            set_error(msg);
            return status;
        }
    };
    match name.parse::<Suite>() {
        Ok(s) => run(model, Action::Verify(s), opts, out),
        Err(e) => {
            set_error(e.to_string());
            FtkStatus::Config
        }
    }
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_free(report: *mut FtkReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// 1 when every check passed, 0 otherwise (also for NULL).
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_passed(report: *const FtkReport) -> i32 {
    report.as_ref().map_or(0, |r| r.outcome.report.passed() as i32)
}

/// Number of checks in the report.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_check_count(report: *const FtkReport) -> usize {
    report.as_ref().map_or(0, |r| r.outcome.report.checks.len())
}

/// Defect, tolerance and pass flag of check `index`. Outputs may be NULL.
///
/// # Safety
/// Non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_check(
    report: *const FtkReport,
    index: usize,
    defect: *mut f64,
    tolerance: *mut f64,
    passed: *mut i32,
) -> FtkStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let checks = &r.outcome.report.checks;
        let c = checks
            .get(index)
            .ok_or_else(|| (FtkStatus::Dimension, format!("check {index} out of range 0..{}", checks.len())))?;
        if !defect.is_null() {
            *defect = c.defect;
        }
        if !tolerance.is_null() {
            *tolerance = c.tolerance;
        }
        if !passed.is_null() {
            *passed = c.passed() as i32;
        }
        Ok(())
    })
}

/// Largest defect over all checks, 0 for an empty or NULL report.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_max_defect(report: *const FtkReport) -> f64 {
    report.as_ref().map_or(0.0, |r| r.outcome.report.checks.iter().map(|c| c.defect).fold(0.0, f64::max))
}

/// The report as JSON. Owned by the report.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_json(report: *const FtkReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// CSV or derivation text, NULL when the command has none. Owned by the report.
///
/// # Safety
/// `report` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn ftk_report_payload(report: *const FtkReport) -> *const c_char {
    report.as_ref().and_then(|r| r.payload.as_ref()).map_or(ptr::null(), |p| p.as_ptr())
}

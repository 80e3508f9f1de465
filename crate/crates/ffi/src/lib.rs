//! C ABI bindings.
//!
//! Programs are opaque [`CpProgram`] handles. Every fallible call returns a
//! [`CpStatus`]; on failure the message is available from
//! [`cp_last_error`] on the same thread. Strings handed out by the library
//! must be released with [`cp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chorprism::chain::{ChainError, DEFAULT_MAX_STATES};
use chorprism::chor::{check_annotations, check_well_formed, s_conn_violation, ChorProgram};
use chorprism::equivalence::{lift, verify_projection, VerifyError, VerifyOptions};
use chorprism::frontend::{auto_annotate, compile_source, AnnotationScheme, FrontendError};
use chorprism::prism::{build_network_chain, emit, EmitConfig};
use chorprism::projection::{project, ProjectOptions, ProjectionMode};
use chorprism::semantics::build_chain;

/// Formal projection: one counter value per interaction node.
pub const CP_MODE_FORMAL: u32 = 0;
/// Compact projection: calls jump straight to the callee's first value.
pub const CP_MODE_COMPACT: u32 = 1;

/// Chain of the choreography.
pub const CP_SIDE_CHOR: u32 = 0;
/// Chain of the projected PRISM network.
pub const CP_SIDE_PRISM: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpStatus {
    Ok = 0,
    /// A required pointer was null.
    NullArgument = 1,
    /// A string argument was not UTF-8, or an enum argument was out of range.
    InvalidArgument = 2,
    /// The source text does not parse.
    Parse = 3,
    /// The program parsed but was rejected.
    Semantic = 4,
    /// The reachable state space exceeded the bound.
    Budget = 5,
    /// A panic was caught at the boundary.
    Internal = 6,
}

/// A parsed, desugared and annotated choreography.
pub struct CpProgram {
    prog: ChorProgram,
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

type Fallible<T> = Result<T, (CpStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible<()>) -> CpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error");
            CpStatus::Internal
        }
    }
}

fn semantic(e: impl ToString) -> (CpStatus, String) {
    (CpStatus::Semantic, e.to_string())
}

fn chain_err(e: ChainError) -> (CpStatus, String) {
    let status =
        if matches!(e, ChainError::StateBudgetExceeded { .. }) { CpStatus::Budget } else { CpStatus::Semantic };
    (status, e.to_string())
}

unsafe fn handle<'a>(p: *const CpProgram) -> Fallible<&'a ChorProgram> {
    p.as_ref().map(|h| &h.prog).ok_or((CpStatus::NullArgument, "program handle is null".into()))
}

fn check_out<T>(out: *mut T) -> Fallible<()> {
    if out.is_null() {
        Err((CpStatus::NullArgument, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn mode(m: u32) -> Fallible<ProjectionMode> {
    match m {
        CP_MODE_FORMAL => Ok(ProjectionMode::Formal),
        CP_MODE_COMPACT => Ok(ProjectionMode::Compact),
        _ => Err((CpStatus::InvalidArgument, format!("unknown projection mode {m}"))),
    }
}

fn budget(max_states: usize) -> usize {
    if max_states == 0 {
        DEFAULT_MAX_STATES
    } else {
        max_states
    }
}

fn into_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Parse, desugar and annotate `source`. On success `*out` holds a handle
/// to release with [`cp_program_free`].
///
/// # Safety
///
/// `source` must be a valid NUL-terminated string and `out` a valid pointer
/// to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn cp_program_parse(source: *const c_char, out: *mut *mut CpProgram) -> CpStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        if source.is_null() {
            return Err((CpStatus::NullArgument, "source is null".into()));
        }
        let src = CStr::from_ptr(source)
            .to_str()
            .map_err(|_| (CpStatus::InvalidArgument, "source is not valid UTF-8".to_string()))?;
        let prog = compile_source(src).map_err(|e| match e {
            FrontendError::Parse(_) => (CpStatus::Parse, e.to_string()),
            e => semantic(e),
        })?;
        let prog = auto_annotate(&prog, AnnotationScheme::Deterministic);
        *out = Box::into_raw(Box::new(CpProgram { prog }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
///
/// `program` must be null or a handle from [`cp_program_parse`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn cp_program_free(program: *mut CpProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Run the static checks: well-formedness, annotation uniqueness and strong
/// connectedness of every definition.
///
/// # Safety
///
/// `program` must be a live handle from [`cp_program_parse`].
#[no_mangle]
pub unsafe extern "C" fn cp_program_check(program: *const CpProgram) -> CpStatus {
    guard(|| {
        let prog = handle(program)?;
        check_well_formed(prog)
            .map_err(|d| semantic(d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")))?;
        check_annotations(prog).map_err(semantic)?;
        for (name, body) in &prog.definitions {
            if let Some(v) = s_conn_violation(body, &prog.definitions, name).map_err(semantic)? {
                return Err(semantic(format!("NotStronglyConnected: {v}")));
            }
        }
        Ok(())
    })
}

/// Project the program and write PRISM source to `*out`.
///
/// # Safety
///
/// `program` must be a live handle and `out` a valid pointer. The string
/// stored in `*out` must be released with [`cp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cp_compile(
    program: *const CpProgram,
    projection_mode: u32,
    out: *mut *mut c_char,
) -> CpStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let prog = handle(program)?;
        let opts = ProjectOptions { mode: mode(projection_mode)?, ..Default::default() };
        let p = project(prog, &opts).map_err(semantic)?;
        let text = emit(&p.model, &EmitConfig::default()).map_err(semantic)?;
        *out = into_c(text);
        Ok(())
    })
}

/// Build a Markov chain and write it in text form to `*out`. `side` is
/// [`CP_SIDE_CHOR`] or [`CP_SIDE_PRISM`]; `max_states` of 0 selects the
/// default bound.
///
/// # Safety
///
/// `program` must be a live handle and `out` a valid pointer. The string
/// stored in `*out` must be released with [`cp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cp_chain(
    program: *const CpProgram,
    side: u32,
    projection_mode: u32,
    max_states: usize,
    out: *mut *mut c_char,
) -> CpStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let prog = handle(program)?;
        let init = prog.initial_state().map_err(semantic)?;
        let max = budget(max_states);
        let chain = match side {
            CP_SIDE_CHOR => build_chain(prog, init, max).map_err(chain_err)?,
            CP_SIDE_PRISM => {
                let opts = ProjectOptions { mode: mode(projection_mode)?, ..Default::default() };
                let p = project(prog, &opts).map_err(semantic)?;
                let net_init = lift(&init, &p.model).map_err(semantic)?;
                build_network_chain(&p.model, net_init, max).map_err(chain_err)?
            }
            s => return Err((CpStatus::InvalidArgument, format!("unknown chain side {s}"))),
        };
        *out = into_c(chain.to_text());
        Ok(())
    })
}

/// Check that the projection behaves like the choreography. Sets
/// `*equivalent` to 1 or 0 and, when `report` is not null, stores the
/// `key=value` summary followed by any counterexample.
///
/// # Safety
///
/// `program` must be a live handle, `equivalent` a valid pointer, and
/// `report` null or a valid pointer. A string stored in `*report` must be
/// released with [`cp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cp_verify(
    program: *const CpProgram,
    projection_mode: u32,
    max_states: usize,
    equivalent: *mut i32,
    report: *mut *mut c_char,
) -> CpStatus {
    guard(|| {
        check_out(equivalent)?;
        if !report.is_null() {
            *report = ptr::null_mut();
        }
        let prog = handle(program)?;
        let mut opts = VerifyOptions { max_states: Some(budget(max_states)), ..Default::default() };
        opts.projection.mode = mode(projection_mode)?;
        let r = verify_projection(prog, &opts).map_err(|e| match e {
            VerifyError::Chain(c) => chain_err(c),
            e => semantic(e),
        })?;
        *equivalent = i32::from(r.equivalent);
        if !report.is_null() {
            *report = into_c(format!("{}{}", r.key_values(), r.details()));
        }
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next fallible call on the same thread.
#[no_mangle]
pub extern "C" fn cp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
///
/// `s` must be null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

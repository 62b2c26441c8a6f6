//! C interface to `relbc-core`.
//!
//! Every fallible function returns a [`RelbcStatus`] and writes its result
//! through an out-pointer. On failure the message is kept per thread and can
//! be read with [`relbc_last_error_message`]. Layouts are opaque handles
//! created by `relbc_layout_*` and released with [`relbc_layout_free`].
//! Strings returned by the library are released with [`relbc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use relbc_core::config::RunConfig;
use relbc_core::geometry::{location_exclusion, solve_commit_point, t_max_simple, ProtocolLayout, TimingObservations};
use relbc_core::report::{cmd_attack, cmd_bound, cmd_geometry, cmd_run};
use relbc_core::security::{epsilon_b_bound, estimate_n_single, p_multi_bound, solve_delta_multi, SecurityParams};
use relbc_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelbcStatus {
    Ok = 0,
    InvalidArgument = 1,
    Domain = 2,
    DegenerateLayout = 3,
    InconsistentTiming = 4,
    OtpExhausted = 5,
    Protocol = 6,
    Config = 7,
    Internal = 8,
    NullPointer = 9,
    Panic = 10,
}

impl From<&Error> for RelbcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => RelbcStatus::InvalidArgument,
            Error::Domain(_) => RelbcStatus::Domain,
            Error::DegenerateLayout(_) => RelbcStatus::DegenerateLayout,
            Error::InconsistentTiming(_) => RelbcStatus::InconsistentTiming,
            Error::OtpExhausted { .. } => RelbcStatus::OtpExhausted,
            Error::Protocol(_) => RelbcStatus::Protocol,
            Error::Config { .. } => RelbcStatus::Config,
            Error::Invariant(_) => RelbcStatus::Internal,
        }
    }
}

/// Opaque planar layout.
pub struct RelbcLayout {
    inner: ProtocolLayout,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelbcBound {
    pub eps_b: f64,
    pub delta_star: f64,
    pub exponential_term: f64,
    pub entropy_term: f64,
    pub combinatorial_factor: f64,
    pub max_errors: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelbcCommitSolution {
    /// Metres.
    pub d_bob_pcommit: f64,
    /// Radians from the Bob-B0 direction.
    pub psi: f64,
    /// Seconds after t0.
    pub t_commit_upper: f64,
    pub at_max_point: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RelbcExclusion {
    pub a0_excluded: bool,
    pub a1_excluded: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Error>) -> RelbcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            RelbcStatus::Ok
        }
        Ok(Err(e)) => {
            let status = RelbcStatus::from(&e);
            set_last_error(e.to_string());
            status
        }
        Err(_) => {
            set_last_error("panic inside relbc".into());
            RelbcStatus::Panic
        }
    }
}

fn null_error(name: &str) -> Error {
    Error::InvalidParameter {
        field: name.to_string(),
        reason: "null pointer".into(),
    }
}

/// Writes `value` through `out`, which the caller guarantees is valid when non-null.
unsafe fn write_out<T>(out: *mut T, name: &str, value: T) -> Result<(), Error> {
    if out.is_null() {
        return Err(null_error(name));
    }
    // SAFETY: non-null and, per the caller's contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

/// Status-code version of a null check, used before any work is done.
fn status_for_null<T>(p: *const T) -> Option<RelbcStatus> {
    if p.is_null() {
        set_last_error("null pointer argument".into());
        Some(RelbcStatus::NullPointer)
    } else {
        None
    }
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn relbc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a layout from distances in metres and the A0-Alice-A1 angle in radians.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn relbc_layout_new(
    d_alice_bob: f64,
    d_alice_a0: f64,
    d_alice_a1: f64,
    d_a0_b0: f64,
    d_a1_b1: f64,
    theta: f64,
    out: *mut *mut RelbcLayout,
) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| {
        let inner = ProtocolLayout::new(d_alice_bob, d_alice_a0, d_alice_a1, d_a0_b0, d_a1_b1, theta)?;
        let handle = Box::into_raw(Box::new(RelbcLayout { inner }));
        unsafe { write_out(out, "out", handle) }
    })
}

/// The field-test layout: 9.3 km and 12.3 km arms at 165 degrees.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn relbc_layout_field_test(out: *mut *mut RelbcLayout) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| {
        let handle = Box::into_raw(Box::new(RelbcLayout {
            inner: ProtocolLayout::field_test(),
        }));
        unsafe { write_out(out, "out", handle) }
    })
}

/// Releases a layout. NULL is ignored.
///
/// # Safety
/// `layout` must come from `relbc_layout_*` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relbc_layout_free(layout: *mut RelbcLayout) {
    if !layout.is_null() {
        // SAFETY: created by Box::into_raw in this library, freed once.
        drop(unsafe { Box::from_raw(layout) });
    }
}

/// Distance between A0 and A1 in metres.
///
/// # Safety
/// `layout` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_layout_d_a0_a1(layout: *const RelbcLayout, out: *mut f64) -> RelbcStatus {
    if let Some(s) = status_for_null(layout).or_else(|| status_for_null(out)) {
        return s;
    }
    guard(|| {
        let layout = unsafe { &(*layout).inner };
        unsafe { write_out(out, "out", layout.d_a0_a1()) }
    })
}

/// Binding parameter for the given thresholds.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_epsilon_b(
    n_tol: u64,
    e_tol: f64,
    eps_rect: f64,
    eps_diag: f64,
    out: *mut RelbcBound,
) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| {
        let b = epsilon_b_bound(&SecurityParams {
            n_tol,
            e_tol,
            eps_rect,
            eps_diag,
            ..SecurityParams::default()
        })?;
        let value = RelbcBound {
            eps_b: b.eps_b,
            delta_star: b.delta_star,
            exponential_term: b.components.exponential_term,
            entropy_term: b.components.entropy_term,
            combinatorial_factor: b.components.combinatorial_factor,
            max_errors: b.components.max_errors,
        };
        unsafe { write_out(out, "out", value) }
    })
}

/// Upper bound on the multi-photon probability per pulse.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_p_multi(mu: f64, intensity_fluctuation: f64, out: *mut f64) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| unsafe { write_out(out, "out", p_multi_bound(mu, intensity_fluctuation)?) })
}

/// Deviation of the multi-photon fraction that fails with probability `eps`.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_delta_multi(p_multi: f64, n_sent: u64, eps: f64, out: *mut f64) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| unsafe { write_out(out, "out", solve_delta_multi(p_multi, n_sent, eps)?) })
}

/// Worst-case single-photon detections. Never fails.
#[no_mangle]
pub extern "C" fn relbc_estimate_n_single(n_detect: u64, n_sent: u64, p_multi: f64, delta_multi: f64) -> u64 {
    estimate_n_single(n_detect, n_sent, p_multi, delta_multi)
}

/// Latest commit time after `t0` with Bob at Alice and each B_i at A_i.
///
/// # Safety
/// `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_t_max_simple(t0: f64, t_b0: f64, t_b1: f64, d_a0_a1: f64, out: *mut f64) -> RelbcStatus {
    if let Some(s) = status_for_null(out) {
        return s;
    }
    guard(|| {
        let obs = TimingObservations::new(t0, t_b0, t_b1)?;
        unsafe { write_out(out, "out", t_max_simple(&obs, d_a0_a1)?) }
    })
}

/// Latest commitment instant and point consistent with the reveal timings.
///
/// # Safety
/// `layout` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_solve_commit_point(
    layout: *const RelbcLayout,
    t0: f64,
    t_b0: f64,
    t_b1: f64,
    out: *mut RelbcCommitSolution,
) -> RelbcStatus {
    if let Some(s) = status_for_null(layout).or_else(|| status_for_null(out)) {
        return s;
    }
    guard(|| {
        let layout = unsafe { &(*layout).inner };
        let sol = solve_commit_point(layout, &TimingObservations::new(t0, t_b0, t_b1)?)?;
        let value = RelbcCommitSolution {
            d_bob_pcommit: sol.d_bob_pcommit,
            psi: sol.psi,
            t_commit_upper: sol.t_commit_upper,
            at_max_point: sol.at_max_point,
        };
        unsafe { write_out(out, "out", value) }
    })
}

/// Whether the timings rule out a commitment at A0 or A1.
///
/// # Safety
/// `layout` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn relbc_location_exclusion(
    layout: *const RelbcLayout,
    t0: f64,
    t_b0: f64,
    t_b1: f64,
    out: *mut RelbcExclusion,
) -> RelbcStatus {
    if let Some(s) = status_for_null(layout).or_else(|| status_for_null(out)) {
        return s;
    }
    guard(|| {
        let layout = unsafe { &(*layout).inner };
        let e = location_exclusion(layout, &TimingObservations::new(t0, t_b0, t_b1)?)?;
        let value = RelbcExclusion {
            a0_excluded: e.a0_excluded,
            a1_excluded: e.a1_excluded,
        };
        unsafe { write_out(out, "out", value) }
    })
}

/// Runs a CLI command (`run`, `bound`, `geometry` or `attack`) on config text
/// in the `key = value` format and returns the JSON report.
///
/// # Safety
/// `command` and `config_text` must be NUL-terminated strings; `out_json`
/// must be valid for writing. Release the result with `relbc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn relbc_command_json(
    command: *const c_char,
    config_text: *const c_char,
    out_json: *mut *mut c_char,
) -> RelbcStatus {
    if let Some(s) = status_for_null(command)
        .or_else(|| status_for_null(config_text))
        .or_else(|| status_for_null(out_json))
    {
        return s;
    }
    guard(|| {
        let utf8 = |p: *const c_char, name: &str| {
            unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Error::InvalidParameter {
                field: name.to_string(),
                reason: "not UTF-8".into(),
            })
        };
        let command = utf8(command, "command")?;
        let cfg = RunConfig::from_text(utf8(config_text, "config_text")?)?.resolve()?;
        let report = match command {
            "run" => cmd_run(&cfg)?,
            "bound" => cmd_bound(&cfg)?,
            "geometry" => cmd_geometry(&cfg)?,
            "attack" => cmd_attack(&cfg)?,
            other => {
                return Err(Error::InvalidParameter {
                    field: "command".into(),
                    reason: format!("unknown command `{other}`"),
                })
            }
        };
        let text = CString::new(report.json_text()).map_err(|_| Error::Invariant("NUL in report".into()))?;
        unsafe { write_out(out_json, "out_json", text.into_raw()) }
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn relbc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: created by CString::into_raw in this library, freed once.
        drop(unsafe { CString::from_raw(s) });
    }
}

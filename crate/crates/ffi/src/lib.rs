//! C interface to `macx`.
//!
//! Every function returns a [`MacxStatus`]; results come back through out
//! pointers. Channels and codes are opaque handles created by a `*_new` or
//! `*_from_json` call and released with the matching `*_free`. After a failed
//! call, `macx_last_error` copies a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use macx::code::{error_probabilities, MultiUserCode};
use macx::error::Error;
use macx::exponent::{haroutunian_exponent, sphere_packing_exponent};
use macx::mac::{Mac, RatePair};
use macx::oracle::exponent_grid_oracle;
use macx::region::capacity_membership_with;
use macx::search::SearchOptions;

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacxStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON, bad UTF-8 or an invalid probability table.
    Parse = 2,
    InvalidArgument = 3,
    SizeGuard = 4,
    Infeasible = 5,
    /// The rates violate a precondition of the requested check.
    Precondition = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Values of the `method` argument of [`macx_exponent`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacxMethod {
    Haroutunian = 0,
    SpherePacking = 1,
    /// Exhaustive lattice search of the sphere-packing exponent; `resolution` sets the lattice.
    GridOracle = 2,
}

/// Opaque channel handle.
pub struct MacxChannel {
    inner: Mac,
}

/// Opaque code handle, tied to the alphabets it was parsed with.
pub struct MacxCode {
    inner: MultiUserCode,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> MacxStatus {
    match e {
        Error::Parse { .. }
        | Error::NegativeEntry { .. }
        | Error::NotNormalized { .. }
        | Error::NonFinite { .. }
        | Error::EmptyAlphabet
        | Error::AlphabetMismatch { .. }
        | Error::ShapeMismatch { .. }
        | Error::SymbolOutOfRange { .. }
        | Error::LengthMismatch { .. }
        | Error::EmptySequence => MacxStatus::Parse,
        Error::SizeGuard(_) => MacxStatus::SizeGuard,
        Error::Infeasible(_)
        | Error::NoDecomposition
        | Error::TypeNotAchievable { .. }
        | Error::EmptySet => MacxStatus::Infeasible,
        Error::RatePrecondition(_) => MacxStatus::Precondition,
        _ => MacxStatus::InvalidArgument,
    }
}

/// Runs `f`, recording its error message and converting panics.
fn guarded(f: impl FnOnce() -> Result<(), MacxStatusError>) -> MacxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MacxStatus::Ok,
        Ok(Err(MacxStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal error".into());
            MacxStatus::Internal
        }
    }
}

struct MacxStatusError(MacxStatus, String);

impl From<Error> for MacxStatusError {
    fn from(e: Error) -> Self {
        MacxStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> MacxStatusError {
    MacxStatusError(MacxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, MacxStatusError> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| MacxStatusError(MacxStatus::Parse, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, MacxStatusError> {
    p.as_ref().ok_or_else(|| null(what))
}

fn rates(r1: f64, r2: f64) -> Result<RatePair, MacxStatusError> {
    Ok(RatePair::new(r1, r2)?)
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated, truncated to `len`).
/// Returns the full message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn macx_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Parses a channel from JSON (`x_size`, `y_size`, `z_size`, `w[x][y][z]`).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn macx_channel_from_json(
    json: *const c_char,
    out: *mut *mut MacxChannel,
) -> MacxStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Mac::from_json_str(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(MacxChannel { inner }));
        Ok(())
    })
}

/// Builds a channel from `x_size * y_size * z_size` probabilities laid out as `w[(x * y_size + y) * z_size + z]`.
///
/// # Safety
/// `w` must point to `len` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn macx_channel_new(
    x_size: usize,
    y_size: usize,
    z_size: usize,
    w: *const f64,
    len: usize,
    out: *mut *mut MacxChannel,
) -> MacxStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if w.is_null() {
            return Err(null("w"));
        }
        let expected = x_size
            .checked_mul(y_size)
            .and_then(|v| v.checked_mul(z_size));
        if expected != Some(len) {
            return Err(MacxStatusError(
                MacxStatus::InvalidArgument,
                format!("expected {x_size} x {y_size} x {z_size} entries, got {len}"),
            ));
        }
        let flat = std::slice::from_raw_parts(w, len).to_vec();
        let inner = Mac::from_flat(x_size, y_size, z_size, flat)?;
        *out = Box::into_raw(Box::new(MacxChannel { inner }));
        Ok(())
    })
}

/// Alphabet sizes of a channel.
///
/// # Safety
/// `ch` must come from this library; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn macx_channel_sizes(
    ch: *const MacxChannel,
    x_size: *mut usize,
    y_size: *mut usize,
    z_size: *mut usize,
) -> MacxStatus {
    guarded(|| {
        let w = &handle(ch, "channel")?.inner;
        for (p, v) in [
            (x_size, w.x_size()),
            (y_size, w.y_size()),
            (z_size, w.z_size()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `ch` must be null or come from this library, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn macx_channel_free(ch: *mut MacxChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Decides whether `(r1, r2)` lies in the capacity region. `slack` may be null.
///
/// # Safety
/// `ch` must come from this library and `inside` must be valid.
#[no_mangle]
pub unsafe extern "C" fn macx_capacity_membership(
    ch: *const MacxChannel,
    r1: f64,
    r2: f64,
    seed: u64,
    inside: *mut bool,
    slack: *mut f64,
) -> MacxStatus {
    guarded(|| {
        let w = &handle(ch, "channel")?.inner;
        if inside.is_null() {
            return Err(null("inside"));
        }
        let v = capacity_membership_with(
            w,
            &rates(r1, r2)?,
            &SearchOptions::default().with_seed(seed),
        )?;
        *inside = v.inside;
        if !slack.is_null() {
            *slack = v.slack;
        }
        Ok(())
    })
}

/// Error exponent in bits at `(r1, r2)`; may be `+inf`. `resolution` is the lattice of
/// the grid oracle and is ignored by the other methods.
///
/// # Safety
/// `ch` must come from this library and `value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn macx_exponent(
    ch: *const MacxChannel,
    method: u32,
    r1: f64,
    r2: f64,
    seed: u64,
    resolution: usize,
    value: *mut f64,
) -> MacxStatus {
    guarded(|| {
        let w = &handle(ch, "channel")?.inner;
        if value.is_null() {
            return Err(null("value"));
        }
        let r = rates(r1, r2)?;
        let opts = SearchOptions::default().with_seed(seed);
        let res = match method {
            m if m == MacxMethod::Haroutunian as u32 => haroutunian_exponent(w, &r, &opts)?,
            m if m == MacxMethod::SpherePacking as u32 => sphere_packing_exponent(w, &r, &opts)?,
            m if m == MacxMethod::GridOracle as u32 => {
                exponent_grid_oracle(w, &r, macx::exponent::Method::SpherePacking, resolution)?
            }
            m => {
                return Err(MacxStatusError(
                    MacxStatus::InvalidArgument,
                    format!("unknown method {m}"),
                ))
            }
        };
        *value = res.value;
        Ok(())
    })
}

/// Parses a code (`n`, `u`, `v`) for the input alphabets of `ch`.
///
/// # Safety
/// `ch` must come from this library, `json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn macx_code_from_json(
    ch: *const MacxChannel,
    json: *const c_char,
    out: *mut *mut MacxCode,
) -> MacxStatus {
    guarded(|| {
        let w = &handle(ch, "channel")?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = MultiUserCode::from_json_str(text(json, "json")?, w.x_size(), w.y_size())?;
        *out = Box::into_raw(Box::new(MacxCode { inner }));
        Ok(())
    })
}

/// # Safety
/// `code` must be null or come from this library, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn macx_code_free(code: *mut MacxCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Exact maximal and average error probability of a code under maximum-likelihood decoding.
///
/// # Safety
/// Handles must come from this library; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn macx_code_errors(
    ch: *const MacxChannel,
    code: *const MacxCode,
    max_error: *mut f64,
    avg_error: *mut f64,
) -> MacxStatus {
    guarded(|| {
        let w = &handle(ch, "channel")?.inner;
        let c = &handle(code, "code")?.inner;
        let stats = error_probabilities(w, c)?;
        if !max_error.is_null() {
            *max_error = stats.max_error;
        }
        if !avg_error.is_null() {
            *avg_error = stats.avg_error;
        }
        Ok(())
    })
}

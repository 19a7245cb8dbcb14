//! C ABI for the `superball` library.
//!
//! Every fallible function returns an [`SbStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`sb_last_error`] on the same thread. Objects are opaque handles that
//! must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use superball::constants::{compute_constant_chain, density_lower_bound, lambert_w};
use superball::geometry::{self, BlockSpec, Region, SpaceParams};
use superball::gibbs::{run_chain, ChainOptions, ModelParams};
use superball::lattice_graph::{self, PackOptions, PackingCertificate};
use superball::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Computation = 3,
    Violation = 4,
    Panic = 5,
}

/// Opaque norm space (exponent plus block structure).
pub struct SbSpace(SpaceParams);

/// Opaque packing certificate.
pub struct SbCertificate(PackingCertificate);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbConstantChain {
    pub p: f64,
    pub q: f64,
    pub x_p: f64,
    pub x_gap: f64,
    pub eps_p: f64,
    pub delta_at_eps: f64,
    pub convexity_gap: f64,
    pub c_prime: f64,
    pub c_p: f64,
    pub c_gap: f64,
    pub log_ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbDensityBound {
    pub n: u32,
    pub p: f64,
    pub c_p: f64,
    pub log_ratio: f64,
    pub bound: f64,
    pub fugacity_threshold: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbChainSummary {
    pub alpha_hat: f64,
    pub alpha_se: f64,
    pub fv_hat: f64,
    pub fv_se: f64,
    pub mean_count: f64,
    pub var_count: f64,
    pub volume: f64,
    pub final_count: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbVerification {
    pub valid: bool,
    pub all_inside: bool,
    pub count: u64,
    /// Negative when fewer than two centers.
    pub min_pairwise_distance: f64,
    pub density: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SbStatus {
    match err {
        Error::InvalidInput(_) => SbStatus::InvalidInput,
        Error::Computation(_) => SbStatus::Computation,
        Error::Violation(_) => SbStatus::Violation,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard<F>(f: F) -> SbStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SbStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SbStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a space from exponent `p` and `ncuts` block cuts.
///
/// # Safety
/// `cuts` must point to `ncuts` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_space_new(p: f64, cuts: *const usize, ncuts: usize, out_space: *mut *mut SbSpace) -> SbStatus {
    guard(|| {
        let o = out(out_space, "out")?;
        *o = ptr::null_mut();
        let cuts = slice(cuts, ncuts, "cuts")?.to_vec();
        let space = SpaceParams::new(p, BlockSpec::new(cuts)?)?;
        *o = Box::into_raw(Box::new(SbSpace(space)));
        Ok(())
    })
}

/// # Safety
/// `space` must come from [`sb_space_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_space_free(space: *mut SbSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Dimension of the space, or 0 for NULL.
///
/// # Safety
/// `space` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_space_dim(space: *const SbSpace) -> usize {
    space.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `space` must be a live handle, `x` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn sb_norm(space: *const SbSpace, x: *const f64, len: usize, result: *mut f64) -> SbStatus {
    guard(|| {
        let s = deref(space, "space")?;
        let x = slice(x, len, "x")?;
        *out(result, "result")? = geometry::norm(x, &s.0)?;
        Ok(())
    })
}

/// Distance between `x` and `y`. A positive `torus_side` uses the
/// minimum-image distance on that torus; otherwise the flat distance.
///
/// # Safety
/// `space` must be a live handle, `x` and `y` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn sb_distance(
    space: *const SbSpace,
    x: *const f64,
    y: *const f64,
    len: usize,
    torus_side: f64,
    result: *mut f64,
) -> SbStatus {
    guard(|| {
        let s = deref(space, "space")?;
        let x = slice(x, len, "x")?;
        let y = slice(y, len, "y")?;
        let region = if torus_side > 0.0 {
            Region::Torus { side: torus_side }
        } else {
            Region::Ball { radius: f64::INFINITY }
        };
        *out(result, "result")? = geometry::distance(x, y, &s.0, &region)?;
        Ok(())
    })
}

/// # Safety
/// `space` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_unit_ball_volume(space: *const SbSpace, result: *mut f64) -> SbStatus {
    guard(|| {
        *out(result, "result")? = deref(space, "space")?.0.unit_ball_volume();
        Ok(())
    })
}

/// Radius whose superball has unit volume.
///
/// # Safety
/// `space` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_r_unit(space: *const SbSpace, result: *mut f64) -> SbStatus {
    guard(|| {
        *out(result, "result")? = deref(space, "space")?.0.r_unit();
        Ok(())
    })
}

/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_constant_chain(p: f64, result: *mut SbConstantChain) -> SbStatus {
    guard(|| {
        let o = out(result, "result")?;
        let c = compute_constant_chain(p)?;
        *o = SbConstantChain {
            p: c.p,
            q: c.q,
            x_p: c.x_p,
            x_gap: c.x_gap,
            eps_p: c.eps_p,
            delta_at_eps: c.delta_at_eps,
            convexity_gap: c.convexity_gap,
            c_prime: c.c_prime,
            c_p: c.c_p,
            c_gap: c.c_gap,
            log_ratio: c.log_ratio,
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_density_lower_bound(n: u32, p: f64, result: *mut SbDensityBound) -> SbStatus {
    guard(|| {
        let o = out(result, "result")?;
        let b = density_lower_bound(n, p)?;
        *o = SbDensityBound {
            n: b.n,
            p: b.p,
            c_p: b.c_p,
            log_ratio: b.log_ratio,
            bound: b.bound,
            fugacity_threshold: b.fugacity_threshold,
        };
        Ok(())
    })
}

/// Principal branch of the Lambert W function for `x ≥ 0`.
///
/// # Safety
/// `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_lambert_w(x: f64, result: *mut f64) -> SbStatus {
    guard(|| {
        *out(result, "result")? = lambert_w(x)?;
        Ok(())
    })
}

/// Runs the birth–death chain for superballs of radius `r_unit` on a torus of
/// side `torus_side`.
///
/// # Safety
/// `space` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_simulate(
    space: *const SbSpace,
    torus_side: f64,
    fugacity: f64,
    steps: u64,
    burn_in: u64,
    seed: u64,
    result: *mut SbChainSummary,
) -> SbStatus {
    guard(|| {
        let s = deref(space, "space")?;
        let o = out(result, "result")?;
        let params = ModelParams::new(s.0.clone(), Region::Torus { side: torus_side }, fugacity)?;
        let opts = ChainOptions { steps, burn_in, ..Default::default() };
        opts.validate()?;
        let e = run_chain(&params, &opts, seed)?;
        *o = SbChainSummary {
            alpha_hat: e.alpha_hat,
            alpha_se: e.alpha_se,
            fv_hat: e.fv_hat,
            fv_se: e.fv_se,
            mean_count: e.mean_count,
            var_count: e.var_count,
            volume: e.volume,
            final_count: e.final_count as u64,
        };
        Ok(())
    })
}

/// Builds a certified packing of radius-`r_unit` superballs in `B(0, big_r)`.
/// A non-positive `eps` selects the default cube side.
///
/// # Safety
/// `space` must be a live handle and `out_cert` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_pack(
    space: *const SbSpace,
    big_r: f64,
    eps: f64,
    out_cert: *mut *mut SbCertificate,
) -> SbStatus {
    guard(|| {
        let s = deref(space, "space")?;
        let o = out(out_cert, "out")?;
        *o = ptr::null_mut();
        let eps = if eps > 0.0 {
            eps
        } else {
            lattice_graph::eps_threshold(&s.0) * (1.0 - 1e-6)
        };
        let opts = PackOptions::default();
        let (cert, _) = lattice_graph::pack(&s.0, big_r, eps, &opts)?;
        *o = Box::into_raw(Box::new(SbCertificate(cert)));
        Ok(())
    })
}

/// Parses a certificate from NUL-terminated JSON.
///
/// # Safety
/// `json` must be a valid C string and `out_cert` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_from_json(json: *const c_char, out_cert: *mut *mut SbCertificate) -> SbStatus {
    guard(|| {
        let o = out(out_cert, "out")?;
        *o = ptr::null_mut();
        if json.is_null() {
            return Err(Fail::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::InvalidInput(format!("certificate is not UTF-8: {e}")))?;
        let cert: PackingCertificate =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed certificate: {e}")))?;
        *o = Box::into_raw(Box::new(SbCertificate(cert)));
        Ok(())
    })
}

/// Serializes a certificate. Free the string with [`sb_string_free`].
///
/// # Safety
/// `cert` must be a live handle and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_to_json(cert: *const SbCertificate, out_json: *mut *mut c_char) -> SbStatus {
    guard(|| {
        let c = deref(cert, "cert")?;
        let o = out(out_json, "out")?;
        *o = ptr::null_mut();
        let text = serde_json::to_string(&c.0).map_err(|e| Error::Computation(e.to_string()))?;
        *o = CString::new(text)
            .map_err(|e| Error::Computation(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// Recomputes the packing conditions. Returns `Violation` when the
/// certificate is well-formed but not a valid packing; `result` is filled
/// either way.
///
/// # Safety
/// `cert` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_verify(cert: *const SbCertificate, result: *mut SbVerification) -> SbStatus {
    guard(|| {
        let c = deref(cert, "cert")?;
        let o = out(result, "result")?;
        let v = lattice_graph::verify_packing(&c.0)?;
        *o = SbVerification {
            valid: v.valid,
            all_inside: v.all_inside,
            count: v.count as u64,
            min_pairwise_distance: v.min_pairwise_distance.unwrap_or(-1.0),
            density: v.density,
        };
        if v.valid {
            Ok(())
        } else {
            Err(Error::Violation("certificate is not a valid packing".into()).into())
        }
    })
}

/// Number of centers, or 0 for NULL.
///
/// # Safety
/// `cert` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_len(cert: *const SbCertificate) -> usize {
    cert.as_ref().map_or(0, |c| c.0.centers.len())
}

/// Copies centers row-major into `buf`, which must hold `len × n` values.
///
/// # Safety
/// `cert` must be a live handle and `buf` must point to `buf_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_centers(cert: *const SbCertificate, buf: *mut f64, buf_len: usize) -> SbStatus {
    guard(|| {
        let c = deref(cert, "cert")?;
        let need: usize = c.0.centers.iter().map(Vec::len).sum();
        if buf_len < need {
            return Err(Error::InvalidInput(format!("buffer holds {buf_len} values, need {need}")).into());
        }
        if need == 0 {
            return Ok(());
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, need);
        for (d, v) in dst.iter_mut().zip(c.0.centers.iter().flatten()) {
            *d = *v;
        }
        Ok(())
    })
}

/// # Safety
/// `cert` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_certificate_free(cert: *mut SbCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

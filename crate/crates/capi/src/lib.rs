//! C ABI over the crispedge toolkit.
//!
//! Conventions:
//! - Every fallible function returns a `CedStatus`; `CED_STATUS_OK` is 0.
//! - On failure, `ced_last_error()` returns a thread-local message valid
//!   until the next failing call on the same thread.
//! - `CedNet` is an opaque handle created by `ced_net_create` and released
//!   by `ced_net_free`. Handles are not thread-safe; use one per thread.
//! - Images are double-precision, row-major. Network input is 3-channel
//!   CHW (`3*h*w` values in `[0,1]`); probability output is `h*w`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use crispedge::classic::{canny, BinaryMap, GrayImage};
use crispedge::config::RunConfig;
use crispedge::eval::{binarize, correspond, default_thresholds, default_tolerance, GroundTruthSet};
use crispedge::net::EdgeNet;
use crispedge::params::ParamSet;
use crispedge::tensor::Tensor;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CedStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Internal = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn fail(status: CedStatus, msg: impl Into<Vec<u8>>) -> CedStatus {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
    status
}

/// Opaque network handle: architecture plus its parameter set.
pub struct CedNet {
    net: EdgeNet,
    params: ParamSet,
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ced_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ced_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn cstr<'a>(p: *const c_char) -> Result<&'a str, CedStatus> {
    if p.is_null() {
        return Err(CedStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| CedStatus::InvalidArgument)
}

fn guard<F: FnOnce() -> CedStatus>(f: F) -> CedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CedStatus::Internal, "internal panic"),
    }
}

/// Create a network from a TOML run configuration (NULL for defaults).
/// Weights are freshly initialized from `seed`; load a checkpoint to reuse
/// trained parameters. On success `*out` owns the handle.
///
/// # Safety
/// `config_toml` must be NULL or a valid NUL-terminated string; `out` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ced_net_create(
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut CedNet,
) -> CedStatus {
    guard(|| {
        if out.is_null() {
            return fail(CedStatus::NullPointer, "out handle pointer is NULL");
        }
        let cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            let text = match cstr(config_toml) {
                Ok(t) => t,
                Err(s) => return fail(s, "config_toml is not valid UTF-8"),
            };
            match RunConfig::parse(text) {
                Ok(c) => c,
                Err(e) => return fail(CedStatus::InvalidArgument, e.to_string()),
            }
        };
        match EdgeNet::new(cfg.net.clone(), seed) {
            Ok(net) => {
                let params = net.params();
                *out = Box::into_raw(Box::new(CedNet { net, params }));
                CedStatus::Ok
            }
            Err(e) => fail(CedStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Load checkpoint weights into an existing handle. The checkpoint must
/// match the handle's architecture.
///
/// # Safety
/// `net` must be a live handle from `ced_net_create`; `path` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ced_net_load_checkpoint(
    net: *mut CedNet,
    path: *const c_char,
) -> CedStatus {
    guard(|| {
        if net.is_null() {
            return fail(CedStatus::NullPointer, "net handle is NULL");
        }
        let p = match cstr(path) {
            Ok(p) => p,
            Err(s) => return fail(s, "checkpoint path is NULL or not UTF-8"),
        };
        match (*net).params.load(Path::new(p)) {
            Ok(()) => CedStatus::Ok,
            Err(e) => fail(CedStatus::Io, e.to_string()),
        }
    })
}

/// Eval-mode forward pass. `image` holds `3*h*w` CHW values in `[0,1]`;
/// `out` receives `h*w` edge probabilities.
///
/// # Safety
/// `net` must be live; `image` and `out` must point to buffers of at least
/// `3*h*w` and `h*w` doubles.
#[no_mangle]
pub unsafe extern "C" fn ced_net_predict(
    net: *mut CedNet,
    image: *const f64,
    h: usize,
    w: usize,
    out: *mut f64,
) -> CedStatus {
    guard(|| {
        if net.is_null() || image.is_null() || out.is_null() {
            return fail(CedStatus::NullPointer, "net, image, or out is NULL");
        }
        if h == 0 || w == 0 {
            return fail(CedStatus::InvalidArgument, "image dimensions must be positive");
        }
        let data = std::slice::from_raw_parts(image, 3 * h * w).to_vec();
        let handle = &*net;
        handle.net.set_train(false);
        let x = match Tensor::from_vec([1, 3, h, w], data) {
            Ok(x) => x,
            Err(e) => return fail(CedStatus::InvalidArgument, e.to_string()),
        };
        match handle.net.forward(&x) {
            Ok(p) => {
                let values = p.data();
                std::slice::from_raw_parts_mut(out, h * w).copy_from_slice(&values);
                CedStatus::Ok
            }
            Err(e) => fail(CedStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Release a handle. NULL is a no-op.
///
/// # Safety
/// `net` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ced_net_free(net: *mut CedNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Classical Canny on a grayscale image (`h*w` doubles in `[0,1]`).
/// `out` receives `h*w` bytes, 1 for edge pixels.
///
/// # Safety
/// `image` and `out` must point to buffers of `h*w` doubles / bytes.
#[no_mangle]
pub unsafe extern "C" fn ced_canny(
    image: *const f64,
    h: usize,
    w: usize,
    sigma: f64,
    low: f64,
    high: f64,
    out: *mut u8,
) -> CedStatus {
    guard(|| {
        if image.is_null() || out.is_null() {
            return fail(CedStatus::NullPointer, "image or out is NULL");
        }
        let data = std::slice::from_raw_parts(image, h * w).to_vec();
        match canny(&GrayImage::new(h, w, data), sigma, low, high) {
            Ok(b) => {
                let dst = std::slice::from_raw_parts_mut(out, h * w);
                for (d, &v) in dst.iter_mut().zip(&b.values) {
                    *d = v as u8;
                }
                CedStatus::Ok
            }
            Err(e) => fail(CedStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Single-image C-Eval ODS of a probability map against one binary ground
/// truth (`gt`: `h*w` bytes, nonzero = edge) over the standard 99-threshold
/// sweep. `tol_px <= 0` selects the default 0.0075 x diagonal tolerance.
///
/// # Safety
/// `pred` must hold `h*w` doubles, `gt` `h*w` bytes, `ods_out` one double.
#[no_mangle]
pub unsafe extern "C" fn ced_c_eval_ods(
    pred: *const f64,
    gt: *const u8,
    h: usize,
    w: usize,
    tol_px: f64,
    ods_out: *mut f64,
) -> CedStatus {
    guard(|| {
        if pred.is_null() || gt.is_null() || ods_out.is_null() {
            return fail(CedStatus::NullPointer, "pred, gt, or ods_out is NULL");
        }
        if h == 0 || w == 0 {
            return fail(CedStatus::InvalidArgument, "image dimensions must be positive");
        }
        let p = GrayImage::new(h, w, std::slice::from_raw_parts(pred, h * w).to_vec());
        let g = GroundTruthSet::single(BinaryMap::new(
            h,
            w,
            std::slice::from_raw_parts(gt, h * w).iter().map(|&v| v != 0).collect(),
        ));
        let tol = if tol_px > 0.0 { tol_px } else { default_tolerance(h, w) };
        let mut best = 0.0f64;
        for t in default_thresholds() {
            match correspond(&binarize(&p, t), &g, tol) {
                Ok(c) => best = best.max(c.f1()),
                Err(e) => return fail(CedStatus::InvalidArgument, e.to_string()),
            }
        }
        *ods_out = best;
        CedStatus::Ok
    })
}

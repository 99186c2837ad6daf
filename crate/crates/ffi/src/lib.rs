//! C ABI over the ripsim library.
//!
//! Conventions: every fallible call returns a [`RipsimStatus`]; results come
//! back through out-pointers; array arguments are flat `(ptr, len)` pairs;
//! the measurement grid is an opaque handle with explicit new/free; panics
//! are caught at the boundary and reported as [`RipsimStatus::Panic`] instead
//! of unwinding into foreign frames.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use ripsim::{
    estimate_channel_profile, estimate_qrange, predict_phase_error, wrap_to_pi, ChannelEstimate,
    Error, EstimatorConfig, MeasurementGrid, MultipathProfile, PathComponent, QRangeSearchConfig,
    Sender,
};

/// Result code of every fallible `ripsim_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RipsimStatus {
    /// The call succeeded and all out-parameters are set.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation: bad grid parameters, wrong series
    /// length, out-of-range values, or non-finite data.
    InvalidArgument = 2,
    /// The input was well-formed but no estimate could be produced.
    EstimationFailed = 3,
    /// A panic was caught at the boundary. Memory is intact, but the call's
    /// out-parameters must be considered unset.
    Panic = 4,
}

fn status_of(err: &Error) -> RipsimStatus {
    match err {
        Error::EstimationFailed(_) => RipsimStatus::EstimationFailed,
        _ => RipsimStatus::InvalidArgument,
    }
}

fn guarded(body: impl FnOnce() -> RipsimStatus) -> RipsimStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(RipsimStatus::Panic)
}

/// Opaque measurement-grid handle. Create with [`ripsim_grid_new`], release
/// with [`ripsim_grid_free`].
pub struct RipsimGrid(MeasurementGrid);

/// Sender selector for channel estimation: 0 = sender A, 1 = sender B.
fn sender_of(raw: u32) -> Option<Sender> {
    match raw {
        0 => Some(Sender::A),
        1 => Some(Sender::B),
        _ => None,
    }
}

/// Creates a measurement grid and stores the handle in `*out_grid`.
///
/// `f_b0` is sender B's base frequency in Hz, `tone_gap` the A−B frequency
/// offset in Hz, `delta_f` the tuning step in Hz, and `num_freqs` the number
/// of measurement steps.
///
/// # Safety
/// `out_grid` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ripsim_grid_new(
    f_b0: f64,
    tone_gap: f64,
    delta_f: f64,
    num_freqs: usize,
    out_grid: *mut *mut RipsimGrid,
) -> RipsimStatus {
    guarded(|| {
        if out_grid.is_null() {
            return RipsimStatus::NullPointer;
        }
        match MeasurementGrid::new(f_b0, tone_gap, delta_f, num_freqs) {
            Ok(grid) => {
                unsafe { *out_grid = Box::into_raw(Box::new(RipsimGrid(grid))) };
                RipsimStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Releases a grid handle. A null `grid` is a no-op.
///
/// # Safety
/// `grid` must be null or a handle from [`ripsim_grid_new`] that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn ripsim_grid_free(grid: *mut RipsimGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Wraps an angle in radians into (−π, π]. NaN propagates.
#[no_mangle]
pub extern "C" fn ripsim_wrap_to_pi(angle: f64) -> f64 {
    wrap_to_pi(angle)
}

/// Estimates one channel's multipath profile from `len` amplitude samples
/// (one per grid step, in step order), using the default estimator settings
/// for the grid.
///
/// `sender` is 0 for A, 1 for B. Up to `cap` recovered components are
/// written to the parallel arrays `out_alpha` (amplitude ratios), `out_tau`
/// (delays, seconds), and `out_theta` (phases, radians); the count goes to
/// `*out_count` and the estimated line-of-sight amplitude to `*out_los`.
/// `cap` must cover the estimator's path budget (4 with default settings) or
/// the call fails with `InvalidArgument` rather than truncate.
///
/// # Safety
/// `amplitudes` must point to `len` readable doubles; `out_alpha`,
/// `out_tau`, `out_theta` to `cap` writable doubles each; `out_count` and
/// `out_los` to writable storage; `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ripsim_estimate_channel_profile(
    grid: *const RipsimGrid,
    amplitudes: *const f64,
    len: usize,
    sender: u32,
    out_alpha: *mut f64,
    out_tau: *mut f64,
    out_theta: *mut f64,
    cap: usize,
    out_count: *mut usize,
    out_los: *mut f64,
) -> RipsimStatus {
    guarded(|| {
        if grid.is_null()
            || amplitudes.is_null()
            || out_alpha.is_null()
            || out_tau.is_null()
            || out_theta.is_null()
            || out_count.is_null()
            || out_los.is_null()
        {
            return RipsimStatus::NullPointer;
        }
        let Some(sender) = sender_of(sender) else {
            return RipsimStatus::InvalidArgument;
        };
        let grid = unsafe { &(*grid).0 };
        let amps = unsafe { std::slice::from_raw_parts(amplitudes, len) };
        let cfg = EstimatorConfig::for_grid(grid);
        let estimate = match estimate_channel_profile(amps, grid, sender, &cfg) {
            Ok(est) => est,
            Err(err) => return status_of(&err),
        };
        let components = estimate.profile_hat.components();
        if components.len() > cap {
            return RipsimStatus::InvalidArgument;
        }
        for (i, c) in components.iter().enumerate() {
            unsafe {
                *out_alpha.add(i) = c.alpha;
                *out_tau.add(i) = c.tau;
                *out_theta.add(i) = c.theta;
            }
        }
        unsafe {
            *out_count = components.len();
            *out_los = estimate.los_amplitude_hat;
        }
        RipsimStatus::Ok
    })
}

/// Evaluates the phase distortion (radians) that a multipath profile of
/// `count` components induces at frequency `f` Hz, writing it to `*out_eps`.
///
/// The arrays mirror the output of [`ripsim_estimate_channel_profile`];
/// `count` may be zero, which yields zero distortion.
///
/// # Safety
/// `alpha`, `tau`, `theta` must point to `count` readable doubles each
/// (null is accepted when `count` is zero); `out_eps` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ripsim_predict_phase_error(
    alpha: *const f64,
    tau: *const f64,
    theta: *const f64,
    count: usize,
    f: f64,
    out_eps: *mut f64,
) -> RipsimStatus {
    guarded(|| {
        if out_eps.is_null() || (count > 0 && (alpha.is_null() || tau.is_null() || theta.is_null()))
        {
            return RipsimStatus::NullPointer;
        }
        let mut components = Vec::with_capacity(count);
        for i in 0..count {
            let (a, t, th) =
                unsafe { (*alpha.add(i), *tau.add(i), *theta.add(i)) };
            match PathComponent::new(a, t, th) {
                Ok(c) => components.push(c),
                Err(err) => return status_of(&err),
            }
        }
        let profile = match MultipathProfile::new(components) {
            Ok(p) => p,
            Err(err) => return status_of(&err),
        };
        let estimate = ChannelEstimate {
            los_amplitude_hat: 1.0,
            profile_hat: profile,
            residual_rms: 0.0,
        };
        unsafe { *out_eps = predict_phase_error(&estimate, f) };
        RipsimStatus::Ok
    })
}

/// Recovers the q-range (meters) from `len` phase-difference samples (one
/// per grid step) by maximum-score search over the grid's unambiguous
/// range. Writes the range to `*out_d` and its mean-cosine score (1 is a
/// perfect fit) to `*out_score`.
///
/// # Safety
/// `phases` must point to `len` readable doubles; `out_d` and `out_score`
/// must be writable; `grid` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ripsim_estimate_qrange(
    grid: *const RipsimGrid,
    phases: *const f64,
    len: usize,
    out_d: *mut f64,
    out_score: *mut f64,
) -> RipsimStatus {
    guarded(|| {
        if grid.is_null() || phases.is_null() || out_d.is_null() || out_score.is_null() {
            return RipsimStatus::NullPointer;
        }
        let grid = unsafe { &(*grid).0 };
        let phases = unsafe { std::slice::from_raw_parts(phases, len) };
        let cfg = QRangeSearchConfig::for_grid(grid);
        match estimate_qrange(phases, grid, &cfg) {
            Ok((d, score)) => {
                unsafe {
                    *out_d = d;
                    *out_score = score;
                }
                RipsimStatus::Ok
            }
            Err(err) => status_of(&err),
        }
    })
}

/// Returns the library version as a static NUL-terminated UTF-8 string.
#[no_mangle]
pub extern "C" fn ripsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI over `sharpscope`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns an
//! [`SsStatus`]; on failure the message is kept per thread and can be read
//! with [`ss_last_error_length`] and [`ss_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sharpscope::data::{load_idx, synthetic_dataset, Dataset, Standardization};
use sharpscope::models::ArchConfig;
use sharpscope::numkit::SeededRng;
use sharpscope::phases::{scan_critical_constants, CGrid, ScanConfig};
use sharpscope::training::{
    sgd_trajectory, LrRule, ProbeConfig, ProbeSchedule, TrainConfig, Trajectory,
};
use sharpscope::uvlab;
use sharpscope::Error;

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Divergence = 6,
    Numerical = 7,
    Panic = 8,
    OutOfRange = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> SsStatus {
    match err {
        Error::Io { .. } => SsStatus::Io,
        Error::Format { .. } | Error::Json(_) => SsStatus::Format,
        Error::Divergence { .. } => SsStatus::Divergence,
        Error::Fit(_) | Error::Undefined(_) => SsStatus::Numerical,
        Error::Config(_) | Error::Collision { .. } => SsStatus::Config,
        Error::Contract(_) | Error::Parameter(_) | Error::Shape(_) => SsStatus::InvalidArgument,
    }
}

struct Failure(SsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            SsStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map(str::to_string).map_err(|_| {
        Failure(
            SsStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

/// Bytes in the last error message of this thread, excluding the NUL.
#[no_mangle]
pub extern "C" fn ss_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` as a NUL-terminated string,
/// truncating to `len - 1` bytes. Returns the number of bytes written,
/// excluding the NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ss_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
        *buf.add(n) = 0;
        n
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ss_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque training set.
pub struct SsDataset(Dataset);

/// Opaque SGD trajectory.
pub struct SsTrajectory(Trajectory);

/// Balanced Gaussian classes with globally standardized inputs.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_synthetic(
    n: usize,
    n_in: usize,
    classes: usize,
    seed: u64,
    out: *mut *mut SsDataset,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = synthetic_dataset(
            n,
            n_in,
            classes,
            Standardization::Global,
            &mut SeededRng::new(seed),
        )?;
        *out = Box::into_raw(Box::new(SsDataset(ds)));
        Ok(())
    })
}

/// Loads IDX image and label files. `limit` keeps the first `limit`
/// examples; 0 keeps all of them.
///
/// # Safety
/// The paths must be NUL-terminated strings and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_idx(
    images_path: *const c_char,
    labels_path: *const c_char,
    classes: usize,
    limit: usize,
    out: *mut *mut SsDataset,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let images = path_arg(images_path, "images_path")?;
        let labels = path_arg(labels_path, "labels_path")?;
        let mut ds = load_idx(&images, &labels, classes, Standardization::Global)?;
        if limit > 0 && limit < ds.len() {
            let idx: Vec<usize> = (0..limit).collect();
            let inputs = ds.select(&idx)?.inputs;
            let name = ds.name.clone();
            ds.labels.truncate(limit);
            ds = Dataset::new(inputs, ds.labels, classes, name)?;
        }
        *out = Box::into_raw(Box::new(SsDataset(ds)));
        Ok(())
    })
}

/// Number of examples, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_len(ds: *const SsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// Input dimension, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_n_in(ds: *const SsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_in())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_dataset_free(ds: *mut SsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Settings for one SGD run on a ReLU network with `eta = c / lambda_0`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SsTrainOptions {
    pub depth: usize,
    pub width: usize,
    pub c: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Probe-set size for sharpness.
    pub probe_m: usize,
    pub probe_iters: usize,
    /// Measure sharpness at every step; otherwise only at step 0.
    pub sharpness_every_step: bool,
    pub divergence_k: f64,
}

/// Defaults: 4x32, c = 1, 100 steps, batch 256, probe 2048 with 20
/// iterations, sharpness only at step 0, K = 1e5.
#[no_mangle]
pub extern "C" fn ss_train_options_default() -> SsTrainOptions {
    SsTrainOptions {
        depth: 4,
        width: 32,
        c: 1.0,
        steps: 100,
        batch_size: 256,
        seed: 0,
        probe_m: 2048,
        probe_iters: 20,
        sharpness_every_step: false,
        divergence_k: 1e5,
    }
}

fn arch_for(ds: &Dataset, depth: usize, width: usize) -> ArchConfig {
    ArchConfig::relu(depth, width, ds.n_in(), ds.n_out())
}

/// Trains from the seeded initialization and returns the trajectory.
/// A run that crosses `divergence_k` stops early and is still returned.
///
/// # Safety
/// `ds` and `opts` must be live pointers and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn ss_train(
    ds: *const SsDataset,
    opts: *const SsTrainOptions,
    out: *mut *mut SsTrajectory,
) -> SsStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("ds"))?.0;
        let o = *opts.as_ref().ok_or_else(|| null("opts"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let schedule = if o.sharpness_every_step {
            ProbeSchedule::EveryStep
        } else {
            ProbeSchedule::UpTo { last: 0 }
        };
        let cfg = TrainConfig {
            arch: arch_for(ds, o.depth, o.width),
            dataset: ds.name.clone(),
            batch_size: o.batch_size,
            lr: LrRule::C(o.c),
            steps: o.steps,
            seed: o.seed,
            probe: ProbeConfig {
                m: o.probe_m,
                iters: o.probe_iters,
                schedule,
                ..Default::default()
            },
            divergence_k: o.divergence_k,
            loss: Default::default(),
        };
        let traj = sgd_trajectory(&cfg, ds)?;
        *out = Box::into_raw(Box::new(SsTrajectory(traj)));
        Ok(())
    })
}

/// One recorded step. `sharpness` is NaN when it was not measured.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SsStepRecord {
    pub t: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub sharpness: f64,
}

/// Number of recorded steps, or 0 for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_len(tr: *const SsTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `tr` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_get(
    tr: *const SsTrajectory,
    i: usize,
    out: *mut SsStepRecord,
) -> SsStatus {
    guard(|| {
        let tr = &tr.as_ref().ok_or_else(|| null("tr"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = tr.records.get(i).ok_or_else(|| {
            Failure(
                SsStatus::OutOfRange,
                format!("index {i} out of range for {} records", tr.records.len()),
            )
        })?;
        *out = SsStepRecord {
            t: r.t,
            loss: r.loss,
            accuracy: r.accuracy,
            sharpness: r.sharpness.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Initial sharpness `lambda_0`, or NaN for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_lambda0(tr: *const SsTrajectory) -> f64 {
    tr.as_ref().map_or(f64::NAN, |t| t.0.lambda0)
}

/// Learning rate used, or NaN for a null handle.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_eta(tr: *const SsTrajectory) -> f64 {
    tr.as_ref().map_or(f64::NAN, |t| t.0.eta)
}

/// First step at which the loss crossed K, or -1 when the run stayed finite.
///
/// # Safety
/// `tr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_diverged_at(tr: *const SsTrajectory) -> i64 {
    tr.as_ref()
        .and_then(|t| t.0.diverged_at)
        .map_or(-1, |s| s as i64)
}

/// # Safety
/// `tr` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ss_trajectory_free(tr: *mut SsTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Grid `c = 2^x` for `x` from `x_min` to `x_max` in steps of `x_step`,
/// scanned for `t1` steps from one initialization.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SsScanOptions {
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub probe_m: usize,
    pub probe_iters: usize,
    pub t1: usize,
    pub divergence_k: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub x_step: f64,
    /// Interpolation points for `c_barrier`; 0 skips it.
    pub barrier_points: usize,
}

/// Defaults: 4x32, batch 256, probe 2048 with 20 iterations, t1 = 10,
/// K = 1e5, x in [-1, 6] step 0.1, 50 barrier points.
#[no_mangle]
pub extern "C" fn ss_scan_options_default() -> SsScanOptions {
    SsScanOptions {
        depth: 4,
        width: 32,
        seed: 0,
        batch_size: 256,
        probe_m: 2048,
        probe_iters: 20,
        t1: 10,
        divergence_k: 1e5,
        x_min: -1.0,
        x_max: 6.0,
        x_step: 0.1,
        barrier_points: 50,
    }
}

/// Critical learning-rate constants; NaN marks a constant not found.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SsCriticalConstants {
    pub c_loss: f64,
    pub c_sharp: f64,
    pub c_max: f64,
    pub c_barrier: f64,
    pub lambda0: f64,
    pub loss0: f64,
}

/// Scans the grid and reports the critical constants of one seed.
///
/// # Safety
/// `ds` and `opts` must be live pointers and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_scan_critical_constants(
    ds: *const SsDataset,
    opts: *const SsScanOptions,
    out: *mut SsCriticalConstants,
) -> SsStatus {
    guard(|| {
        let ds = &ds.as_ref().ok_or_else(|| null("ds"))?.0;
        let o = *opts.as_ref().ok_or_else(|| null("opts"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let probe = ProbeConfig {
            m: o.probe_m,
            iters: o.probe_iters,
            schedule: ProbeSchedule::EveryStep,
            ..Default::default()
        };
        let mut cfg = ScanConfig::new(arch_for(ds, o.depth, o.width), o.batch_size, probe);
        cfg.dataset = ds.name.clone();
        cfg.t1 = o.t1;
        cfg.divergence_k = o.divergence_k;
        cfg.barrier_points = o.barrier_points;
        let grid = CGrid::new(o.x_min, o.x_max, o.x_step)?;
        let k = scan_critical_constants(&cfg, ds, &grid, o.seed)?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = SsCriticalConstants {
            c_loss: nan(k.c_loss),
            c_sharp: nan(k.c_sharp),
            c_max: nan(k.c_max),
            c_barrier: nan(k.c_barrier),
            lambda0: k.lambda0,
            loss0: k.loss0,
        };
        Ok(())
    })
}

/// Initialization averages for the `uv` model of width `w`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SsUvMoments {
    pub m2: f64,
    pub m4: f64,
    pub m42: f64,
}

/// Closed-form initialization moments. Returns NaNs for `w == 0`.
#[no_mangle]
pub extern "C" fn ss_uv_moments(w: usize) -> SsUvMoments {
    if w == 0 {
        return SsUvMoments {
            m2: f64::NAN,
            m4: f64::NAN,
            m42: f64::NAN,
        };
    }
    let m = uvlab::uv_moments(w);
    SsUvMoments {
        m2: m.m2,
        m4: m.m4,
        m42: m.m42,
    }
}

/// Expected `L_1 / L_0` after one step with `eta = k / Tr H_0`. NaN for `w == 0`.
#[no_mangle]
pub extern "C" fn ss_uv_first_step_loss_ratio(k: f64, w: usize) -> f64 {
    if w == 0 {
        return f64::NAN;
    }
    uvlab::uv_expected_first_step_loss_ratio(k, w)
}

/// Smallest `k` at which the expected loss grows after one step. NaN for `w == 0`.
#[no_mangle]
pub extern "C" fn ss_uv_k_loss(w: usize) -> f64 {
    if w == 0 {
        return f64::NAN;
    }
    uvlab::uv_k_loss(w)
}

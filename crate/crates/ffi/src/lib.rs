//! C ABI over the pome training stack.
//!
//! Every fallible function returns a [`PomeStatus`]; on failure the message is
//! available from [`pome_last_error_message`] on the same thread. Trainers are
//! opaque handles created by [`pome_trainer_new`] and released with
//! [`pome_trainer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pome::algorithm::{ConfigOverrides, IterationReport, Trainer};
use pome::targets::{median, pome_advantages, pome_delta};
use pome::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PomeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Shape = 4,
    NonFinite = 5,
    Io = 6,
    Checkpoint = 7,
    Finished = 8,
    Internal = 9,
    Panic = 10,
}

/// Opaque training session.
pub struct PomeTrainer {
    inner: Trainer,
}

/// Per-iteration statistics, mirroring one metrics row.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PomeIterationReport {
    pub iteration: u64,
    pub total_steps: u64,
    pub mean_return: f64,
    pub median_return: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub reward_loss: f64,
    pub transition_loss: f64,
    pub mean_eps: f64,
    pub eps_bar_mean: f64,
    pub mean_abs_bonus: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub alpha: f64,
    pub lr: f64,
}

impl From<&IterationReport> for PomeIterationReport {
    fn from(r: &IterationReport) -> Self {
        Self {
            iteration: r.iteration as u64,
            total_steps: r.total_steps as u64,
            mean_return: r.mean_return,
            median_return: r.median_return,
            surrogate: r.surrogate,
            value_loss: r.value_loss,
            reward_loss: r.reward_loss,
            transition_loss: r.transition_loss,
            mean_eps: r.mean_eps,
            eps_bar_mean: r.eps_bar_mean,
            mean_abs_bonus: r.mean_abs_bonus,
            approx_kl: r.approx_kl,
            clip_fraction: r.clip_fraction,
            alpha: r.alpha,
            lr: r.lr,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

fn status_of(err: &Error) -> PomeStatus {
    match err {
        Error::Config { .. } => PomeStatus::Config,
        Error::Shape { .. } | Error::Index { .. } => PomeStatus::Shape,
        Error::NonFinite(_) | Error::ModelDivergence(_) => PomeStatus::NonFinite,
        Error::Io(_) => PomeStatus::Io,
        Error::Checkpoint { .. } => PomeStatus::Checkpoint,
        Error::Worker { source, .. } | Error::Iteration { source, .. } => status_of(source),
        _ => PomeStatus::Internal,
    }
}

type Outcome = Result<(), (PomeStatus, String)>;

fn fail(status: PomeStatus, message: impl Into<String>) -> Outcome {
    Err((status, message.into()))
}

fn from_core(err: Error) -> (PomeStatus, String) {
    (status_of(&err), err.to_string())
}

/// Runs `body`, recording its error message and converting panics.
fn guard(body: impl FnOnce() -> Outcome) -> PomeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            PomeStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_owned());
            set_error(format!("panic: {msg}"));
            PomeStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, (PomeStatus, String)> {
    if ptr.is_null() {
        return Err((PomeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| (PomeStatus::InvalidArgument, format!("{what} is not utf-8: {e}")))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (PomeStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err((PomeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (PomeStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err((PomeStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pome_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn pome_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a trainer from a TOML config (the same keys as a config file; an
/// empty string means all defaults).
///
/// # Safety
/// `config_toml` must be a valid C string; `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn pome_trainer_new(config_toml: *const c_char, out: *mut *mut PomeTrainer) -> PomeStatus {
    guard(|| {
        if out.is_null() {
            return fail(PomeStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let text = c_str(config_toml, "config_toml")?;
        let config = ConfigOverrides::from_toml_str(text)
            .and_then(|o| o.resolve())
            .map_err(from_core)?;
        let inner = Trainer::new(config).map_err(from_core)?;
        *out = Box::into_raw(Box::new(PomeTrainer { inner }));
        Ok(())
    })
}

/// Releases a trainer. Null is ignored.
///
/// # Safety
/// `trainer` must come from [`pome_trainer_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pome_trainer_free(trainer: *mut PomeTrainer) {
    if !trainer.is_null() {
        drop(Box::from_raw(trainer));
    }
}

/// Runs one training iteration. Returns `POME_STATUS_FINISHED` once the step budget is spent.
///
/// # Safety
/// `trainer` must be a live handle; `report` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pome_trainer_step(trainer: *mut PomeTrainer, report: *mut PomeIterationReport) -> PomeStatus {
    guard(|| {
        let Some(t) = trainer.as_mut() else {
            return fail(PomeStatus::NullPointer, "trainer is null");
        };
        if t.inner.is_finished() {
            return fail(PomeStatus::Finished, "step budget exhausted");
        }
        let r = t.inner.train_iteration().map_err(from_core)?;
        if let Some(out) = report.as_mut() {
            *out = PomeIterationReport::from(&r);
        }
        Ok(())
    })
}

/// 1 when the step budget is spent, 0 otherwise, -1 for a null handle.
///
/// # Safety
/// `trainer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pome_trainer_is_finished(trainer: *const PomeTrainer) -> i32 {
    match trainer.as_ref() {
        Some(t) => i32::from(t.inner.is_finished()),
        None => -1,
    }
}

/// Writes the current parameters in the portable checkpoint format.
///
/// # Safety
/// `trainer` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn pome_trainer_save_checkpoint(trainer: *const PomeTrainer, path: *const c_char) -> PomeStatus {
    guard(|| {
        let Some(t) = trainer.as_ref() else {
            return fail(PomeStatus::NullPointer, "trainer is null");
        };
        let path = c_str(path, "path")?;
        pome::checkpoint::save(Path::new(path), &t.inner.agent().params).map_err(from_core)
    })
}

/// `out[i] = delta[i] + alpha·clip(eps[i] − eps_bar, −|delta[i]|, |delta[i]|)`.
///
/// # Safety
/// `delta`, `eps` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pome_delta_batch(
    delta: *const f64,
    eps: *const f64,
    len: usize,
    eps_bar: f64,
    alpha: f64,
    out: *mut f64,
) -> PomeStatus {
    guard(|| {
        let delta = slice(delta, len, "delta")?;
        let eps = slice(eps, len, "eps")?;
        let out = slice_mut(out, len, "out")?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return fail(PomeStatus::InvalidArgument, format!("alpha {alpha} must be finite and non-negative"));
        }
        for ((o, &d), &e) in out.iter_mut().zip(delta).zip(eps) {
            *o = pome_delta(d, e, eps_bar, alpha);
        }
        Ok(())
    })
}

/// Median of `len` values (mean of the middle pair for even `len`).
///
/// # Safety
/// `values` must hold `len` doubles; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pome_median(values: *const f64, len: usize, out: *mut f64) -> PomeStatus {
    guard(|| {
        let values = slice(values, len, "values")?;
        if values.is_empty() {
            return fail(PomeStatus::InvalidArgument, "median of an empty array");
        }
        let Some(out) = out.as_mut() else {
            return fail(PomeStatus::NullPointer, "out is null");
        };
        *out = median(values);
        Ok(())
    })
}

/// Discounted λ-returns of TD errors within one segment, cut at `dones[t] != 0`.
///
/// # Safety
/// `deltas`, `dones` and `out` must each hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn pome_advantages_batch(
    deltas: *const f64,
    dones: *const u8,
    len: usize,
    gamma: f64,
    lambda: f64,
    out: *mut f64,
) -> PomeStatus {
    guard(|| {
        let deltas = slice(deltas, len, "deltas")?;
        let dones: Vec<bool> = slice(dones, len, "dones")?.iter().map(|&d| d != 0).collect();
        let out = slice_mut(out, len, "out")?;
        for (name, v) in [("gamma", gamma), ("lambda", lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(PomeStatus::InvalidArgument, format!("{name} {v} must lie in (0, 1]"));
            }
        }
        out.copy_from_slice(&pome_advantages(deltas, &dones, gamma, lambda));
        Ok(())
    })
}

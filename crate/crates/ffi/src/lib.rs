//! C ABI over the `himap` library.
//!
//! Conventions:
//! * Every fallible call returns a [`HimapStatus`]; `HIMAP_STATUS_OK` is 0.
//!   On failure a message is kept per thread and can be copied out with
//!   [`himap_last_error_message`].
//! * Complex arrays are interleaved `re, im` pairs of `double`. Matrices are
//!   row-major, so an M x M complex matrix takes `2 M M` doubles.
//! * Objects are opaque handles created by `*_new`/`*_parse`/`*_optimize`
//!   and released by the matching `*_free`. Passing NULL to a free is a no-op.
//! * Panics never cross the boundary; they surface as `HIMAP_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use himap::harness::{parse_spec, run_experiment, ExperimentSpec};
use himap::linalg::{self, ComplexMatrix};
use himap::prewhiten::{whiteness, PhaseGrid, PhaseMatrix};
use himap::psn_opt::{optimize_psn, OptimizationTrace, OptimizerConfig};
use himap::HimapError;

/// Result codes of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HimapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotHermitian = 4,
    NotPositiveDefinite = 5,
    Singular = 6,
    RankDeficient = 7,
    NonFinite = 8,
    SpecFile = 9,
    Io = 10,
    Internal = 11,
}

impl From<&HimapError> for HimapStatus {
    fn from(e: &HimapError) -> Self {
        match e {
            HimapError::InvalidConfig(_) | HimapError::OutOfRange(_) | HimapError::ZeroDenominator(_) => {
                Self::InvalidArgument
            }
            HimapError::Dimension(_) => Self::Dimension,
            HimapError::NotHermitian(_) => Self::NotHermitian,
            HimapError::NotPositiveDefinite { .. } => Self::NotPositiveDefinite,
            HimapError::Singular(_) => Self::Singular,
            HimapError::RankDeficient(_) => Self::RankDeficient,
            HimapError::NonFinite(_) => Self::NonFinite,
            HimapError::SpecFile { .. } => Self::SpecFile,
            HimapError::Io(_) => Self::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Fail(HimapStatus, String);

impl From<HimapError> for Fail {
    fn from(e: HimapError) -> Self {
        Fail(HimapStatus::from(&e), e.to_string())
    }
}

fn fail<T>(status: HimapStatus, msg: impl Into<String>) -> Result<T, Fail> {
    Err(Fail(status, msg.into()))
}

/// Runs `body`, records the error message and maps panics to `Internal`.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> HimapStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            HimapStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            HimapStatus::Internal
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        fail(HimapStatus::NullPointer, format!("{what} is NULL"))
    } else {
        Ok(())
    }
}

/// Reads an interleaved row-major complex M x M matrix.
///
/// # Safety
/// `data` must point to `2 m m` readable doubles.
unsafe fn read_matrix(data: *const f64, m: usize) -> Result<ComplexMatrix, Fail> {
    non_null(data, "matrix")?;
    if m == 0 {
        return fail(HimapStatus::Dimension, "matrix order must be positive");
    }
    let v = std::slice::from_raw_parts(data, 2 * m * m);
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return fail(HimapStatus::NonFinite, format!("non-finite matrix entry at double {i}"));
    }
    Ok(ComplexMatrix::from_fn(m, m, |i, j| linalg::c(v[2 * (i * m + j)], v[2 * (i * m + j) + 1])))
}

fn grid_from_bits(bits: u32) -> Result<PhaseGrid, Fail> {
    match bits {
        0 => Ok(PhaseGrid::CONTINUOUS),
        1..=30 => Ok(PhaseGrid::bits(bits)),
        _ => fail(HimapStatus::InvalidArgument, format!("phase bits {bits} outside 0..=30")),
    }
}

/// Copies the calling thread's last error message into `buf` (always NUL
/// terminated when `len > 0`) and returns the full message length in bytes,
/// excluding the terminator. Pass `buf = NULL` to query the length.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn himap_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn himap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Predicted SQNR in dB of a bypassed array at the given SIR and ENOB.
#[no_mangle]
pub extern "C" fn himap_predicted_sqnr_db(sir_db: f64, enob: f64) -> f64 {
    himap::adc::predicted_sqnr_db(sir_db, enob)
}

/// Writes the half-wavelength ULA response for `theta_deg` as `m`
/// interleaved complex values into `out` (`2 m` doubles).
///
/// # Safety
/// `out` must point to `2 m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn himap_steering_vector(theta_deg: f64, m: usize, out: *mut f64) -> HimapStatus {
    guard(|| {
        non_null(out, "out")?;
        if m == 0 {
            return fail(HimapStatus::Dimension, "m must be positive");
        }
        if !theta_deg.is_finite() {
            return fail(HimapStatus::NonFinite, "theta is not finite");
        }
        let a = himap::scenario::steering_vector(theta_deg, m);
        let out = std::slice::from_raw_parts_mut(out, 2 * m);
        for (i, z) in a.iter().enumerate() {
            out[2 * i] = z.re;
            out[2 * i + 1] = z.im;
        }
        Ok(())
    })
}

/// CFAR threshold on the detection statistic for `m` antennas, preamble
/// length `l2` and false-alarm rate `far`.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn himap_beta_threshold(m: usize, l2: usize, far: f64, out: *mut f64) -> HimapStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = himap::detect::beta_threshold(m, l2, far)?;
        Ok(())
    })
}

/// Optimized phase-shifter network.
pub struct HimapPsn {
    phases: PhaseMatrix,
    trace: OptimizationTrace,
}

/// Optimizer settings. Zero fields take the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HimapOptimizerSettings {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub rel_tol: f64,
}

/// Optimizes the network for the `m` x `m` Hermitian positive-definite
/// covariance `cov`. `phase_bits = 0` selects continuous shifters.
///
/// # Safety
/// `cov` must point to `2 m m` doubles; `settings` may be NULL; `out` must
/// point to a writable handle slot, which receives a new handle on success.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_optimize(
    cov: *const f64,
    m: usize,
    phase_bits: u32,
    seed: u64,
    settings: *const HimapOptimizerSettings,
    out: *mut *mut HimapPsn,
) -> HimapStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let r = read_matrix(cov, m)?;
        let grid = grid_from_bits(phase_bits)?;
        let mut cfg = OptimizerConfig::default();
        if let Some(s) = settings.as_ref() {
            if s.restarts > 0 {
                cfg.restarts = s.restarts;
            }
            if s.max_sweeps > 0 {
                cfg.max_sweeps = s.max_sweeps;
            }
            if s.rel_tol != 0.0 {
                cfg.rel_tol = s.rel_tol;
            }
        }
        let mut rng = himap::rng::root(seed);
        let (phases, trace) = optimize_psn(&r, grid, &cfg, &mut rng)?;
        *out = Box::into_raw(Box::new(HimapPsn { phases, trace }));
        Ok(())
    })
}

/// # Safety
/// `psn` must be NULL or a handle from [`himap_psn_optimize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_free(psn: *mut HimapPsn) {
    if !psn.is_null() {
        drop(Box::from_raw(psn));
    }
}

/// Network order M, or 0 for a NULL handle.
///
/// # Safety
/// `psn` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_order(psn: *const HimapPsn) -> usize {
    psn.as_ref().map_or(0, |p| p.phases.m())
}

/// Copies the `M M` phases (radians, row-major) into `out`.
///
/// # Safety
/// `psn` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_phases(psn: *const HimapPsn, out: *mut f64, len: usize) -> HimapStatus {
    guard(|| {
        non_null(psn, "psn")?;
        non_null(out, "out")?;
        let p = &*psn;
        let src = p.phases.as_slice();
        if len < src.len() {
            return fail(HimapStatus::Dimension, format!("need {} doubles, got {len}", src.len()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
        Ok(())
    })
}

/// Number of entries in the objective trace.
///
/// # Safety
/// `psn` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_trace_len(psn: *const HimapPsn) -> usize {
    psn.as_ref().map_or(0, |p| p.trace.objective_per_update.len())
}

/// Copies the whiteness after every row update (starting with the
/// initialization) into `out`.
///
/// # Safety
/// `psn` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_trace(psn: *const HimapPsn, out: *mut f64, len: usize) -> HimapStatus {
    guard(|| {
        non_null(psn, "psn")?;
        non_null(out, "out")?;
        let t = &(*psn).trace.objective_per_update;
        if len < t.len() {
            return fail(HimapStatus::Dimension, format!("need {} doubles, got {len}", t.len()));
        }
        ptr::copy_nonoverlapping(t.as_ptr(), out, t.len());
        Ok(())
    })
}

/// Whiteness in `[0, 1]` of the network's output for covariance `cov`.
///
/// # Safety
/// `psn` must be a live handle, `cov` must hold `2 M M` doubles and `out`
/// one double.
#[no_mangle]
pub unsafe extern "C" fn himap_psn_whiteness(psn: *const HimapPsn, cov: *const f64, out: *mut f64) -> HimapStatus {
    guard(|| {
        non_null(psn, "psn")?;
        non_null(out, "out")?;
        let p = &*psn;
        let r = read_matrix(cov, p.phases.m())?;
        *out = whiteness(&p.phases, &r)?;
        Ok(())
    })
}

/// Parsed experiment description.
pub struct HimapExperiment {
    spec: ExperimentSpec,
}

/// Parses spec-file text (NUL-terminated UTF-8) into a new handle.
///
/// # Safety
/// `text` must be a valid C string; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn himap_experiment_parse(text: *const c_char, out: *mut *mut HimapExperiment) -> HimapStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(text, "text")?;
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(HimapStatus::InvalidArgument, "spec text is not UTF-8");
        };
        let spec = parse_spec(text)?;
        *out = Box::into_raw(Box::new(HimapExperiment { spec }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn himap_experiment_free(exp: *mut HimapExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Overrides the root seed.
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn himap_experiment_set_seed(exp: *mut HimapExperiment, seed: u64) -> HimapStatus {
    guard(|| {
        non_null(exp, "experiment")?;
        (*exp).spec.seed = seed;
        Ok(())
    })
}

/// Overrides the trial count (must be positive).
///
/// # Safety
/// `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn himap_experiment_set_trials(exp: *mut HimapExperiment, trials: usize) -> HimapStatus {
    guard(|| {
        non_null(exp, "experiment")?;
        if trials == 0 {
            return fail(HimapStatus::InvalidArgument, "trials must be positive");
        }
        (*exp).spec.trials = trials;
        Ok(())
    })
}

/// Runs the experiment and returns its CSV text through `csv_out`. Release
/// it with [`himap_string_free`].
///
/// # Safety
/// `exp` must be a live handle; `csv_out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn himap_experiment_run_csv(
    exp: *const HimapExperiment,
    csv_out: *mut *mut c_char,
) -> HimapStatus {
    guard(|| {
        non_null(csv_out, "csv_out")?;
        *csv_out = ptr::null_mut();
        non_null(exp, "experiment")?;
        let csv = run_experiment(&(*exp).spec)?.to_csv_string();
        let Ok(c) = CString::new(csv) else {
            return fail(HimapStatus::Internal, "CSV contains a NUL byte");
        };
        *csv_out = c.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn himap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

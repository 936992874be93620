//! C ABI over the spinmag toolkit.
//!
//! Every fallible call returns an [`SmStatus`]; on failure the message is
//! kept per thread and read back with [`sm_last_error_message`]. Handles
//! are opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spinmag::dynamics::{boltzmann_imbalance, number_density, GasConditions};
use spinmag::fit::{fit_emf, initial_guess, synthesize_model, ModelParams, FitMode, FitOptions};
use spinmag::spectrum::{
    diagonalize, frequencies_approximate, frequencies_exact, Branch, RotorFieldConfig, SpinRotationSpectrum,
};
use spinmag::units::MolecularConstants;
use spinmag::waveform::{WaveUnit, Waveform};
use spinmag::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    EmptyBlock = 3,
    EigenNonConvergence = 4,
    QuadratureNonConvergence = 5,
    SingularConfiguration = 6,
    Undersampled = 7,
    PhysicalBound = 8,
    HeuristicFailure = 9,
    Conditioning = 10,
    FitNotConverged = 11,
    Config = 12,
    Parse = 13,
    Io = 14,
    Panic = 15,
}

/// Fine-structure branch selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmBranch {
    Plus = 0,
    Zero = 1,
    Minus = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmFrequencyMethod {
    Exact = 0,
    Approximate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmFitMode {
    FrequenciesFixed = 0,
    FrequenciesFree = 1,
}

/// Precession frequencies (rad/s).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmFrequencies {
    pub omega_plus: f64,
    pub omega_minus: f64,
}

/// Damped two-frequency model parameters (V·s, s, rad/s, rad/s).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmModelParams {
    pub amplitude: f64,
    pub tau: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

/// Fit outcome. Frequency uncertainties are NaN when frequencies were held fixed.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SmFitResult {
    pub params: SmModelParams,
    pub sigma: SmModelParams,
    pub residual_rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Diagonalized spectrum at one (N, B).
pub struct SmSpectrum {
    inner: SpinRotationSpectrum,
}

/// Uniformly sampled time series.
pub struct SmWaveform {
    inner: Waveform,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SmStatus {
    match e {
        Error::InvalidInput(_) => SmStatus::InvalidInput,
        Error::EmptyBlock { .. } => SmStatus::EmptyBlock,
        Error::EigenNonConvergence { .. } => SmStatus::EigenNonConvergence,
        Error::QuadratureNonConvergence { .. } => SmStatus::QuadratureNonConvergence,
        Error::SingularConfiguration(_) => SmStatus::SingularConfiguration,
        Error::Undersampled { .. } => SmStatus::Undersampled,
        Error::PhysicalBound { .. } => SmStatus::PhysicalBound,
        Error::HeuristicFailure(_) => SmStatus::HeuristicFailure,
        Error::Conditioning(_) => SmStatus::Conditioning,
        Error::FitNotConverged { .. } => SmStatus::FitNotConverged,
        Error::Config(_) => SmStatus::Config,
        Error::Parse { .. } => SmStatus::Parse,
        Error::Io(_) | Error::Json(_) => SmStatus::Io,
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

/// Runs `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SmStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SmStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SmStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn href<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn branch(b: SmBranch) -> Branch {
    match b {
        SmBranch::Plus => Branch::Plus,
        SmBranch::Zero => Branch::Zero,
        SmBranch::Minus => Branch::Minus,
    }
}

fn params(p: &SmModelParams) -> ModelParams {
    ModelParams { amplitude: p.amplitude, tau: p.tau, omega_plus: p.omega_plus, omega_minus: p.omega_minus }
}

fn sm_params(p: &ModelParams) -> SmModelParams {
    SmModelParams { amplitude: p.amplitude, tau: p.tau, omega_plus: p.omega_plus, omega_minus: p.omega_minus }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when there is no pending error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Precession frequencies of the ¹⁶O₂ level `n` in field `b_tesla`.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_frequencies(
    n: u32,
    b_tesla: f64,
    method: SmFrequencyMethod,
    result: *mut SmFrequencies,
) -> SmStatus {
    guard(|| {
        let result = out(result, "result")?;
        let constants = MolecularConstants::oxygen();
        let config = RotorFieldConfig::new(n, b_tesla);
        let f = match method {
            SmFrequencyMethod::Exact => frequencies_exact(&constants, &config)?,
            SmFrequencyMethod::Approximate => frequencies_approximate(&constants, &config)?,
        };
        *result = SmFrequencies { omega_plus: f.omega_plus, omega_minus: f.omega_minus };
        Ok(())
    })
}

/// Number density (m⁻³) of centrifuged molecules at the given gas conditions.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_number_density(
    pressure_bar: f64,
    temperature_k: f64,
    eta: f64,
    result: *mut f64,
) -> SmStatus {
    guard(|| {
        let result = out(result, "result")?;
        *result = number_density(&GasConditions::from_bar(pressure_bar, temperature_k, eta)?);
        Ok(())
    })
}

/// Thermal population imbalance between the outer branches of level `n`.
///
/// # Safety
/// `result` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_boltzmann_imbalance(n: u32, temperature_k: f64, result: *mut f64) -> SmStatus {
    guard(|| {
        let result = out(result, "result")?;
        *result = boltzmann_imbalance(n, temperature_k, &MolecularConstants::oxygen())?;
        Ok(())
    })
}

/// Diagonalizes the Hamiltonian at (n, b_tesla).
///
/// # Safety
/// `handle` must be null or valid for writes. The returned handle is owned
/// by the caller and released with [`sm_spectrum_free`].
#[no_mangle]
pub unsafe extern "C" fn sm_spectrum_new(n: u32, b_tesla: f64, handle: *mut *mut SmSpectrum) -> SmStatus {
    guard(|| {
        let handle = out(handle, "handle")?;
        *handle = ptr::null_mut();
        let inner = diagonalize(&MolecularConstants::oxygen(), &RotorFieldConfig::new(n, b_tesla))?;
        *handle = Box::into_raw(Box::new(SmSpectrum { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sm_spectrum_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn sm_spectrum_free(handle: *mut SmSpectrum) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of states, 3(2N+1).
///
/// # Safety
/// `handle` must be null or a live spectrum handle.
#[no_mangle]
pub unsafe extern "C" fn sm_spectrum_total_states(handle: *const SmSpectrum) -> usize {
    handle.as_ref().map_or(0, |s| s.inner.total_states())
}

/// Energy (J) of `branch` in block `m`.
///
/// # Safety
/// `handle` must be a live spectrum handle; `result` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_spectrum_energy(
    handle: *const SmSpectrum,
    which: SmBranch,
    m: i64,
    result: *mut f64,
) -> SmStatus {
    guard(|| {
        let s = href(handle, "handle")?;
        let result = out(result, "result")?;
        *result = s.inner.energy(branch(which), m).ok_or_else(|| {
            Error::InvalidInput(format!("no {} state with m = {m} at N = {}", branch(which).tag(), s.inner.config.n))
        })?;
        Ok(())
    })
}

/// Writes all energies (J, ascending) into `buf`. `written` receives the
/// total count; the call fails with `SM_STATUS_INVALID_INPUT` if `cap` is too
/// small, after reporting the required size.
///
/// # Safety
/// `handle` must be a live spectrum handle, `buf` null or `cap` writable
/// doubles, `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_spectrum_energies(
    handle: *const SmSpectrum,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> SmStatus {
    guard(|| {
        let s = href(handle, "handle")?;
        let written = out(written, "written")?;
        let e = s.inner.all_energies();
        *written = e.len();
        if buf.is_null() || cap < e.len() {
            return Err(Error::InvalidInput(format!("buffer holds {cap}, need {}", e.len())).into());
        }
        ptr::copy_nonoverlapping(e.as_ptr(), buf, e.len());
        Ok(())
    })
}

/// Builds a waveform (volts) from `len` samples starting at `t0` with step `dt` (s).
///
/// # Safety
/// `samples` must point to `len` readable doubles; `handle` valid for writes.
/// Release with [`sm_waveform_free`].
#[no_mangle]
pub unsafe extern "C" fn sm_waveform_new(
    t0: f64,
    dt: f64,
    samples: *const f64,
    len: usize,
    handle: *mut *mut SmWaveform,
) -> SmStatus {
    guard(|| {
        let handle = out(handle, "handle")?;
        *handle = ptr::null_mut();
        if samples.is_null() && len > 0 {
            return Err(Fail::Null("samples"));
        }
        let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(samples, len).to_vec() };
        let inner = Waveform::new(t0, dt, data, WaveUnit::Volt)?;
        *handle = Box::into_raw(Box::new(SmWaveform { inner }));
        Ok(())
    })
}

/// Reads a waveform CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_waveform_read_csv(path: *const c_char, handle: *mut *mut SmWaveform) -> SmStatus {
    guard(|| {
        let handle = out(handle, "handle")?;
        *handle = ptr::null_mut();
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::InvalidInput("path is not UTF-8".into()))?;
        let file = std::fs::File::open(path).map_err(Error::from)?;
        let inner = Waveform::read_csv(std::io::BufReader::new(file))?;
        *handle = Box::into_raw(Box::new(SmWaveform { inner }));
        Ok(())
    })
}

/// Samples the damped two-frequency model on a uniform grid.
///
/// # Safety
/// `p` must be readable and `handle` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_model_synthesize(
    p: *const SmModelParams,
    t0: f64,
    dt: f64,
    len: usize,
    handle: *mut *mut SmWaveform,
) -> SmStatus {
    guard(|| {
        let p = href(p, "params")?;
        let handle = out(handle, "handle")?;
        *handle = ptr::null_mut();
        let inner = synthesize_model(&params(p), t0, dt, len)?;
        *handle = Box::into_raw(Box::new(SmWaveform { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or a waveform handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn sm_waveform_free(handle: *mut SmWaveform) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be null or a live waveform handle.
#[no_mangle]
pub unsafe extern "C" fn sm_waveform_len(handle: *const SmWaveform) -> usize {
    handle.as_ref().map_or(0, |w| w.inner.len())
}

/// Copies up to `cap` samples into `buf`; returns the number copied.
///
/// # Safety
/// `handle` must be null or live; `buf` null or `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sm_waveform_samples(handle: *const SmWaveform, buf: *mut f64, cap: usize) -> usize {
    let (Some(w), false) = (handle.as_ref(), buf.is_null()) else { return 0 };
    let n = w.inner.len().min(cap);
    ptr::copy_nonoverlapping(w.inner.samples.as_ptr(), buf, n);
    n
}

/// Heuristic starting values for [`sm_fit`].
///
/// # Safety
/// `handle` must be live; `seed` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_initial_guess(handle: *const SmWaveform, seed: *mut SmModelParams) -> SmStatus {
    guard(|| {
        let w = href(handle, "handle")?;
        let seed = out(seed, "seed")?;
        *seed = sm_params(&initial_guess(&w.inner)?);
        Ok(())
    })
}

/// Least-squares fit of the damped two-frequency model. `max_iterations`
/// of 0 selects the default. A fit that stops without converging still
/// fills `result` and returns `SM_STATUS_FIT_NOT_CONVERGED`.
///
/// # Safety
/// `handle` must be live, `seed` readable, `result` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sm_fit(
    handle: *const SmWaveform,
    seed: *const SmModelParams,
    mode: SmFitMode,
    max_iterations: usize,
    result: *mut SmFitResult,
) -> SmStatus {
    guard(|| {
        let w = href(handle, "handle")?;
        let seed = href(seed, "seed")?;
        let result = out(result, "result")?;
        let mut options = FitOptions {
            mode: match mode {
                SmFitMode::FrequenciesFixed => FitMode::FrequenciesFixed,
                SmFitMode::FrequenciesFree => FitMode::FrequenciesFree,
            },
            ..FitOptions::default()
        };
        if max_iterations > 0 {
            options.max_iterations = max_iterations;
        }
        let fit = fit_emf(&w.inner, &params(seed), &options)?;
        let u = fit.uncertainties;
        *result = SmFitResult {
            params: sm_params(&fit.params()),
            sigma: SmModelParams {
                amplitude: u.amplitude,
                tau: u.tau,
                omega_plus: u.omega_plus.unwrap_or(f64::NAN),
                omega_minus: u.omega_minus.unwrap_or(f64::NAN),
            },
            residual_rms: fit.residual_rms,
            iterations: fit.iterations,
            converged: fit.converged,
        };
        if !fit.converged {
            return Err(Error::FitNotConverged { iterations: fit.iterations, residual_rms: fit.residual_rms }.into());
        }
        Ok(())
    })
}

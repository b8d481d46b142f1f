//! C ABI for `chansbgm`.
//!
//! Objects are opaque handles created by `chansbgm_*_new`/`_load`/`_fit`/
//! `_generate` and released with the matching `_free`. Every fallible call
//! returns a [`ChansbgmStatus`]; on failure the message is available through
//! [`chansbgm_last_error`] on the same thread. Complex arrays are interleaved
//! `(re, im)` pairs of doubles, matrices are row-major.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use chansbgm::dictionary::{AngleGrid, DelayDopplerGrid, Dictionary, Grid, SystemConfig};
use chansbgm::generation::{limit_batch, render_channels, sample_parameters, GeneratedBatch};
use chansbgm::linalg::{CVector, C64};
use chansbgm::sbgm::{csgmm_fit, posterior_moments, FitOptions, SbgmModel, VarianceForm, DEFAULT_FLOOR};
use chansbgm::scenario::{Measurement, ObservationSet};
use chansbgm::Error;

/// Result codes of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChansbgmStatus {
    Ok = 0,
    InvalidArgument = 1,
    DomainMismatch = 2,
    Capacity = 3,
    DegenerateInput = 4,
    Numeric = 5,
    Iteration = 6,
    Format = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

/// Opaque dictionary handle.
pub struct ChansbgmDictionary(Dictionary);

/// Opaque model handle.
pub struct ChansbgmModel(SbgmModel);

/// Opaque batch of generated parameters (and optionally channels).
pub struct ChansbgmBatch(GeneratedBatch);

/// EM options; obtain defaults from [`chansbgm_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChansbgmFitOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// 0 for per-gridpoint variances, 1 for the Kronecker form.
    pub kronecker: i32,
    pub kronecker_sweeps: usize,
    pub floor: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ChansbgmStatus {
    match e {
        Error::InvalidArgument(_) => ChansbgmStatus::InvalidArgument,
        Error::DomainMismatch(_) => ChansbgmStatus::DomainMismatch,
        Error::Capacity(_) => ChansbgmStatus::Capacity,
        Error::DegenerateInput(_) => ChansbgmStatus::DegenerateInput,
        Error::Numeric(_) => ChansbgmStatus::Numeric,
        Error::Iteration { .. } => ChansbgmStatus::Iteration,
        Error::Format(_) | Error::Json(_) => ChansbgmStatus::Format,
        Error::Io { .. } => ChansbgmStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> ChansbgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChansbgmStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is a null pointer"));
            ChansbgmStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_last_error(msg);
            ChansbgmStatus::InvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ChansbgmStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &'static str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &'static str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn complex_vector(interleaved: &[f64]) -> CVector {
    CVector::from_iterator(interleaved.len() / 2, interleaved.chunks_exact(2).map(|p| C64::new(p[0], p[1])))
}

fn write_complex(dst: &mut [f64], src: &CVector) {
    for (pair, z) in dst.chunks_exact_mut(2).zip(src.iter()) {
        pair[0] = z.re;
        pair[1] = z.im;
    }
}

fn check_len(actual: usize, expected: usize, what: &str) -> FfiResult {
    if actual != expected {
        return Err(Failure::Arg(format!("{what} has length {actual}, expected {expected}")));
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 if there is none.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn chansbgm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_dictionary_simo(
    antennas: usize,
    grid_size: usize,
    out: *mut *mut ChansbgmDictionary,
) -> ChansbgmStatus {
    guard(|| {
        let d = Dictionary::build(Grid::Angle(AngleGrid::new(grid_size)?), SystemConfig::simo(antennas))?;
        store(out, ChansbgmDictionary(d))
    })
}

#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn chansbgm_dictionary_ofdm(
    subcarriers: usize,
    symbols: usize,
    subcarrier_spacing: f64,
    symbol_duration: f64,
    doppler_grid: usize,
    delay_grid: usize,
    max_doppler: f64,
    max_delay: f64,
    out: *mut *mut ChansbgmDictionary,
) -> ChansbgmStatus {
    guard(|| {
        let grid = DelayDopplerGrid::new(doppler_grid, delay_grid, max_doppler, max_delay)?;
        let config = SystemConfig::ofdm(subcarriers, symbols, subcarrier_spacing, symbol_duration);
        let d = Dictionary::build(Grid::DelayDoppler(grid), config)?;
        store(out, ChansbgmDictionary(d))
    })
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_dictionary_free(dict: *mut ChansbgmDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_dictionary_shape(
    dict: *const ChansbgmDictionary,
    rows: *mut usize,
    cols: *mut usize,
) -> ChansbgmStatus {
    guard(|| {
        let d = &non_null(dict, "dictionary")?.0;
        *output(rows, 1, "rows")?.first_mut().unwrap() = d.rows();
        *output(cols, 1, "cols")?.first_mut().unwrap() = d.cols();
        Ok(())
    })
}

/// Copies the dictionary (row-major, interleaved) into `out`, which must hold
/// `2·rows·cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_dictionary_copy(
    dict: *const ChansbgmDictionary,
    out: *mut f64,
    len: usize,
) -> ChansbgmStatus {
    guard(|| {
        let d = &non_null(dict, "dictionary")?.0;
        check_len(len, 2 * d.rows() * d.cols(), "output buffer")?;
        let dst = output(out, len, "output buffer")?;
        let m = d.matrix();
        for r in 0..d.rows() {
            for c in 0..d.cols() {
                let z = m[(r, c)];
                let i = 2 * (r * d.cols() + c);
                dst[i] = z.re;
                dst[i + 1] = z.im;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn chansbgm_fit_options_default() -> ChansbgmFitOptions {
    let d = FitOptions::default();
    ChansbgmFitOptions {
        max_iters: d.max_iters,
        rel_tol: d.rel_tol,
        seed: d.seed,
        kronecker: 0,
        kronecker_sweeps: d.kronecker_sweeps,
        floor: d.floor,
    }
}

/// Builds a model with per-gridpoint variances. `gammas` is `k × s`
/// row-major; `floor` below zero selects the default.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_new(
    k: usize,
    s: usize,
    weights: *const f64,
    gammas: *const f64,
    floor: f64,
    out: *mut *mut ChansbgmModel,
) -> ChansbgmStatus {
    guard(|| {
        let w = input(weights, k, "weights")?.to_vec();
        let g = input(gammas, k * s, "gammas")?;
        let rows = if s == 0 { vec![Vec::new(); k] } else { g.chunks(s).map(<[f64]>::to_vec).collect() };
        let floor = if floor < 0.0 { DEFAULT_FLOOR } else { floor };
        store(out, ChansbgmModel(SbgmModel::full(w, rows, floor)?))
    })
}

/// Loads a model written by `chansbgm fit` from directory `dir`.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_load(dir: *const c_char, out: *mut *mut ChansbgmModel) -> ChansbgmStatus {
    guard(|| {
        if dir.is_null() {
            return Err(Failure::Null("directory"));
        }
        let dir = CStr::from_ptr(dir).to_str().map_err(|_| Failure::Arg("directory is not UTF-8".into()))?;
        let (model, _) = chansbgm::io::read_model(Path::new(dir), "model")?;
        store(out, ChansbgmModel(model))
    })
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_free(model: *mut ChansbgmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_components(model: *const ChansbgmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.components())
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_sparse_dim(model: *const ChansbgmModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.sparse_dim())
}

/// Copies the weights (`k` doubles) and the expanded variances (`k × s`
/// row-major) into the given buffers. Either buffer may be null.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_model_params(
    model: *const ChansbgmModel,
    weights: *mut f64,
    gammas: *mut f64,
) -> ChansbgmStatus {
    guard(|| {
        let m = &non_null(model, "model")?.0;
        if !weights.is_null() {
            output(weights, m.components(), "weights")?.copy_from_slice(m.weights());
        }
        if !gammas.is_null() {
            let dst = output(gammas, m.components() * m.sparse_dim(), "gammas")?;
            for (row, g) in dst.chunks_mut(m.sparse_dim().max(1)).zip(m.gammas()) {
                row.copy_from_slice(&g);
            }
        }
        Ok(())
    })
}

/// Fits a `k`-component model by EM.
///
/// `observations` holds `n` samples of length `m` (interleaved, row-major),
/// `noise_vars` one variance per sample. `indices` lists the `m` observed
/// channel entries; pass null when every entry is observed (`m` = rows of
/// the dictionary).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn chansbgm_fit(
    dict: *const ChansbgmDictionary,
    observations: *const f64,
    noise_vars: *const f64,
    n: usize,
    m: usize,
    indices: *const usize,
    k: usize,
    options: *const ChansbgmFitOptions,
    out: *mut *mut ChansbgmModel,
) -> ChansbgmStatus {
    guard(|| {
        let d = &non_null(dict, "dictionary")?.0;
        let o = non_null(options, "options")?;
        let measurement = if indices.is_null() {
            Measurement::identity(d.rows())
        } else {
            Measurement::selection(input(indices, m, "indices")?.to_vec(), d.rows())?
        };
        check_len(m, measurement.rows(), "observation length")?;
        let flat = input(observations, 2 * n * m, "observations")?;
        let samples = flat.chunks_exact(2 * m.max(1)).take(n).map(complex_vector).collect();
        let obs = ObservationSet {
            samples,
            noise_vars: input(noise_vars, n, "noise variances")?.to_vec(),
            snr_db: vec![f64::NAN; n],
            measurement,
        };
        let opts = FitOptions {
            max_iters: o.max_iters,
            rel_tol: o.rel_tol,
            seed: o.seed,
            variance_form: if o.kronecker != 0 { VarianceForm::Kronecker } else { VarianceForm::Full },
            kronecker_sweeps: o.kronecker_sweeps,
            floor: o.floor,
        };
        let (model, _) = csgmm_fit(&obs, d, k, &opts)?;
        store(out, ChansbgmModel(model))
    })
}

/// Posterior mean of `s` given one observation `y` of length `m` under
/// prior variances `gamma`. `indices` as in [`chansbgm_fit`]. `mean` receives
/// `2·cols` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn chansbgm_posterior_mean(
    dict: *const ChansbgmDictionary,
    gamma: *const f64,
    y: *const f64,
    m: usize,
    indices: *const usize,
    noise_var: f64,
    mean: *mut f64,
) -> ChansbgmStatus {
    guard(|| {
        let d = &non_null(dict, "dictionary")?.0;
        let measurement = if indices.is_null() {
            Measurement::identity(d.rows())
        } else {
            Measurement::selection(input(indices, m, "indices")?.to_vec(), d.rows())?
        };
        check_len(m, measurement.rows(), "observation length")?;
        let g = input(gamma, d.cols(), "gamma")?;
        let y = complex_vector(input(y, 2 * m, "observation")?);
        let post = posterior_moments(g, &y, &measurement, d.matrix(), noise_var, false)?;
        write_complex(output(mean, 2 * d.cols(), "mean")?, &post.mean);
        Ok(())
    })
}

/// Draws `n` parameter vectors. `p_max` = 0 keeps every entry; otherwise only
/// the `p_max` strongest entries of each vector survive.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_generate(
    model: *const ChansbgmModel,
    n: usize,
    seed: u64,
    p_max: usize,
    out: *mut *mut ChansbgmBatch,
) -> ChansbgmStatus {
    guard(|| {
        let m = &non_null(model, "model")?.0;
        let mut batch = sample_parameters(m, n, seed);
        if p_max > 0 {
            batch = limit_batch(batch, p_max)?;
        }
        store(out, ChansbgmBatch(batch))
    })
}

/// Maps the batch parameters to channels with `dict`.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_render(
    batch: *mut ChansbgmBatch,
    dict: *const ChansbgmDictionary,
) -> ChansbgmStatus {
    guard(|| {
        let d = &non_null(dict, "dictionary")?.0;
        let b = batch.as_mut().ok_or(Failure::Null("batch"))?;
        b.0 = render_channels(b.0.clone(), d)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_free(batch: *mut ChansbgmBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_len(batch: *const ChansbgmBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.len())
}

/// Length of one parameter vector, or 0 for an empty batch.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_param_dim(batch: *const ChansbgmBatch) -> usize {
    batch.as_ref().and_then(|b| b.0.params.first()).map_or(0, |v| v.len())
}

/// Length of one rendered channel, or 0 if the batch is not rendered.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_channel_dim(batch: *const ChansbgmBatch) -> usize {
    batch
        .as_ref()
        .and_then(|b| b.0.channels.as_ref())
        .and_then(|c| c.first())
        .map_or(0, |v| v.len())
}

fn copy_rows(rows: &[CVector], out: *mut f64, len: usize) -> FfiResult {
    let dim = rows.first().map_or(0, |v| v.len());
    check_len(len, 2 * dim * rows.len(), "output buffer")?;
    let dst = unsafe { output(out, len, "output buffer")? };
    for (chunk, v) in dst.chunks_exact_mut(2 * dim.max(1)).zip(rows) {
        write_complex(chunk, v);
    }
    Ok(())
}

/// Copies the parameters (`n × dim`, interleaved) into `out` of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_params(batch: *const ChansbgmBatch, out: *mut f64, len: usize) -> ChansbgmStatus {
    guard(|| copy_rows(&non_null(batch, "batch")?.0.params, out, len))
}

/// Copies the rendered channels into `out` of `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_channels(batch: *const ChansbgmBatch, out: *mut f64, len: usize) -> ChansbgmStatus {
    guard(|| {
        let b = &non_null(batch, "batch")?.0;
        let channels = b.channels.as_ref().ok_or_else(|| Failure::Arg("batch has not been rendered".into()))?;
        copy_rows(channels, out, len)
    })
}

/// Copies the component labels (`n` entries) into `out`.
#[no_mangle]
pub unsafe extern "C" fn chansbgm_batch_labels(batch: *const ChansbgmBatch, out: *mut usize, len: usize) -> ChansbgmStatus {
    guard(|| {
        let b = &non_null(batch, "batch")?.0;
        check_len(len, b.labels.len(), "output buffer")?;
        output(out, len, "output buffer")?.copy_from_slice(&b.labels);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { chansbgm_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 0);
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn dictionary_round_trip() {
        let mut d = ptr::null_mut();
        assert_eq!(unsafe { chansbgm_dictionary_simo(4, 8, &mut d) }, ChansbgmStatus::Ok);
        let (mut r, mut c) = (0, 0);
        assert_eq!(unsafe { chansbgm_dictionary_shape(d, &mut r, &mut c) }, ChansbgmStatus::Ok);
        assert_eq!((r, c), (4, 8));
        let mut buf = vec![0.0; 2 * r * c];
        assert_eq!(unsafe { chansbgm_dictionary_copy(d, buf.as_mut_ptr(), buf.len()) }, ChansbgmStatus::Ok);
        // first row is all ones
        assert!(buf[..2 * c].chunks(2).all(|z| (z[0] - 1.0).abs() < 1e-15 && z[1].abs() < 1e-15));
        unsafe { chansbgm_dictionary_free(d) };
    }

    #[test]
    fn errors_set_status_and_message() {
        let mut d = ptr::null_mut();
        assert_eq!(unsafe { chansbgm_dictionary_simo(4, 0, &mut d) }, ChansbgmStatus::InvalidArgument);
        assert!(d.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(unsafe { chansbgm_dictionary_shape(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, ChansbgmStatus::NullPointer);
        assert!(last_error().contains("null"));
    }

    #[test]
    fn generate_and_render() {
        let weights = [0.25, 0.75];
        let gammas: Vec<f64> = (0..16).map(|i| 0.1 + i as f64 * 0.05).collect();
        let mut model = ptr::null_mut();
        assert_eq!(
            unsafe { chansbgm_model_new(2, 8, weights.as_ptr(), gammas.as_ptr(), -1.0, &mut model) },
            ChansbgmStatus::Ok
        );
        assert_eq!(unsafe { chansbgm_model_components(model) }, 2);
        let mut batch = ptr::null_mut();
        assert_eq!(unsafe { chansbgm_generate(model, 10, 3, 2, &mut batch) }, ChansbgmStatus::Ok);
        assert_eq!(unsafe { chansbgm_batch_len(batch) }, 10);
        let dim = unsafe { chansbgm_batch_param_dim(batch) };
        let mut params = vec![0.0; 2 * 10 * dim];
        assert_eq!(unsafe { chansbgm_batch_params(batch, params.as_mut_ptr(), params.len()) }, ChansbgmStatus::Ok);
        for row in params.chunks(2 * dim) {
            assert!(row.chunks(2).filter(|z| z[0] != 0.0 || z[1] != 0.0).count() <= 2);
        }
        let mut dict = ptr::null_mut();
        unsafe { chansbgm_dictionary_simo(4, 8, &mut dict) };
        assert_eq!(unsafe { chansbgm_batch_render(batch, dict) }, ChansbgmStatus::Ok);
        assert_eq!(unsafe { chansbgm_batch_channel_dim(batch) }, 4);
        let mut labels = vec![9usize; 10];
        assert_eq!(unsafe { chansbgm_batch_labels(batch, labels.as_mut_ptr(), 10) }, ChansbgmStatus::Ok);
        assert!(labels.iter().all(|&l| l < 2));
        unsafe {
            chansbgm_batch_free(batch);
            chansbgm_dictionary_free(dict);
            chansbgm_model_free(model);
        }
    }

    #[test]
    fn fit_through_the_abi() {
        let mut dict = ptr::null_mut();
        unsafe { chansbgm_dictionary_simo(4, 8, &mut dict) };
        let n = 40;
        let obs: Vec<f64> = (0..2 * 4 * n).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let noise = vec![0.05; n];
        let mut opts = chansbgm_fit_options_default();
        opts.max_iters = 20;
        let mut model = ptr::null_mut();
        let status = unsafe {
            chansbgm_fit(dict, obs.as_ptr(), noise.as_ptr(), n, 4, ptr::null(), 2, &opts, &mut model)
        };
        assert_eq!(status, ChansbgmStatus::Ok);
        assert_eq!(unsafe { chansbgm_model_sparse_dim(model) }, 8);
        let mut w = [0.0; 2];
        unsafe { chansbgm_model_params(model, w.as_mut_ptr(), ptr::null_mut()) };
        assert!((w[0] + w[1] - 1.0).abs() < 1e-12);

        let gamma = [1.0; 8];
        let mut mean = vec![0.0; 16];
        let status = unsafe {
            chansbgm_posterior_mean(dict, gamma.as_ptr(), obs.as_ptr(), 4, ptr::null(), 0.05, mean.as_mut_ptr())
        };
        assert_eq!(status, ChansbgmStatus::Ok);
        assert!(mean.iter().any(|&x| x != 0.0));
        unsafe {
            chansbgm_model_free(model);
            chansbgm_dictionary_free(dict);
        }
    }
}

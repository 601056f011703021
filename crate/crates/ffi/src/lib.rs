//! C ABI for `constellation-map`.
//!
//! Mappings live behind an opaque `CmMapping` handle. Every fallible call
//! returns a [`CmStatus`]; on failure a description is available from
//! [`cm_last_error_message`] on the same thread until the next failing call.
//! Strings returned by the library must be released with [`cm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use constellation_map::channel::{awgn_transmit_keyed, snr_to_noise_variance, ChannelConfig};
use constellation_map::constellation::{power_normalize, ComplexPoint};
use constellation_map::mapping::{load_params, save_params, MappingKind, MappingParams};
use constellation_map::source::SourceSpec;
use constellation_map::trainer::{train, TrainConfig};
use constellation_map::{Error, ParamId};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    DegenerateInput = 3,
    EmptyInput = 4,
    ShapeMismatch = 5,
    Schema = 6,
    Io = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmMappingKind {
    Qam = 0,
    Mrc = 1,
    Mic = 2,
}

/// Opaque mapping handle.
pub struct CmMapping {
    inner: MappingParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CmStatus {
    match err {
        Error::InvalidArgument(_) => CmStatus::InvalidArgument,
        Error::DegenerateInput(_) => CmStatus::DegenerateInput,
        Error::EmptyInput(_) => CmStatus::EmptyInput,
        Error::ShapeMismatch { .. } => CmStatus::ShapeMismatch,
        Error::Schema { .. } => CmStatus::Schema,
        Error::Io { .. } => CmStatus::Io,
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

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CmStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CmStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            CmStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            CmStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a>(h: *const CmMapping) -> Result<&'a CmMapping, Failure> {
    h.as_ref().ok_or(Failure::Null("mapping handle"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn publish(out: *mut *mut CmMapping, inner: MappingParams) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(CmMapping { inner })) };
    Ok(())
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a mapping with the default initialization: uniform levels (QAM),
/// midpoint boundaries (MRC) or a QAM grid of points (MIC). `order` is the
/// number of constellation points and must be a perfect square.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_new(
    kind: CmMappingKind,
    order: usize,
    v_min: f64,
    v_max: f64,
    delta: f64,
    out: *mut *mut CmMapping,
) -> CmStatus {
    guard(|| {
        let kind = match kind {
            CmMappingKind::Qam => MappingKind::Qam,
            CmMappingKind::Mrc => MappingKind::Mrc,
            CmMappingKind::Mic => MappingKind::Mic,
        };
        publish(out, MappingParams::init(kind, order, v_min, v_max, delta)?)
    })
}

/// Parses mapping parameters from a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` as for [`cm_mapping_new`].
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_from_json(
    json: *const c_char,
    out: *mut *mut CmMapping,
) -> CmStatus {
    guard(|| publish(out, MappingParams::from_json_str(c_str(json, "json")?)?))
}

/// Loads mapping parameters from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for [`cm_mapping_new`].
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_load(
    path: *const c_char,
    out: *mut *mut CmMapping,
) -> CmStatus {
    guard(|| publish(out, load_params(Path::new(c_str(path, "path")?))?))
}

/// Saves mapping parameters to a JSON file.
///
/// # Safety
/// `mapping` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_save(
    mapping: *const CmMapping,
    path: *const c_char,
) -> CmStatus {
    guard(|| {
        Ok(save_params(
            &handle(mapping)?.inner,
            Path::new(c_str(path, "path")?),
        )?)
    })
}

/// Serializes the mapping to a newly allocated JSON string (free with
/// [`cm_string_free`]).
///
/// # Safety
/// `mapping` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_to_json(
    mapping: *const CmMapping,
    out: *mut *mut c_char,
) -> CmStatus {
    guard(|| {
        let text = handle(mapping)?.inner.to_json_string();
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        *out = CString::new(text).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `mapping` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_free(mapping: *mut CmMapping) {
    if !mapping.is_null() {
        drop(Box::from_raw(mapping));
    }
}

/// Number of finite constellation points (0 for a NULL handle).
///
/// # Safety
/// `mapping` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_num_points(mapping: *const CmMapping) -> usize {
    mapping
        .as_ref()
        .and_then(|m| m.inner.constellation())
        .map_or(0, |c| c.len())
}

/// Copies the finite constellation as interleaved `re, im` pairs into `out`,
/// which must hold `2 * cm_mapping_num_points` doubles.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_points(
    mapping: *const CmMapping,
    out: *mut f64,
    len: usize,
) -> CmStatus {
    guard(|| {
        let c = handle(mapping)?
            .inner
            .constellation()
            .ok_or_else(|| Failure::Arg("mapping has no finite constellation".into()))?;
        if len != 2 * c.len() {
            return Err(Error::ShapeMismatch {
                expected: 2 * c.len(),
                actual: len,
            }
            .into());
        }
        let out = output(out, len, "out")?;
        for (slot, p) in out.chunks_exact_mut(2).zip(c.points()) {
            slot[0] = p.re;
            slot[1] = p.im;
        }
        Ok(())
    })
}

/// Number of learnable parameters (boundaries for MRC, `2N` coordinates
/// for MIC, 0 for QAM).
///
/// # Safety
/// `mapping` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_num_params(mapping: *const CmMapping) -> usize {
    mapping.as_ref().map_or(0, |m| m.inner.param_ids().len())
}

/// Copies the learnable parameters into `out` (`len` must equal
/// [`cm_mapping_num_params`]).
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_get_params(
    mapping: *const CmMapping,
    out: *mut f64,
    len: usize,
) -> CmStatus {
    guard(|| {
        let values = handle(mapping)?.inner.param_values();
        if len != values.len() {
            return Err(Error::ShapeMismatch {
                expected: values.len(),
                actual: len,
            }
            .into());
        }
        output(out, len, "out")?.copy_from_slice(&values);
        Ok(())
    })
}

/// Overwrites the learnable parameters.
///
/// # Safety
/// `mapping` must be a live handle; `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_set_params(
    mapping: *mut CmMapping,
    values: *const f64,
    len: usize,
) -> CmStatus {
    guard(|| {
        let m = mapping.as_mut().ok_or(Failure::Null("mapping handle"))?;
        m.inner.set_param_values(input(values, len, "values")?)?;
        Ok(())
    })
}

/// Maps `len` reals (pairs of `re, im`) onto the finite constellation.
/// `output` receives `len` doubles; `clusters`, when not NULL, receives
/// `len / 2` cluster indices.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_forward(
    mapping: *const CmMapping,
    input_ptr: *const f64,
    len: usize,
    output_ptr: *mut f64,
    clusters: *mut usize,
) -> CmStatus {
    guard(|| {
        let m = &handle(mapping)?.inner;
        if len % 2 != 0 {
            return Err(Failure::Arg(format!(
                "block length must be even, got {len}"
            )));
        }
        let x = input(input_ptr, len, "input")?;
        let y = output(output_ptr, len, "output")?;
        let mut idx = if clusters.is_null() {
            None
        } else {
            Some(output(clusters, len / 2, "clusters")?)
        };
        for (k, (src, dst)) in x.chunks_exact(2).zip(y.chunks_exact_mut(2)).enumerate() {
            let (q, c) = m.forward(ComplexPoint::new(src[0], src[1]));
            dst[0] = q.re;
            dst[1] = q.im;
            if let Some(idx) = idx.as_deref_mut() {
                idx[k] = c.unwrap_or(usize::MAX);
            }
        }
        Ok(())
    })
}

/// Straight-through mapping of one point.
///
/// Writes the hard value to `value[0..2]` and the soft surrogate to
/// `backward[0..2]` (either may be NULL). `jacobian`, when not NULL, must hold
/// `2 * (2 + cm_mapping_num_params)` doubles and receives two rows (real then
/// imaginary output), each `[d/d p_re, d/d p_im, d/d param_0, ...]`.
///
/// # Safety
/// Buffers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_map_point(
    mapping: *const CmMapping,
    re: f64,
    im: f64,
    value: *mut f64,
    backward: *mut f64,
    jacobian: *mut f64,
    jacobian_len: usize,
) -> CmStatus {
    guard(|| {
        let m = &handle(mapping)?.inner;
        let dual = m.map_point(ComplexPoint::new(re, im));
        if !value.is_null() {
            output(value, 2, "value")?.copy_from_slice(&[dual.value.re, dual.value.im]);
        }
        if !backward.is_null() {
            output(backward, 2, "backward")?
                .copy_from_slice(&[dual.backward_value.re, dual.backward_value.im]);
        }
        if !jacobian.is_null() {
            use constellation_map::grad::Axis;
            let mut cols = vec![ParamId::Point(Axis::Re), ParamId::Point(Axis::Im)];
            cols.extend(m.param_ids());
            if jacobian_len != 2 * cols.len() {
                return Err(Error::ShapeMismatch {
                    expected: 2 * cols.len(),
                    actual: jacobian_len,
                }
                .into());
            }
            let jac = output(jacobian, jacobian_len, "jacobian")?;
            for (row, table) in jac.chunks_exact_mut(cols.len()).zip(&dual.grads) {
                for (slot, id) in row.iter_mut().zip(&cols) {
                    *slot = table.d(*id);
                }
            }
        }
        Ok(())
    })
}

/// Trains the mapping in place (stage 1 then stage 2) from JSON-encoded
/// training and source configurations; either may be NULL for the defaults
/// (default source: bimodal encoder-like mixture). The trained decoder is
/// written to `gain` and `bias` when they are not NULL.
///
/// # Safety
/// `mapping` must be a live handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cm_mapping_train(
    mapping: *mut CmMapping,
    train_json: *const c_char,
    source_json: *const c_char,
    gain: *mut f64,
    bias: *mut f64,
) -> CmStatus {
    guard(|| {
        let m = mapping.as_mut().ok_or(Failure::Null("mapping handle"))?;
        let config: TrainConfig = if train_json.is_null() {
            TrainConfig::default()
        } else {
            serde_json::from_str(c_str(train_json, "train_json")?).map_err(|e| Error::Schema {
                field: "train".into(),
                message: e.to_string(),
            })?
        };
        let source: SourceSpec = if source_json.is_null() {
            SourceSpec::encoder_like()
        } else {
            serde_json::from_str(c_str(source_json, "source_json")?).map_err(|e| Error::Schema {
                field: "source".into(),
                message: e.to_string(),
            })?
        };
        let out = train(&config, &m.inner, &source.sampler()?)?;
        m.inner = out.mapping;
        if let Some(g) = gain.as_mut() {
            *g = out.decoder.gain;
        }
        if let Some(b) = bias.as_mut() {
            *b = out.decoder.bias;
        }
        Ok(())
    })
}

/// Normalizes `block` in place to mean square `power`; the applied
/// multiplier is written to `scale` when not NULL.
///
/// # Safety
/// `block` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_power_normalize(
    block: *mut f64,
    len: usize,
    power: f64,
    scale: *mut f64,
) -> CmStatus {
    guard(|| {
        let b = output(block, len, "block")?;
        let (z, s) = power_normalize(b, power)?;
        b.copy_from_slice(&z);
        if let Some(out) = scale.as_mut() {
            *out = s;
        }
        Ok(())
    })
}

/// Per-real-dimension noise variance for an SNR in dB (`INFINITY` gives 0).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cm_snr_to_noise_variance(
    snr_db: f64,
    power: f64,
    out: *mut f64,
) -> CmStatus {
    guard(|| {
        let v = snr_to_noise_variance(snr_db, power)?;
        *out.as_mut().ok_or(Failure::Null("out"))? = v;
        Ok(())
    })
}

/// Adds AWGN in place using the deterministic stream `(seed, counter)`.
///
/// # Safety
/// `block` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cm_awgn_transmit(
    block: *mut f64,
    len: usize,
    snr_db: f64,
    power: f64,
    seed: u64,
    counter: u64,
) -> CmStatus {
    guard(|| {
        let b = output(block, len, "block")?;
        let cfg = ChannelConfig::new(snr_db, power, seed)?;
        let y = awgn_transmit_keyed(b, &cfg, counter)?;
        b.copy_from_slice(&y);
        Ok(())
    })
}

//! C interface to `shiftlab-core`.
//!
//! Every fallible function returns a [`ShiftlabStatus`]; on failure the
//! message is available from [`shiftlab_last_error`] on the same thread.
//! Objects are opaque handles released by their `_free` function; strings
//! returned through out-pointers are released with [`shiftlab_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shiftlab_core::covering::{verify_graded, Covering, GradedParams, ParamBox};
use shiftlab_core::job::{run_job, Command, CoverBuild, Format};
use shiftlab_core::witness::{build_witness, eval_analytic, eval_bruteforce, Witness, WitnessConfig};
use shiftlab_core::{Error, ProductKind, SeqVec, SpaceNorm, WeightFamily};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftlabStatus {
    Ok = 0,
    /// The computation ran and its report contains a failed check.
    CheckFailed = 1,
    /// Null pointer, bad UTF-8 or out-of-range argument.
    InvalidArgument = 2,
    /// Malformed JSON or a payload violating its schema.
    Config = 3,
    /// Parameters rejected by a precondition.
    InvalidParams = 4,
    /// A brute-force or search budget was exhausted.
    Budget = 5,
    /// Index overflow, support collision or nonconvergent search.
    Numeric = 6,
    Io = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// `SpaceNorm` selector for [`shiftlab_seqvec_norm`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftlabNorm {
    L1 = 0,
    Sup = 1,
    /// Uses the `p` argument.
    Lp = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftlabProduct {
    Convolution = 0,
    Coordinatewise = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftlabFormat {
    Json = 0,
    Csv = 1,
}

/// Finitely supported sequence.
pub struct ShiftlabSeqVec(SeqVec);

/// Covering of a parameter box.
pub struct ShiftlabCovering(Covering);

/// Built witness together with the configuration it came from.
pub struct ShiftlabWitness {
    witness: Witness,
    config: WitnessConfig,
}

/// Scalar summary of one witness evaluation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShiftlabWitnessEval {
    /// 1-based cell index, 0 when the power is not one of the cell powers.
    pub cell: u64,
    pub n_power: u64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// NaN when neither certified nor expanded.
    pub premature_max: f64,
    pub total: f64,
    pub separation_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ShiftlabStatus {
    match e {
        Error::Config(_) => ShiftlabStatus::Config,
        Error::Io(_) => ShiftlabStatus::Io,
        Error::Budget(_) | Error::SearchBudget(_) => ShiftlabStatus::Budget,
        Error::IndexOverflow(_) | Error::SupportCollision { .. } => ShiftlabStatus::Numeric,
        _ => ShiftlabStatus::InvalidParams,
    }
}

struct Fail(ShiftlabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(ShiftlabStatus::Config, e.to_string())
    }
}

fn invalid(msg: &str) -> Fail {
    Fail(ShiftlabStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<ShiftlabStatus, Fail>) -> ShiftlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            ShiftlabStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| invalid(&format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{name} is null")))
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(ShiftlabStatus::Internal, "string contains NUL".into()))
}

fn to_json<T: serde::Serialize>(x: &T) -> Result<*mut c_char, Fail> {
    c_string(serde_json::to_string(x)?)
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn shiftlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn shiftlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `{"entries": [[k, c], ...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_from_json(
    json: *const c_char,
    out: *mut *mut ShiftlabSeqVec,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v: SeqVec = serde_json::from_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(ShiftlabSeqVec(v)));
        Ok(ShiftlabStatus::Ok)
    })
}

/// Builds a sequence from `len` index/value pairs; repeated indices add.
///
/// # Safety
/// `indices` and `values` must point to `len` elements (or be null with
/// `len == 0`); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_from_pairs(
    indices: *const u64,
    values: *const f64,
    len: usize,
    out: *mut *mut ShiftlabSeqVec,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if len > 0 && (indices.is_null() || values.is_null()) {
            return Err(invalid("indices or values is null"));
        }
        let pairs: Vec<(u64, f64)> = if len == 0 {
            Vec::new()
        } else {
            let idx = std::slice::from_raw_parts(indices, len);
            let val = std::slice::from_raw_parts(values, len);
            if let Some(c) = val.iter().find(|c| !c.is_finite()) {
                return Err(invalid(&format!("non-finite coefficient {c}")));
            }
            idx.iter().copied().zip(val.iter().copied()).collect()
        };
        *out = Box::into_raw(Box::new(ShiftlabSeqVec(SeqVec::from_pairs(pairs))));
        Ok(ShiftlabStatus::Ok)
    })
}

/// # Safety
/// `v` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_to_json(v: *const ShiftlabSeqVec, out: *mut *mut c_char) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = to_json(&handle(v, "v")?.0)?;
        Ok(ShiftlabStatus::Ok)
    })
}

/// Coefficient at index `k` (0 outside the support).
///
/// # Safety
/// `v` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_get(v: *const ShiftlabSeqVec, k: u64, out: *mut f64) -> ShiftlabStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(v, "v")?.0.get(k);
        Ok(ShiftlabStatus::Ok)
    })
}

/// Number of nonzero entries.
///
/// # Safety
/// `v` must be a live handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_len(v: *const ShiftlabSeqVec) -> usize {
    v.as_ref().map_or(0, |v| v.0.len())
}

/// # Safety
/// `v` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_free(v: *mut ShiftlabSeqVec) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

/// # Safety
/// `v` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_norm(
    v: *const ShiftlabSeqVec,
    norm: ShiftlabNorm,
    p: f64,
    out: *mut f64,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let n = match norm {
            ShiftlabNorm::L1 => SpaceNorm::L1,
            ShiftlabNorm::Sup => SpaceNorm::Sup,
            ShiftlabNorm::Lp => SpaceNorm::lp(p)?,
        };
        *out = handle(v, "v")?.0.norm(n);
        Ok(ShiftlabStatus::Ok)
    })
}

fn product_kind(k: ShiftlabProduct) -> ProductKind {
    match k {
        ShiftlabProduct::Convolution => ProductKind::Convolution,
        ShiftlabProduct::Coordinatewise => ProductKind::Coordinatewise,
    }
}

/// # Safety
/// `a`, `b` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_product(
    a: *const ShiftlabSeqVec,
    b: *const ShiftlabSeqVec,
    kind: ShiftlabProduct,
    out: *mut *mut ShiftlabSeqVec,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = handle(a, "a")?.0.product(&handle(b, "b")?.0, product_kind(kind))?;
        *out = Box::into_raw(Box::new(ShiftlabSeqVec(r)));
        Ok(ShiftlabStatus::Ok)
    })
}

/// # Safety
/// `a` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_seqvec_power(
    a: *const ShiftlabSeqVec,
    m: u32,
    kind: ShiftlabProduct,
    out: *mut *mut ShiftlabSeqVec,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = handle(a, "a")?.0.power(m, product_kind(kind))?;
        *out = Box::into_raw(Box::new(ShiftlabSeqVec(r)));
        Ok(ShiftlabStatus::Ok)
    })
}

/// `Σ_{i=l+1}^{l+n} log w_i(λ)`; `family_json` is e.g. `{"variant":"pure_power"}`.
///
/// # Safety
/// `family_json` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_log_cum_window(
    family_json: *const c_char,
    lambda: f64,
    l: u64,
    n: u64,
    out: *mut f64,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let fam: WeightFamily = serde_json::from_str(str_arg(family_json, "family_json")?)?;
        fam.validate()?;
        *out = fam.log_cum_window(lambda, l, n)?;
        Ok(ShiftlabStatus::Ok)
    })
}

/// Runs a batch job. `command` is a CLI subcommand name; `seed < 0` means
/// no seed. Returns `Ok` or `CheckFailed` with the report in `out`.
///
/// # Safety
/// `command` and `payload_json` must be NUL-terminated strings; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_run_job(
    command: *const c_char,
    payload_json: *const c_char,
    seed: i64,
    format: ShiftlabFormat,
    out: *mut *mut c_char,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cmd: Command = str_arg(command, "command")?.parse()?;
        let payload: serde_json::Value = serde_json::from_str(str_arg(payload_json, "payload_json")?)?;
        let fmt = match format {
            ShiftlabFormat::Json => Format::Json,
            ShiftlabFormat::Csv => Format::Csv,
        };
        let seed = (seed >= 0).then_some(seed as u64);
        let res = run_job(cmd, payload, seed, fmt)?;
        *out = c_string(res.body)?;
        Ok(if res.pass {
            ShiftlabStatus::Ok
        } else {
            ShiftlabStatus::CheckFailed
        })
    })
}

/// Builds a covering from a `cover-build` payload.
///
/// # Safety
/// `payload_json` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_build(
    payload_json: *const c_char,
    out: *mut *mut ShiftlabCovering,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: CoverBuild = serde_json::from_str(str_arg(payload_json, "payload_json")?)?;
        let cov = match spec {
            CoverBuild::Graded { k, params } => shiftlab_core::covering::build_graded_covering(&k, &params)?,
            CoverBuild::Log { params, q: None } => shiftlab_core::covering::build_log_covering(&params)?,
            CoverBuild::Log { params, q: Some(q) } => shiftlab_core::covering::build_log_covering_with_q(&params, q)?,
        };
        *out = Box::into_raw(Box::new(ShiftlabCovering(cov)));
        Ok(ShiftlabStatus::Ok)
    })
}

/// Parses a covering document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_from_json(
    json: *const c_char,
    out: *mut *mut ShiftlabCovering,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cov: Covering = serde_json::from_str(str_arg(json, "json")?)?;
        cov.validate()?;
        *out = Box::into_raw(Box::new(ShiftlabCovering(cov)));
        Ok(ShiftlabStatus::Ok)
    })
}

/// Number of cells.
///
/// # Safety
/// `c` must be a live handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_len(c: *const ShiftlabCovering) -> usize {
    c.as_ref().map_or(0, |c| c.0.q())
}

/// # Safety
/// `c` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_to_json(
    c: *const ShiftlabCovering,
    out: *mut *mut c_char,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = to_json(&handle(c, "c")?.0)?;
        Ok(ShiftlabStatus::Ok)
    })
}

/// Checks properties (a)–(e) and the union; the report goes to `out`.
///
/// # Safety
/// `c` must be a live handle, the JSON arguments NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_verify(
    c: *const ShiftlabCovering,
    k_json: *const c_char,
    params_json: *const c_char,
    out: *mut *mut c_char,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cov = &handle(c, "c")?.0;
        let k: ParamBox = serde_json::from_str(str_arg(k_json, "k_json")?)?;
        let params: GradedParams = serde_json::from_str(str_arg(params_json, "params_json")?)?;
        k.validate()?;
        params.validate(k.dim())?;
        let rep = verify_graded(cov, &k, &params);
        *out = to_json(&rep)?;
        Ok(if rep.pass {
            ShiftlabStatus::Ok
        } else {
            ShiftlabStatus::CheckFailed
        })
    })
}

/// # Safety
/// `c` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_covering_free(c: *mut ShiftlabCovering) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Builds a witness from a witness configuration document.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_witness_build(
    config_json: *const c_char,
    out: *mut *mut ShiftlabWitness,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config: WitnessConfig = serde_json::from_str(str_arg(config_json, "config_json")?)?;
        let witness = build_witness(&config)?;
        *out = Box::into_raw(Box::new(ShiftlabWitness { witness, config }));
        Ok(ShiftlabStatus::Ok)
    })
}

/// Number of parameter axes.
///
/// # Safety
/// `w` must be a live handle or null (which gives 0).
#[no_mangle]
pub unsafe extern "C" fn shiftlab_witness_dim(w: *const ShiftlabWitness) -> usize {
    w.as_ref().map_or(0, |w| w.witness.vectors.len())
}

/// # Safety
/// `w` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_witness_to_json(w: *const ShiftlabWitness, out: *mut *mut c_char) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = to_json(&handle(w, "w")?.witness)?;
        Ok(ShiftlabStatus::Ok)
    })
}

/// Evaluates at `lambda` (length `d`). With `bruteforce` the convolution
/// powers are expanded literally at the power of λ's cell.
///
/// # Safety
/// `w` must be a live handle, `lambda` point to `d` values, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_witness_eval(
    w: *const ShiftlabWitness,
    lambda: *const f64,
    d: usize,
    bruteforce: bool,
    out: *mut ShiftlabWitnessEval,
) -> ShiftlabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let h = handle(w, "w")?;
        if lambda.is_null() || d != h.witness.vectors.len() {
            return Err(invalid("lambda must point to one value per axis"));
        }
        let lam = std::slice::from_raw_parts(lambda, d);
        let mut ev = eval_analytic(&h.witness, &h.config, lam)?;
        if bruteforce {
            ev = eval_bruteforce(&h.witness, &h.config, lam, ev.n_power)?;
        }
        *out = ShiftlabWitnessEval {
            cell: ev.cell.map_or(0, |c| c as u64 + 1),
            n_power: ev.n_power,
            p1: ev.p1(),
            p2: ev.p2(),
            p3: ev.p3(),
            premature_max: ev.premature_max.unwrap_or(f64::NAN),
            total: ev.total,
            separation_ok: ev.separation_ok,
        };
        Ok(ShiftlabStatus::Ok)
    })
}

/// # Safety
/// `w` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn shiftlab_witness_free(w: *mut ShiftlabWitness) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

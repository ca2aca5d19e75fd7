//! C ABI over `varspde`.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`VspStatus`]; the message of the last failure on the calling thread is
//! available through [`vsp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use varspde::cli::{self, RunConfig, RunFailure};
use varspde::dissipation::PsiM;
use varspde::linear::PathEnsemble;
use varspde::quasilinear::project_ball;
use varspde::spectral::{DomainKind, SpaceTag, SpectralTriple};
use varspde::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numeric = 4,
    Config = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VspDomain {
    Interval = 0,
    Square = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VspSpace {
    H = 0,
    V = 1,
    VDual = 2,
    /// `[H, V]_s`.
    ComplexInterp = 3,
    /// `(H, V)_{s,p}`.
    RealInterp = 4,
}

pub struct VspTriple(SpectralTriple);
pub struct VspConfig(RunConfig);
pub struct VspEnsemble(PathEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn status_of(e: &Error) -> VspStatus {
    match e {
        Error::Shape(_) => VspStatus::Shape,
        Error::Config(_) => VspStatus::Config,
        Error::Io(_) => VspStatus::Io,
        e if e.is_numeric() => VspStatus::Numeric,
        _ => VspStatus::InvalidArgument,
    }
}

fn fail(status: VspStatus, msg: impl Into<String>) -> VspStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> VspStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

fn from_failure(f: RunFailure) -> VspStatus {
    match f {
        RunFailure::Failed(e) => from_error(e),
        f @ RunFailure::Invalid(_) => fail(VspStatus::Config, f.to_string()),
    }
}

/// Runs `f`, turning panics into [`VspStatus::Panic`].
fn guard(f: impl FnOnce() -> VspStatus) -> VspStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VspStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(VspStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, VspStatus> {
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(VspStatus::InvalidArgument, "string is not UTF-8"))
}

/// Message of the last failure on this thread, or the validation report of
/// [`vsp_config_validate`]; empty after a clean call.
/// Valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn vsp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn vsp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_triple_new(
    domain: VspDomain,
    dim: usize,
    components: usize,
    out: *mut *mut VspTriple,
) -> VspStatus {
    guard(|| {
        non_null!(out);
        let kind = match domain {
            VspDomain::Interval => DomainKind::Interval,
            VspDomain::Square => DomainKind::Square,
        };
        match SpectralTriple::new(kind, dim, components) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(VspTriple(t)));
                VspStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `eigenvalues` must point to `len` doubles and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_triple_from_eigenvalues(
    eigenvalues: *const f64,
    len: usize,
    components: usize,
    out: *mut *mut VspTriple,
) -> VspStatus {
    guard(|| {
        non_null!(eigenvalues, out);
        let ev = std::slice::from_raw_parts(eigenvalues, len).to_vec();
        match SpectralTriple::from_eigenvalues(ev, components) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(VspTriple(t)));
                VspStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `triple` must come from `vsp_triple_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vsp_triple_free(triple: *mut VspTriple) {
    if !triple.is_null() {
        drop(Box::from_raw(triple));
    }
}

/// Number of Galerkin coefficients, 0 for a null handle.
///
/// # Safety
/// `triple` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vsp_triple_len(triple: *const VspTriple) -> usize {
    triple.as_ref().map_or(0, |t| t.0.len())
}

/// Copies the eigenvalues of one component (`dim` values) into `buf`.
///
/// # Safety
/// `triple` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_triple_eigenvalues(
    triple: *const VspTriple,
    buf: *mut f64,
    len: usize,
) -> VspStatus {
    guard(|| {
        non_null!(triple, buf);
        let ev = (*triple).0.eigenvalues();
        if len < ev.len() {
            return fail(
                VspStatus::BufferTooSmall,
                format!("need {} values", ev.len()),
            );
        }
        ptr::copy_nonoverlapping(ev.as_ptr(), buf, ev.len());
        VspStatus::Ok
    })
}

/// Norm of a coefficient vector. `s` and `p` are read only by the
/// interpolation spaces.
///
/// # Safety
/// `triple` must be a live handle, `coeffs` must hold `len` doubles and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_norm(
    triple: *const VspTriple,
    coeffs: *const f64,
    len: usize,
    space: VspSpace,
    s: f64,
    p: f64,
    out: *mut f64,
) -> VspStatus {
    guard(|| {
        non_null!(triple, coeffs, out);
        let tag = match space {
            VspSpace::H => SpaceTag::H,
            VspSpace::V => SpaceTag::V,
            VspSpace::VDual => SpaceTag::Vdual,
            VspSpace::ComplexInterp => SpaceTag::ComplexInterp(s),
            VspSpace::RealInterp => SpaceTag::RealInterp { s, p },
        };
        match (*triple)
            .0
            .norm_slice(std::slice::from_raw_parts(coeffs, len), tag)
        {
            Ok(v) => {
                *out = v;
                VspStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `ψ_m`, `ψ_m′` and `ψ_m″` at `xi`; any output pointer may be null.
///
/// # Safety
/// Non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_psi(
    q: f64,
    m: f64,
    xi: f64,
    psi: *mut f64,
    d1: *mut f64,
    d2: *mut f64,
) -> VspStatus {
    guard(|| {
        let f = match PsiM::new(q, m) {
            Ok(f) => f,
            Err(e) => return from_error(e),
        };
        if !xi.is_finite() {
            return fail(VspStatus::InvalidArgument, "ξ must be finite");
        }
        for (out, v) in [(psi, f.psi(xi)), (d1, f.d1(xi)), (d2, f.d2(xi))] {
            if let Some(o) = out.as_mut() {
                *o = v;
            }
        }
        VspStatus::Ok
    })
}

/// Euclidean projection of `y` onto the closed ball of `radius`, written to `out`
/// (which may alias `y`).
///
/// # Safety
/// `y` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vsp_project_ball(
    y: *const f64,
    len: usize,
    radius: f64,
    out: *mut f64,
) -> VspStatus {
    guard(|| {
        non_null!(y, out);
        if radius.is_nan() || radius <= 0.0 {
            return fail(VspStatus::InvalidArgument, "radius must be positive");
        }
        let v = project_ball(std::slice::from_raw_parts(y, len), radius);
        ptr::copy(v.as_ptr(), out, len);
        VspStatus::Ok
    })
}

/// Parses a config; `json` selects JSON over TOML.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_parse(
    text: *const c_char,
    json: bool,
    out: *mut *mut VspConfig,
) -> VspStatus {
    guard(|| {
        non_null!(text, out);
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = if json {
            RunConfig::from_json(text)
        } else {
            RunConfig::from_toml(text)
        };
        match parsed {
            Ok(c) => {
                *out = Box::into_raw(Box::new(VspConfig(c)));
                VspStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Reads a config file (`.json` as JSON, anything else as TOML).
///
/// # Safety
/// `path` must be a nul-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_load(
    path: *const c_char,
    out: *mut *mut VspConfig,
) -> VspStatus {
    guard(|| {
        non_null!(path, out);
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match RunConfig::from_path(Path::new(path)) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(VspConfig(c)));
                VspStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `config` must come from `vsp_config_parse` or `vsp_config_load`.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_free(config: *mut VspConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_set_seed(config: *mut VspConfig, seed: u64) -> VspStatus {
    guard(|| {
        non_null!(config);
        (*config).0.seed = seed;
        VspStatus::Ok
    })
}

/// Number of validation issues; their text goes to [`vsp_last_error`].
///
/// # Safety
/// `config` must be a live handle and `issues` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_validate(
    config: *const VspConfig,
    issues: *mut usize,
) -> VspStatus {
    guard(|| {
        non_null!(config, issues);
        let found = cli::validate(&(*config).0);
        *issues = found.len();
        if found.is_empty() {
            return VspStatus::Ok;
        }
        set_error(RunFailure::Invalid(found).to_string());
        VspStatus::Ok
    })
}

/// Runs the experiment and writes its outputs and manifest to `out_dir`.
/// `exit_code` receives the command-line exit code (0, 1, 2 or 3).
/// `workers == 0` means automatic.
///
/// # Safety
/// `config` must be a live handle, `out_dir` a nul-terminated string and
/// `exit_code` null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_run(
    config: *const VspConfig,
    out_dir: *const c_char,
    workers: usize,
    exit_code: *mut i32,
) -> VspStatus {
    guard(|| {
        non_null!(config, out_dir);
        let dir = match str_arg(out_dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        let result = cli::run(
            &(*config).0,
            Path::new(dir),
            (workers > 0).then_some(workers),
        );
        let code = result.as_ref().map_or_else(RunFailure::exit_code, |_| 0);
        if let Some(c) = exit_code.as_mut() {
            *c = code;
        }
        match result {
            Ok(_) => VspStatus::Ok,
            Err(f) => from_failure(f),
        }
    })
}

/// Trajectories of a `solve-linear` or `solve-ql` config.
///
/// # Safety
/// `config` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_config_solve(
    config: *const VspConfig,
    workers: usize,
    out: *mut *mut VspEnsemble,
) -> VspStatus {
    guard(|| {
        non_null!(config, out);
        match cli::solve_ensemble(&(*config).0, (workers > 0).then_some(workers)) {
            Ok(e) => {
                *out = Box::into_raw(Box::new(VspEnsemble(e)));
                VspStatus::Ok
            }
            Err(f) => from_failure(f),
        }
    })
}

/// # Safety
/// `ensemble` must come from `vsp_config_solve`.
#[no_mangle]
pub unsafe extern "C" fn vsp_ensemble_free(ensemble: *mut VspEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Paths, time points and state length; any output may be null.
///
/// # Safety
/// `ensemble` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_ensemble_shape(
    ensemble: *const VspEnsemble,
    paths: *mut usize,
    times: *mut usize,
    state_len: *mut usize,
) -> VspStatus {
    guard(|| {
        non_null!(ensemble);
        let e = &(*ensemble).0;
        for (out, v) in [
            (paths, e.len()),
            (times, e.n_times()),
            (state_len, e.state_len()),
        ] {
            if let Some(o) = out.as_mut() {
                *o = v;
            }
        }
        VspStatus::Ok
    })
}

/// # Safety
/// `ensemble` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_ensemble_grid(
    ensemble: *const VspEnsemble,
    buf: *mut f64,
    len: usize,
) -> VspStatus {
    guard(|| {
        non_null!(ensemble, buf);
        copy_out(&(*ensemble).0.grid, buf, len)
    })
}

/// One path, time-major (`times × state_len` values).
///
/// # Safety
/// `ensemble` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vsp_ensemble_path(
    ensemble: *const VspEnsemble,
    path: usize,
    buf: *mut f64,
    len: usize,
) -> VspStatus {
    guard(|| {
        non_null!(ensemble, buf);
        let e = &(*ensemble).0;
        match e.paths.get(path) {
            Some(p) => copy_out(p, buf, len),
            None => fail(
                VspStatus::InvalidArgument,
                format!("path {path} out of range ({} paths)", e.len()),
            ),
        }
    })
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> VspStatus {
    if len < src.len() {
        return fail(
            VspStatus::BufferTooSmall,
            format!("need {} values, got {len}", src.len()),
        );
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    VspStatus::Ok
}

//! C ABI over the grid filter, model densities and local Doeblin constants.
//!
//! Every function returns an [`HfStatus`]; on failure the message is available
//! from [`hf_last_error`] on the same thread. Handles are opaque and must be
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hmm_forget::bounds::{self, LdRegion};
use hmm_forget::config::RunConfig;
use hmm_forget::grid::{tv_distance, FilterState, GridFilter, GridSpec, InitialDistribution, Support};
use hmm_forget::model::ModelSpec;
use hmm_forget::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    /// Degenerate filter, non-certifiable set, failed precondition or coverage.
    Numerical = 4,
    TooLarge = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// A validated model.
pub struct HfModel {
    model: ModelSpec,
}

/// A grid filter and its current state.
pub struct HfFilter {
    filter: GridFilter,
    state: FilterState,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HfStatus {
    match e {
        Error::InvalidInput(_) => HfStatus::InvalidInput,
        Error::Config { .. } => HfStatus::Config,
        Error::TooLarge(_) => HfStatus::TooLarge,
        Error::Io { .. } | Error::Csv { .. } => HfStatus::Io,
        Error::Replication { source, .. } => status_of(source),
        _ => HfStatus::Numerical,
    }
}

struct Fail(HfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HfStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            HfStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn model_ref<'a>(m: *const HfModel) -> Result<&'a ModelSpec, Fail> {
    m.as_ref().map(|h| &h.model).ok_or_else(|| null("model"))
}

fn support_for(model: &ModelSpec, lo: f64, hi: f64, m: usize) -> Result<Support, Fail> {
    let grid = match model.n_states() {
        Some(_) => None,
        None => Some(GridSpec::new(lo, hi, m)?),
    };
    Ok(Support::for_model(model, grid)?)
}

fn initial(support: &Support, masses: &[f64]) -> InitialDistribution {
    match support {
        Support::Grid(_) => InitialDistribution::GridDensity { values: masses.to_vec() },
        Support::Finite(_) => InitialDistribution::FiniteVector { p: masses.to_vec() },
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hf_last_error(buf: *mut c_char, len: usize) -> usize {
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

/// Builds a model from a configuration document with a `[model]` section.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_model_from_toml(toml: *const c_char, out_model: *mut *mut HfModel) -> HfStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|_| Fail(HfStatus::InvalidInput, "document is not UTF-8".into()))?;
        let cfg = RunConfig::from_str(text, &[])?;
        *slot = Box::into_raw(Box::new(HfModel { model: cfg.model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`hf_model_from_toml`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_model_free(model: *mut HfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Transition density `q(x, x_next)`; for finite models the matrix entry.
///
/// # Safety
/// `model` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_transition_density(model: *const HfModel, x: f64, x_next: f64, value: *mut f64) -> HfStatus {
    guard(|| {
        *out(value, "value")? = model_ref(model)?.transition_density(x, x_next)?;
        Ok(())
    })
}

/// Likelihood `g(x, y)`.
///
/// # Safety
/// `model` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_likelihood(model: *const HfModel, x: f64, y: f64, value: *mut f64) -> HfStatus {
    guard(|| {
        *out(value, "value")? = model_ref(model)?.likelihood(x, y)?;
        Ok(())
    })
}

/// Drift function `V(x)`.
///
/// # Safety
/// `model` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_drift(model: *const HfModel, x: f64, value: *mut f64) -> HfStatus {
    guard(|| {
        *out(value, "value")? = model_ref(model)?.drift_value(x);
        Ok(())
    })
}

/// Starts a filter from unnormalized initial masses (`len` = grid cells, or states
/// for finite models, whose grid arguments are ignored) and the first observation.
///
/// # Safety
/// `model` must be a live handle, `init` must hold `len` doubles, `out_filter` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_new(
    model: *const HfModel,
    grid_lo: f64,
    grid_hi: f64,
    grid_m: usize,
    init: *const f64,
    len: usize,
    y0: f64,
    out_filter: *mut *mut HfFilter,
) -> HfStatus {
    guard(|| {
        let slot = out(out_filter, "out_filter")?;
        *slot = ptr::null_mut();
        let model = model_ref(model)?;
        let masses = slice(init, len, "init")?;
        let support = support_for(model, grid_lo, grid_hi, grid_m)?;
        let nu = initial(&support, masses);
        let filter = GridFilter::new(model, support)?;
        let state = filter.init(&nu, y0)?;
        *slot = Box::into_raw(Box::new(HfFilter { filter, state }));
        Ok(())
    })
}

/// Advances the filter by one observation.
///
/// # Safety
/// `filter` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_step(filter: *mut HfFilter, y: f64) -> HfStatus {
    guard(|| {
        let f = out(filter, "filter")?;
        f.state = f.filter.step(&f.state, y)?;
        Ok(())
    })
}

/// Number of support points.
///
/// # Safety
/// `filter` must be a live handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_len(filter: *const HfFilter, len: *mut usize) -> HfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| null("filter"))?;
        *out(len, "len")? = f.state.logw.len();
        Ok(())
    })
}

/// Writes the normalized filter weights; `len` must be at least [`hf_filter_len`].
///
/// # Safety
/// `filter` must be a live handle and `weights` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_weights(filter: *const HfFilter, weights: *mut f64, len: usize) -> HfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| null("filter"))?;
        let w = f.state.weights();
        if len < w.len() {
            return Err(Fail(HfStatus::BufferTooSmall, format!("need {} doubles, got {len}", w.len())));
        }
        if weights.is_null() {
            return Err(null("weights"));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), weights, w.len());
        Ok(())
    })
}

/// Accumulated log normalizing constant and current step.
///
/// # Safety
/// `filter` must be a live handle; `log_z` and `step` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_log_z(filter: *const HfFilter, log_z: *mut f64, step: *mut usize) -> HfStatus {
    guard(|| {
        let f = filter.as_ref().ok_or_else(|| null("filter"))?;
        *out(log_z, "log_z")? = f.state.log_z;
        *out(step, "step")? = f.state.n;
        Ok(())
    })
}

/// Total-variation distance between two filters on the same support.
///
/// # Safety
/// Both filters must be live handles and `tv` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_tv(a: *const HfFilter, b: *const HfFilter, tv: *mut f64) -> HfStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("a"))?;
        let b = b.as_ref().ok_or_else(|| null("b"))?;
        *out(tv, "tv")? = tv_distance(&a.state, &b.state)?;
        Ok(())
    })
}

/// # Safety
/// `filter` must be null or a handle from [`hf_filter_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_filter_free(filter: *mut HfFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// `1 - (eps_minus / eps_plus)^2`.
///
/// # Safety
/// `rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_rho(eps_minus: f64, eps_plus: f64, rho: *mut f64) -> HfStatus {
    guard(|| {
        if !(eps_minus > 0.0 && eps_minus <= eps_plus && eps_plus.is_finite()) {
            return Err(Fail(HfStatus::InvalidInput, format!("need 0 < eps_minus <= eps_plus, got {eps_minus}, {eps_plus}")));
        }
        let r = eps_minus / eps_plus;
        *out(rho, "rho")? = 1.0 - r * r;
        Ok(())
    })
}

/// Certified local Doeblin constants of `[lo, hi]` (continuous models).
///
/// # Safety
/// `model` must be a live handle; `eps_minus` and `eps_plus` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_certify_ld_interval(
    model: *const HfModel,
    lo: f64,
    hi: f64,
    m_probe: usize,
    eps_minus: *mut f64,
    eps_plus: *mut f64,
) -> HfStatus {
    guard(|| {
        let ld = bounds::certify_ld_set(model_ref(model)?, &LdRegion::Interval { lo, hi }, m_probe)?;
        *out(eps_minus, "eps_minus")? = ld.eps_minus();
        *out(eps_plus, "eps_plus")? = ld.eps_plus();
        Ok(())
    })
}

/// Runs filters from two initial mass vectors over `obs` and writes the distance
/// at every step into `tv` (`n_obs` doubles).
///
/// # Safety
/// `nu`, `nu_prime` must hold `len` doubles, `obs` and `tv` `n_obs` doubles.
#[no_mangle]
pub unsafe extern "C" fn hf_run_two_filters_tv(
    model: *const HfModel,
    grid_lo: f64,
    grid_hi: f64,
    grid_m: usize,
    nu: *const f64,
    nu_prime: *const f64,
    len: usize,
    obs: *const f64,
    n_obs: usize,
    tv: *mut f64,
) -> HfStatus {
    guard(|| {
        let model = model_ref(model)?;
        let a = slice(nu, len, "nu")?;
        let b = slice(nu_prime, len, "nu_prime")?;
        let y = slice(obs, n_obs, "obs")?;
        if tv.is_null() {
            return Err(null("tv"));
        }
        let support = support_for(model, grid_lo, grid_hi, grid_m)?;
        let (na, nb) = (initial(&support, a), initial(&support, b));
        let recs = GridFilter::new(model, support)?.run_two(&na, &nb, y)?;
        for (i, r) in recs.iter().enumerate() {
            *tv.add(i) = r.tv;
        }
        Ok(())
    })
}

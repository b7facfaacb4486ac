//! C ABI for `ricci-geom`.
//!
//! Metrics and vector fields are opaque handles created by `rg_*_new`-style
//! constructors and released with the matching `rg_*_free`. Every fallible
//! function returns an [`RgStatus`]; on failure a message is kept per thread
//! and can be read with [`rg_last_error_message`]. Arrays are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ricci_geom::atp::{self, CausalClass};
use ricci_geom::chart::Chart;
use ricci_geom::curvature::{christoffel, ricci, scalar_curvature};
use ricci_geom::fields::VectorField;
use ricci_geom::flows::{self, Forcing};
use ricci_geom::jets::Point;
use ricci_geom::metric::{builtin_metric, MetricField};
use ricci_geom::ode::StepControl;
use ricci_geom::GeomError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    OutsideDomain = 4,
    Degenerate = 5,
    Numerical = 6,
    NoBlowUp = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RgCausalClass {
    Spacelike = 0,
    Timelike = 1,
    Null = 2,
    Zero = 3,
}

/// Opaque metric handle.
pub struct RgMetric(MetricField);

/// Opaque vector field handle, tied to the chart of the metric it was parsed on.
pub struct RgField(VectorField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GeomError) -> RgStatus {
    use GeomError::*;
    match e {
        Parse { .. } => RgStatus::ParseError,
        OutsideDomain { .. } => RgStatus::OutsideDomain,
        Degenerate { .. } | SignatureMismatch { .. } => RgStatus::Degenerate,
        Eval(_)
        | Jet(_)
        | NullField { .. }
        | Integration(_)
        | Sampling(_)
        | DegenerateFrame(_)
        | Unsupported(_) => RgStatus::Numerical,
        _ => RgStatus::InvalidArgument,
    }
}

struct Fail(RgStatus, String);

impl From<GeomError> for Fail {
    fn from(e: GeomError) -> Fail {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RgStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RgStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn str_array(p: *const *const c_char, n: usize, what: &str) -> Result<Vec<String>, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    (0..n)
        .map(|i| str_arg(*p.add(i), what).map(str::to_string))
        .collect()
}

unsafe fn metric_ref<'a>(p: *const RgMetric) -> Result<&'a MetricField, Fail> {
    p.as_ref().map(|m| &m.0).ok_or_else(|| null("metric"))
}

unsafe fn point_arg(g: &MetricField, x: *const f64, n: usize) -> Result<Point, Fail> {
    if x.is_null() {
        return Err(null("x"));
    }
    if n != g.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: g.dim(),
            found: n,
        }
        .into());
    }
    Ok(g.chart().point(std::slice::from_raw_parts(x, n).to_vec()))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(v);
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// call into this library from the same thread.
#[no_mangle]
pub extern "C" fn rg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rg_metric_builtin(
    name: *const c_char,
    out: *mut *mut RgMetric,
) -> RgStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let g = builtin_metric(name.strip_prefix("builtin:").unwrap_or(name))?;
        write_out(out, Box::into_raw(Box::new(RgMetric(g))))
    })
}

/// Metric from `dim * dim` component expressions in the coordinates `coords`.
/// The chart has no domain constraints.
///
/// # Safety
/// `coords` must hold `dim` strings, `components` `dim * dim` strings, and
/// `signature` (for example `"-+++"`) must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rg_metric_new(
    coords: *const *const c_char,
    dim: usize,
    components: *const *const c_char,
    signature: *const c_char,
    out: *mut *mut RgMetric,
) -> RgStatus {
    guard(|| {
        let names = str_array(coords, dim, "coords")?;
        let comps = str_array(components, dim * dim, "components")?;
        let sig = str_arg(signature, "signature")?;
        let chart = Chart::from_parts("c_chart".into(), names, Vec::new(), vec![(-1.0, 1.0); dim])?;
        let rows: Vec<Vec<String>> = comps.chunks(dim.max(1)).map(<[String]>::to_vec).collect();
        let g = MetricField::parse("c_metric", chart, &rows, sig)?;
        write_out(out, Box::into_raw(Box::new(RgMetric(g))))
    })
}

/// # Safety
/// `metric` must come from a constructor of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_metric_free(metric: *mut RgMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Chart dimension, or 0 for a null handle.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rg_metric_dim(metric: *const RgMetric) -> usize {
    metric.as_ref().map_or(0, |m| m.0.dim())
}

/// `out[k*m*m + i*m + j] = Gamma^k_ij`.
///
/// # Safety
/// `x` must hold `n` doubles and `out` room for `n^3`.
#[no_mangle]
pub unsafe extern "C" fn rg_christoffel(
    metric: *const RgMetric,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let p = point_arg(g, x, n)?;
        let chr = christoffel(g, &p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    *out.add((k * n + i) * n + j) = chr.gamma(k, i, j);
                }
            }
        }
        Ok(())
    })
}

/// Ricci tensor, `n * n` row-major.
///
/// # Safety
/// `x` must hold `n` doubles and `out` room for `n^2`.
#[no_mangle]
pub unsafe extern "C" fn rg_ricci(
    metric: *const RgMetric,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let p = point_arg(g, x, n)?;
        let ric = ricci(g, &p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        for i in 0..n {
            for j in 0..n {
                *out.add(i * n + j) = ric.comps[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `x` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rg_scalar_curvature(
    metric: *const RgMetric,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let p = point_arg(g, x, n)?;
        write_out(out, scalar_curvature(g, &p)?)
    })
}

/// Vector field from `dim` component expressions in the metric's coordinates.
///
/// # Safety
/// `components` must hold `rg_metric_dim(metric)` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn rg_field_new(
    metric: *const RgMetric,
    components: *const *const c_char,
    out: *mut *mut RgField,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let comps = str_array(components, g.dim(), "components")?;
        let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
        let a = VectorField::parse(g.chart(), &refs)?;
        write_out(out, Box::into_raw(Box::new(RgField(a))))
    })
}

/// # Safety
/// `field` must come from [`rg_field_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rg_field_free(field: *mut RgField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// `max |nabla_i A - alpha_i A + ½<A,A> e_i|` at `x`.
///
/// # Safety
/// Handles must be live; `x` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rg_atp_residual(
    metric: *const RgMetric,
    field: *const RgField,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let a = field.as_ref().ok_or_else(|| null("field"))?;
        let p = point_arg(g, x, n)?;
        write_out(out, atp::atp_residual(g, &a.0, &p)?)
    })
}

/// # Safety
/// Handles must be live; `x` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rg_causal_class(
    metric: *const RgMetric,
    field: *const RgField,
    x: *const f64,
    n: usize,
    out: *mut RgCausalClass,
) -> RgStatus {
    guard(|| {
        let g = metric_ref(metric)?;
        let a = field.as_ref().ok_or_else(|| null("field"))?;
        let p = point_arg(g, x, n)?;
        let c = match atp::causal_character(g, &a.0, &p, atp::NULL_REL_TOL)? {
            CausalClass::Spacelike => RgCausalClass::Spacelike,
            CausalClass::Timelike => RgCausalClass::Timelike,
            CausalClass::Null => RgCausalClass::Null,
            CausalClass::Zero => RgCausalClass::Zero,
        };
        write_out(out, c)
    })
}

fn escape_time(t: Option<f64>, t_max: f64) -> Result<f64, Fail> {
    t.ok_or_else(|| Fail(RgStatus::NoBlowUp, format!("no blow-up before t = {t_max}")))
}

/// Blow-up time of `a' = a^2`, `a(0) = eps * alpha`, searched on `[0, t_max]`.
/// Returns `NoBlowUp` when the solution stays bounded there.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rg_null_blowup(
    alpha: f64,
    eps: f64,
    t_max: f64,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let run = flows::null_coefficient_ode(alpha, eps, t_max, &StepControl::default())?;
        write_out(out, escape_time(run.run.t_esc(), t_max)?)
    })
}

/// Blow-up time of `y' = ½ y^2 + f(t)`, `y(0) = y0 > 0`, for a forcing
/// expression in `t` that is positive on `[0, 2/y0 + 1]`.
///
/// # Safety
/// `forcing` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rg_riccati_blowup(
    forcing: *const c_char,
    y0: f64,
    out: *mut f64,
) -> RgStatus {
    guard(|| {
        let f = Forcing::parse(str_arg(forcing, "forcing")?)?;
        let t_max = 2.0 / y0 + 1.0;
        let run = flows::riccati_blowup(&f, y0, t_max, &StepControl::default(), false)?;
        write_out(out, escape_time(run.t_esc(), t_max)?)
    })
}

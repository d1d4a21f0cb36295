//! C ABI over `gibbs-tree`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns a [`GtStatus`]; on failure the message is
//! available from [`gt_last_error`] on the same thread until the next call.
//! Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gibbs_tree::constructions::{art_lift, residual, zachary_levels, BgSetup};
use gibbs_tree::measure::{check_compatibility, log_partition, marginal_at, root_marginal};
use gibbs_tree::operator::{apply_ka, estimate_contraction, invert_ka};
use gibbs_tree::ti_solver::{find_ti_multi, standard_inits, SolveOptions, DISTINCT_EPS};
use gibbs_tree::{Error, Field, Grid, Kernel, Mode, Path, Preset, Rule, TreeShape, VertexAddr, VertexField};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtStatus {
    Ok = 0,
    Config = 1,
    Contract = 2,
    InvalidKernel = 3,
    Precondition = 4,
    Numeric = 5,
    NoConvergence = 6,
    Divergence = 7,
    Resource = 8,
    Io = 9,
    NullPointer = 10,
    Panic = 11,
}

pub struct GtKernel {
    inner: Kernel,
}

pub struct GtField {
    inner: Field,
}

pub struct GtVertexField {
    inner: VertexField,
}

pub struct GtFieldList {
    inner: Vec<Field>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(GtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => GtStatus::Config,
            Error::Contract(_) => GtStatus::Contract,
            Error::InvalidKernel(_) => GtStatus::InvalidKernel,
            Error::Precondition(_) => GtStatus::Precondition,
            Error::Numeric(_) => GtStatus::Numeric,
            Error::NoConvergence { .. } => GtStatus::NoConvergence,
            Error::Divergence { .. } => GtStatus::Divergence,
            Error::Resource(_) => GtStatus::Resource,
            _ => GtStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> GtStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            GtStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GtStatus::Config, format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn mode(full: bool) -> Mode {
    if full {
        Mode::Full
    } else {
        Mode::Half
    }
}

/// Message of the last failed call on this thread, or null. Owned by the library.
#[no_mangle]
pub extern "C" fn gt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// `rule` is one of `gauss-split`, `composite-simpson`, `trapezoid`.
///
/// # Safety
/// `name` and `rule` are nul-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_new_preset(
    name: *const c_char,
    n_nodes: usize,
    rule: *const c_char,
    out_kernel: *mut *mut GtKernel,
) -> GtStatus {
    guard(|| {
        let preset: Preset = text(name, "name")?.parse()?;
        let rule: Rule = text(rule, "rule")?.parse()?;
        let grid = Grid::new(n_nodes, rule)?;
        let k = Kernel::preset(preset, &grid)?;
        *out(out_kernel, "out_kernel")? = boxed(GtKernel { inner: k });
        Ok(())
    })
}

/// `K(t,u) = exp(J·beta·xi(t,u))` with `xi` an expression in `t` and `u`.
///
/// # Safety
/// `xi` and `rule` are nul-terminated strings; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_new_expression(
    xi: *const c_char,
    coupling: f64,
    beta: f64,
    n_nodes: usize,
    rule: *const c_char,
    out_kernel: *mut *mut GtKernel,
) -> GtStatus {
    guard(|| {
        let src = text(xi, "xi")?;
        let rule: Rule = text(rule, "rule")?.parse()?;
        let grid = Grid::new(n_nodes, rule)?;
        let k = Kernel::from_expression(src, coupling, beta, &grid)?;
        *out(out_kernel, "out_kernel")? = boxed(GtKernel { inner: k });
        Ok(())
    })
}

/// # Safety
/// `kernel` is null or came from a `gt_kernel_new_*` call and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_free(kernel: *mut GtKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of quadrature nodes; 0 for a null kernel.
///
/// # Safety
/// `kernel` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_n_nodes(kernel: *const GtKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.inner.n())
}

/// Copies nodes and weights into buffers of length `gt_kernel_n_nodes`.
///
/// # Safety
/// Both buffers hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_grid(
    kernel: *const GtKernel,
    nodes: *mut f64,
    weights: *mut f64,
    len: usize,
) -> GtStatus {
    guard(|| {
        let g = borrow(kernel, "kernel")?.inner.grid();
        if len != g.len() || nodes.is_null() || weights.is_null() {
            return Err(Failure(GtStatus::Contract, format!("buffers must hold {} values", g.len())));
        }
        std::slice::from_raw_parts_mut(nodes, len).copy_from_slice(g.nodes());
        std::slice::from_raw_parts_mut(weights, len).copy_from_slice(g.weights());
        Ok(())
    })
}

/// # Safety
/// `kernel` is valid; output pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn gt_kernel_zero_mean(
    kernel: *const GtKernel,
    tol: f64,
    out_holds: *mut bool,
    out_max_dev: *mut f64,
) -> GtStatus {
    guard(|| {
        let r = borrow(kernel, "kernel")?.inner.check_zero_mean(tol);
        *out(out_holds, "out_holds")? = r.holds;
        *out(out_max_dev, "out_max_dev")? = r.max_dev;
        Ok(())
    })
}

/// # Safety
/// `values` holds `len` doubles; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_field_new(
    values: *const f64,
    len: usize,
    value_at_zero: f64,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let f = Field::new(slice(values, len, "values")?.to_vec(), value_at_zero)?;
        *out(out_field, "out_field")? = boxed(GtField { inner: f });
        Ok(())
    })
}

/// # Safety
/// `field` is null or owned by the caller and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gt_field_free(field: *mut GtField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn gt_field_len(field: *const GtField) -> usize {
    field.as_ref().map_or(0, |f| f.inner.len())
}

/// Copies node values into `buf` (length `gt_field_len`) and the t = 0 value into `out_at_zero`.
///
/// # Safety
/// `buf` holds `len` doubles; `out_at_zero` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_field_values(
    field: *const GtField,
    buf: *mut f64,
    len: usize,
    out_at_zero: *mut f64,
) -> GtStatus {
    guard(|| {
        let f = &borrow(field, "field")?.inner;
        if len != f.len() || buf.is_null() {
            return Err(Failure(GtStatus::Contract, format!("buffer must hold {} values", f.len())));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(f.values());
        *out(out_at_zero, "out_at_zero")? = f.value_at_zero();
        Ok(())
    })
}

/// `k·A(h)`.
///
/// # Safety
/// Handles are valid; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_apply_ka(
    kernel: *const GtKernel,
    k: usize,
    h: *const GtField,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let r = apply_ka(&borrow(kernel, "kernel")?.inner, k, &borrow(h, "h")?.inner)?;
        *out(out_field, "out_field")? = boxed(GtField { inner: r });
        Ok(())
    })
}

/// Solves `kA(h) = target` for `h` with `h(0) = 0`.
///
/// # Safety
/// Handles are valid; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_invert_ka(
    kernel: *const GtKernel,
    k: usize,
    target: *const GtField,
    tol: f64,
    max_iter: usize,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let r = invert_ka(&borrow(kernel, "kernel")?.inner, k, &borrow(target, "target")?.inner, tol, max_iter)?;
        *out(out_field, "out_field")? = boxed(GtField { inner: r });
        Ok(())
    })
}

/// Distinct translation-invariant fixed points of kA from the standard
/// initial set, sorted by sup norm.
///
/// # Safety
/// `kernel` is valid; `out_list` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_find_ti(
    kernel: *const GtKernel,
    k: usize,
    tol: f64,
    max_iter: usize,
    out_list: *mut *mut GtFieldList,
) -> GtStatus {
    guard(|| {
        let kern = &borrow(kernel, "kernel")?.inner;
        let opts = SolveOptions {
            tol,
            max_iter,
            ..SolveOptions::default()
        };
        let fps = find_ti_multi(kern, k, &standard_inits(kern, k)?, &opts, DISTINCT_EPS)?;
        *out(out_list, "out_list")? = boxed(GtFieldList { inner: fps });
        Ok(())
    })
}

/// # Safety
/// `list` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn gt_field_list_len(list: *const GtFieldList) -> usize {
    list.as_ref().map_or(0, |l| l.inner.len())
}

/// A copy of entry `index`, owned by the caller.
///
/// # Safety
/// `list` is valid; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_field_list_get(
    list: *const GtFieldList,
    index: usize,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let l = &borrow(list, "list")?.inner;
        let f = l
            .get(index)
            .ok_or_else(|| Failure(GtStatus::Contract, format!("index {index} out of range ({})", l.len())))?;
        *out(out_field, "out_field")? = boxed(GtField { inner: f.clone() });
        Ok(())
    })
}

/// # Safety
/// `list` is null or owned by the caller and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gt_field_list_free(list: *mut GtFieldList) {
    if !list.is_null() {
        drop(Box::from_raw(list));
    }
}

/// Empirical sup-norm and pointwise Lipschitz ratios of A over random pairs.
///
/// # Safety
/// `kernel` is valid; output pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn gt_estimate_contraction(
    kernel: *const GtKernel,
    n_samples: usize,
    amplitude: f64,
    seed: u64,
    out_alpha: *mut f64,
    out_pointwise: *mut f64,
) -> GtStatus {
    guard(|| {
        let e = estimate_contraction(&borrow(kernel, "kernel")?.inner, n_samples, amplitude, seed)?;
        *out(out_alpha, "out_alpha")? = e.alpha_hat;
        *out(out_pointwise, "out_pointwise")? = e.pointwise;
        Ok(())
    })
}

/// The same field at every vertex (root scaled by (k+1)/k on the full tree).
///
/// # Safety
/// `field` is valid; `out_vf` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_vertex_field_ti(
    field: *const GtField,
    k: usize,
    depth: usize,
    full_tree: bool,
    out_vf: *mut *mut GtVertexField,
) -> GtStatus {
    guard(|| {
        let shape = TreeShape::new(k, depth, mode(full_tree))?;
        let vf = VertexField::translation_invariant(&borrow(field, "field")?.inner, shape)?;
        *out(out_vf, "out_vf")? = boxed(GtVertexField { inner: vf });
        Ok(())
    })
}

/// # Safety
/// `vf` is null or owned by the caller and not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gt_vertex_field_free(vf: *mut GtVertexField) {
    if !vf.is_null() {
        drop(Box::from_raw(vf));
    }
}

/// Number of vertices; 0 for null.
///
/// # Safety
/// `vf` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn gt_vertex_field_len(vf: *const GtVertexField) -> usize {
    vf.as_ref().map_or(0, |v| v.inner.fields().len())
}

/// Copy of the field at `addr` (digits joined by `/`, empty for the root).
///
/// # Safety
/// `vf` is valid; `addr` is a nul-terminated string; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_vertex_field_get(
    vf: *const GtVertexField,
    addr: *const c_char,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let v = &borrow(vf, "vf")?.inner;
        let x: VertexAddr = text(addr, "addr")?.parse()?;
        let f = v
            .get(&x)
            .ok_or_else(|| Failure(GtStatus::Contract, format!("vertex `{x}` is not in the tree")))?;
        *out(out_field, "out_field")? = boxed(GtField { inner: f.clone() });
        Ok(())
    })
}

/// Largest sup-norm defect of the equation over non-leaf vertices.
///
/// # Safety
/// Handles are valid; `out_residual` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_residual(
    kernel: *const GtKernel,
    vf: *const GtVertexField,
    out_residual: *mut f64,
) -> GtStatus {
    guard(|| {
        let r = residual(&borrow(kernel, "kernel")?.inner, &borrow(vf, "vf")?.inner)?;
        *out(out_residual, "out_residual")? = r.max_res;
        Ok(())
    })
}

/// Lifts a solution on the order-k0 tree to the order-`k` tree.
///
/// # Safety
/// Handles are valid; `out_vf` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_art_lift(
    kernel: *const GtKernel,
    source: *const GtVertexField,
    k: usize,
    depth: usize,
    tol: f64,
    out_vf: *mut *mut GtVertexField,
) -> GtStatus {
    guard(|| {
        let vf = art_lift(&borrow(kernel, "kernel")?.inner, &borrow(source, "source")?.inner, k, depth, tol)?;
        *out(out_vf, "out_vf")? = boxed(GtVertexField { inner: vf });
        Ok(())
    })
}

/// Half-tree field glued from fixed points `h` (left of the path of `r`) and
/// `eta` (right), seeded with their midpoint at depth `depth`.
///
/// # Safety
/// Handles are valid; `out_vf` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_bg_field(
    kernel: *const GtKernel,
    k: usize,
    h: *const GtField,
    eta: *const GtField,
    r: f64,
    depth: usize,
    tol: f64,
    out_vf: *mut *mut GtVertexField,
) -> GtStatus {
    guard(|| {
        let kern = &borrow(kernel, "kernel")?.inner;
        let h = borrow(h, "h")?.inner.clone();
        let eta = borrow(eta, "eta")?.inner.clone();
        let setup = BgSetup::new(kern, k, h, eta, tol)?;
        let path = Path::from_r(r, k, depth)?;
        let vf = setup.field(&path, depth, &setup.default_seed())?;
        *out(out_vf, "out_vf")? = boxed(GtVertexField { inner: vf });
        Ok(())
    })
}

/// Zachary levels as a half-tree field. If a level cannot be produced the
/// field covers the levels obtained so far and `out_complete` is false.
///
/// # Safety
/// Handles are valid; output pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn gt_zachary(
    kernel: *const GtKernel,
    k: usize,
    zeta0: *const GtField,
    n_levels: usize,
    tol: f64,
    max_iter: usize,
    out_vf: *mut *mut GtVertexField,
    out_complete: *mut bool,
) -> GtStatus {
    guard(|| {
        let run = zachary_levels(&borrow(kernel, "kernel")?.inner, k, &borrow(zeta0, "zeta0")?.inner, n_levels, tol, max_iter)?;
        let vf = run.vertex_field(k)?;
        *out(out_complete, "out_complete")? = run.is_complete();
        *out(out_vf, "out_vf")? = boxed(GtVertexField { inner: vf });
        Ok(())
    })
}

/// `ln Z_n` of the finite-volume measure.
///
/// # Safety
/// Handles are valid; `out_log_z` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_log_partition(
    kernel: *const GtKernel,
    vf: *const GtVertexField,
    out_log_z: *mut f64,
) -> GtStatus {
    guard(|| {
        *out(out_log_z, "out_log_z")? = log_partition(&borrow(kernel, "kernel")?.inner, &borrow(vf, "vf")?.inner)?;
        Ok(())
    })
}

/// Spin density at `addr`; the root when `addr` is empty.
///
/// # Safety
/// Handles are valid; `addr` is a nul-terminated string; `out_field` is writable.
#[no_mangle]
pub unsafe extern "C" fn gt_marginal(
    kernel: *const GtKernel,
    vf: *const GtVertexField,
    addr: *const c_char,
    out_field: *mut *mut GtField,
) -> GtStatus {
    guard(|| {
        let kern = &borrow(kernel, "kernel")?.inner;
        let v = &borrow(vf, "vf")?.inner;
        let x: VertexAddr = text(addr, "addr")?.parse()?;
        let d = if x.depth() == 0 {
            root_marginal(kern, v)?
        } else {
            marginal_at(kern, v, &x)?
        };
        *out(out_field, "out_field")? = boxed(GtField { inner: d });
        Ok(())
    })
}

/// # Safety
/// Handles are valid; output pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn gt_check_compatibility(
    kernel: *const GtKernel,
    vf: *const GtVertexField,
    n_samples: usize,
    seed: u64,
    tol: f64,
    out_max_rel_err: *mut f64,
    out_pass: *mut bool,
) -> GtStatus {
    guard(|| {
        let rep = check_compatibility(&borrow(kernel, "kernel")?.inner, &borrow(vf, "vf")?.inner, n_samples, seed, tol)?;
        *out(out_max_rel_err, "out_max_rel_err")? = rep.max_rel_err;
        *out(out_pass, "out_pass")? = rep.pass;
        Ok(())
    })
}

//! C ABI over the `rfim` library.
//!
//! Lattices, disorder fields and summaries are opaque handles released with
//! the matching `*_free` function. Every fallible call returns an
//! [`RfimStatus`]; on failure a description is available from
//! [`rfim_last_error`] on the same thread. Variable-length results are copied
//! into caller buffers: pass a buffer and its capacity, and read the required
//! size from the `needed` out-parameter (a null buffer with capacity 0 is a
//! valid size query).

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use rfim::disorder::{sample_disorder, DisorderField};
use rfim::gibbs::{exact_summary, GibbsSummary, ModelParams};
use rfim::lattice::LatticeSpec;
use rfim::mcmc::{mcmc_summary, McmcSettings};
use rfim::observables::overlap_moments;
use rfim::runner::{self, ExperimentConfig, RunKind, RunOptions};
use rfim::RfimError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Capacity = 3,
    Config = 4,
    Io = 5,
    Json = 6,
    NoRecords = 7,
    InvalidUtf8 = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Which cells an experiment run executes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfimRunKind {
    /// Observable sweeps and checks.
    Run = 0,
    /// Checks only.
    Verify = 1,
    /// Observable sweeps only.
    Sweep = 2,
}

/// Overlap moments of one realization.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RfimOverlapMoments {
    pub r12: f64,
    pub r12_sq: f64,
    pub r12_r13: f64,
    pub r23_r14: f64,
    pub gibbs_var: f64,
}

/// Outcome counts of an experiment run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RfimRunCounts {
    pub passed: usize,
    pub failed: usize,
    pub warned: usize,
    pub errors: usize,
    /// 0 iff nothing failed or errored.
    pub exit_code: i32,
}

/// A box `[1, n]^d` with free boundary.
pub struct RfimLattice(LatticeSpec);

/// One disorder realization.
pub struct RfimDisorder(DisorderField);

/// Gibbs expectations of one realization with the inputs that produced them.
pub struct RfimSummary {
    lattice: LatticeSpec,
    disorder: DisorderField,
    params: ModelParams,
    summary: GibbsSummary,
}

type Failure = (RfimStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn status_of(e: &RfimError) -> RfimStatus {
    match e {
        RfimError::Capacity { .. } => RfimStatus::Capacity,
        RfimError::InvalidArgument(_) => RfimStatus::InvalidArgument,
        RfimError::Config { .. } => RfimStatus::Config,
        RfimError::NoRecords(_) => RfimStatus::NoRecords,
        RfimError::Io(_) => RfimStatus::Io,
        RfimError::Json(_) => RfimStatus::Json,
    }
}

fn core(e: RfimError) -> Failure {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> Failure {
    (RfimStatus::NullPointer, format!("{name} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> RfimStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|panic| {
        let text = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err((RfimStatus::Panic, text))
    });
    match outcome {
        Ok(()) => RfimStatus::Ok,
        Err((status, message)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = message);
            status
        }
    }
}

unsafe fn get<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn text<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| (RfimStatus::InvalidUtf8, format!("{name}: {e}")))
}

/// Copies `src` into `dst[..capacity]` and reports the required length.
unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, capacity: usize, needed: *mut usize) -> Result<(), Failure> {
    if !needed.is_null() {
        *needed = src.len();
    }
    if capacity < src.len() {
        if capacity == 0 && dst.is_null() && !needed.is_null() {
            return Ok(());
        }
        return Err((
            RfimStatus::BufferTooSmall,
            format!("buffer holds {capacity} elements, {} needed", src.len()),
        ));
    }
    if dst.is_null() {
        return Err(null("buffer"));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

unsafe fn free<T>(ptr: *mut T) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Copies the last error message of this thread, NUL-terminated, into `buf`.
/// Returns the buffer size needed including the terminator; the message is
/// truncated when `capacity` is smaller.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn rfim_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_lattice_new(d: usize, n: usize, out: *mut *mut RfimLattice) -> RfimStatus {
    guard(|| put(out, RfimLattice(LatticeSpec::new(d, n).map_err(core)?)))
}

/// Number of sites, 0 for a null handle.
///
/// # Safety
/// `lattice` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfim_lattice_num_sites(lattice: *const RfimLattice) -> usize {
    lattice.as_ref().map_or(0, |l| l.0.num_sites())
}

/// Number of nearest-neighbour bonds, 0 for a null handle.
///
/// # Safety
/// `lattice` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rfim_lattice_num_bonds(lattice: *const RfimLattice) -> usize {
    lattice.as_ref().map_or(0, |l| l.0.bonds().len())
}

/// # Safety
/// `lattice` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfim_lattice_free(lattice: *mut RfimLattice) {
    free(lattice)
}

/// Standard Gaussian field keyed by `(seed, realization_id)`.
///
/// # Safety
/// `lattice` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_disorder_sample(
    lattice: *const RfimLattice,
    seed: u64,
    realization_id: u64,
    out: *mut *mut RfimDisorder,
) -> RfimStatus {
    guard(|| {
        let l = get(lattice, "lattice")?;
        put(out, RfimDisorder(sample_disorder(&l.0, seed, realization_id)))
    })
}

/// Disorder with caller-supplied values.
///
/// # Safety
/// `values` must be valid for `len` reads and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_disorder_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut RfimDisorder,
) -> RfimStatus {
    guard(|| {
        if values.is_null() && len > 0 {
            return Err(null("values"));
        }
        let v = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        put(out, RfimDisorder(DisorderField::explicit(v)))
    })
}

/// # Safety
/// `disorder` must be a live handle; `buf` null or valid for `capacity`
/// writes; `needed` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_disorder_values(
    disorder: *const RfimDisorder,
    buf: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> RfimStatus {
    guard(|| copy_out(&get(disorder, "disorder")?.0.values, buf, capacity, needed))
}

/// # Safety
/// `disorder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfim_disorder_free(disorder: *mut RfimDisorder) {
    free(disorder)
}

unsafe fn summary_from(
    lattice: *const RfimLattice,
    disorder: *const RfimDisorder,
    beta: f64,
    h: f64,
    out: *mut *mut RfimSummary,
    compute: impl FnOnce(&LatticeSpec, &DisorderField, ModelParams) -> rfim::Result<GibbsSummary>,
) -> RfimStatus {
    guard(|| {
        let l = &get(lattice, "lattice")?.0;
        let g = &get(disorder, "disorder")?.0;
        let params = ModelParams::new(beta, h).map_err(core)?;
        let summary = compute(l, g, params).map_err(core)?;
        put(
            out,
            RfimSummary {
                lattice: l.clone(),
                disorder: g.clone(),
                params,
                summary,
            },
        )
    })
}

/// Exact Gibbs expectations (transfer recursion for chains, enumeration otherwise).
///
/// # Safety
/// `lattice` and `disorder` must be live handles and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_exact(
    lattice: *const RfimLattice,
    disorder: *const RfimDisorder,
    beta: f64,
    h: f64,
    out: *mut *mut RfimSummary,
) -> RfimStatus {
    summary_from(lattice, disorder, beta, h, out, exact_summary)
}

/// Two-replica heat-bath estimate. The free energy is NaN.
///
/// # Safety
/// `lattice` and `disorder` must be live handles and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_mcmc(
    lattice: *const RfimLattice,
    disorder: *const RfimDisorder,
    beta: f64,
    h: f64,
    sweeps: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut RfimSummary,
) -> RfimStatus {
    summary_from(lattice, disorder, beta, h, out, |l, g, p| {
        Ok(mcmc_summary(l, g, p, &McmcSettings::new(sweeps, burn_in, seed))?.0)
    })
}

/// `F = log Z`.
///
/// # Safety
/// `summary` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_log_partition(summary: *const RfimSummary, out: *mut f64) -> RfimStatus {
    guard(|| {
        let s = get(summary, "summary")?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.summary.log_partition;
        Ok(())
    })
}

/// `<H_n> = (1/|V|) sum_x g_x m_x`.
///
/// # Safety
/// `summary` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_hn(summary: *const RfimSummary, out: *mut f64) -> RfimStatus {
    guard(|| {
        let s = get(summary, "summary")?;
        *out.as_mut().ok_or_else(|| null("out"))? = s.summary.h_n;
        Ok(())
    })
}

/// Magnetizations `m_x`, one per site.
///
/// # Safety
/// `summary` must be a live handle; `buf` null or valid for `capacity`
/// writes; `needed` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_magnetization(
    summary: *const RfimSummary,
    buf: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> RfimStatus {
    guard(|| copy_out(&get(summary, "summary")?.summary.magnetization, buf, capacity, needed))
}

/// Dense row-major `C_{x,y} = <s_x s_y>`.
///
/// # Safety
/// `summary` must be a live handle; `buf` null or valid for `capacity`
/// writes; `needed` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_correlation(
    summary: *const RfimSummary,
    buf: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> RfimStatus {
    guard(|| {
        let s = &get(summary, "summary")?.summary;
        copy_out(&s.correlation.to_dense(&s.magnetization), buf, capacity, needed)
    })
}

/// # Safety
/// `summary` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_overlaps(
    summary: *const RfimSummary,
    out: *mut RfimOverlapMoments,
) -> RfimStatus {
    guard(|| {
        let m = overlap_moments(&get(summary, "summary")?.summary).map_err(core)?;
        *out.as_mut().ok_or_else(|| null("out"))? = RfimOverlapMoments {
            r12: m.r12,
            r12_sq: m.r12_sq,
            r12_r13: m.r12_r13,
            r23_r14: m.r23_r14,
            gibbs_var: m.gibbs_var,
        };
        Ok(())
    })
}

/// The summary as a JSON object (`d, n, beta, h, seed, realization_id, F,
/// psi, m, C, source`), NUL-terminated. `needed` includes the terminator.
///
/// # Safety
/// `summary` must be a live handle; `buf` null or valid for `capacity`
/// bytes; `needed` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_to_json(
    summary: *const RfimSummary,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> RfimStatus {
    guard(|| {
        let s = get(summary, "summary")?;
        let record = s.summary.to_record(&s.lattice, &s.disorder, s.params);
        let mut bytes = serde_json::to_vec(&record).map_err(|e| core(e.into()))?;
        bytes.push(0);
        copy_out(&bytes, buf.cast::<u8>(), capacity, needed)
    })
}

/// # Safety
/// `summary` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rfim_summary_free(summary: *mut RfimSummary) {
    free(summary)
}

/// Runs an experiment described by TOML text, writing records and the
/// summary under `out_dir` (the config's `output` key, or `results`, when
/// null).
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `out_dir` null or one, and
/// `counts` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rfim_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
    kind: RfimRunKind,
    workers: usize,
    resume: bool,
    counts: *mut RfimRunCounts,
) -> RfimStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml(text(config_toml, "config_toml")?).map_err(core)?;
        let out = if out_dir.is_null() { None } else { Some(PathBuf::from(text(out_dir, "out_dir")?)) };
        let opts = RunOptions {
            seed: None,
            workers: (workers > 0).then_some(workers),
            out,
            resume,
        };
        let kind = match kind {
            RfimRunKind::Run => RunKind::Run,
            RfimRunKind::Verify => RunKind::Verify,
            RfimRunKind::Sweep => RunKind::Sweep,
        };
        let outcome = runner::run(&cfg, kind, &opts).map_err(core)?;
        if let Some(c) = counts.as_mut() {
            *c = RfimRunCounts {
                passed: outcome.passed,
                failed: outcome.failed,
                warned: outcome.warned,
                errors: outcome.errors,
                exit_code: outcome.exit_code(),
            };
        }
        Ok(())
    })
}

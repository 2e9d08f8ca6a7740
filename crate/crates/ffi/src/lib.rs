//! C ABI over the topicscope library.
//!
//! Every function returns a [`TsStatus`]; on failure a message is kept per
//! thread and can be read with [`ts_last_error_message`]. Handles are opaque
//! and must be released with their matching `*_free` function. Strings
//! returned to the caller are released with [`ts_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use libc::{c_char, size_t};
use topicscope::interchange::{load_corpus, load_run, validate_run};
use topicscope::metrics::{metric_report, ReportConfig};
use topicscope::rundb::Runstore;
use topicscope::stability::wer;
use topicscope::stats::{spearman, PValueMethod};
use topicscope::textproc::{extract_ngrams, TokenizerConfig};
use topicscope::{Corpus, Error, MetricReport, RunRecord};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    Usage = 2,
    Validation = 3,
    InsufficientTopics = 4,
    Io = 5,
    Undefined = 6,
    Panic = 7,
}

impl From<&Error> for TsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => TsStatus::Io,
            Error::Format { .. } | Error::Validation(_) | Error::EmptyAnchors | Error::Conflict(_) => TsStatus::Validation,
            Error::InsufficientTopics { .. } | Error::InsufficientNgrams { .. } => TsStatus::InsufficientTopics,
            Error::UndefinedMetric(_) | Error::UndefinedCorrelation(_) => TsStatus::Undefined,
            Error::Config(_) => TsStatus::Usage,
        }
    }
}

/// Loaded corpus.
pub struct TsCorpus(Corpus);

/// Loaded run.
pub struct TsRun(RunRecord);

/// Open run store.
pub struct TsStore(Runstore);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsMetricReport {
    pub top_k: size_t,
    pub ngrams_per_topic: size_t,
    pub gini: f64,
    pub gini_lorenz: f64,
    pub nfs: f64,
    pub nuv: f64,
    pub puv: f64,
    pub coherence_npmi: f64,
    pub coverage_pct: f64,
    pub error_size: size_t,
    pub topic_20_size: size_t,
}

impl From<&MetricReport> for TsMetricReport {
    fn from(r: &MetricReport) -> Self {
        TsMetricReport {
            top_k: r.top_k,
            ngrams_per_topic: r.ngrams_per_topic,
            gini: r.gini,
            gini_lorenz: r.gini_lorenz,
            nfs: r.nfs,
            nuv: r.nuv,
            puv: r.puv,
            coherence_npmi: r.coherence_npmi,
            coverage_pct: r.coverage_pct,
            error_size: r.error_size,
            topic_20_size: r.topic_20_size,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsCorrelation {
    pub rho: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: size_t,
    /// True when the p-value comes from full permutation enumeration.
    pub exact: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

struct Failure(TsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TsStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TsStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            TsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TsStatus::Usage, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn report_config(top_k: size_t, ngrams_per_topic: size_t) -> ReportConfig {
    ReportConfig {
        top_k,
        ngrams_per_topic,
        ..ReportConfig::default()
    }
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a corpus file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_load(path: *const c_char, out: *mut *mut TsCorpus) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let corpus = load_corpus(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(TsCorpus(corpus)));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be NULL or a handle from [`ts_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_free(corpus: *mut TsCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of sentences, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_len(corpus: *const TsCorpus) -> size_t {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Loads a run file, checking its internal consistency. Topics are put in
/// size order if the file lists them otherwise.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_run_load(path: *const c_char, out: *mut *mut TsRun) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let run = load_run(str_arg(path, "path")?)?.run;
        *out = Box::into_raw(Box::new(TsRun(run)));
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`ts_run_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_run_free(run: *mut TsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of topics, or 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_run_topic_count(run: *const TsRun) -> size_t {
    run.as_ref().map_or(0, |r| r.0.topics.len())
}

/// Number of outlier sentences, or 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_run_error_size(run: *const TsRun) -> size_t {
    run.as_ref().map_or(0, |r| r.0.error_size())
}

/// Checks `run` against `corpus`. Writes the number of violations to
/// `violations` and returns `TS_STATUS_VALIDATION` when there are any; the
/// last error message then lists them one per line.
///
/// # Safety
/// Handles must be live; `violations` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_run_validate(run: *const TsRun, corpus: *const TsCorpus, violations: *mut size_t) -> TsStatus {
    guard(|| {
        let violations = out_ptr(violations, "violations")?;
        let report = validate_run(&handle(run, "run")?.0, &handle(corpus, "corpus")?.0);
        *violations = report.entries.len();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Failure(TsStatus::Validation, report.entries.join("\n")))
        }
    })
}

/// Full metric report for `run` with the default tokenizer.
///
/// # Safety
/// Handles must be live; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_metric_report(
    run: *const TsRun,
    corpus: *const TsCorpus,
    top_k: size_t,
    ngrams_per_topic: size_t,
    out: *mut TsMetricReport,
) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (run, corpus) = (&handle(run, "run")?.0, &handle(corpus, "corpus")?.0);
        let table = extract_ngrams(corpus, &TokenizerConfig::default());
        let report = metric_report(run, corpus, &table, &report_config(top_k, ngrams_per_topic))?;
        *out = TsMetricReport::from(&report);
        Ok(())
    })
}

/// Gini score `1 - sum(p^2)` of `n` topic sizes.
///
/// # Safety
/// `sizes` must point to `n` readable values; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_gini_score(sizes: *const size_t, n: size_t, out: *mut f64) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if sizes.is_null() {
            return Err(null("sizes"));
        }
        *out = topicscope::metrics::gini_score(std::slice::from_raw_parts(sizes, n))?;
        Ok(())
    })
}

/// Word error rate of `hypothesis` against `reference`, both split on spaces.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_wer(hypothesis: *const c_char, reference: *const c_char, out: *mut f64) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let hyp: Vec<&str> = str_arg(hypothesis, "hypothesis")?.split_whitespace().collect();
        let reference: Vec<&str> = str_arg(reference, "reference")?.split_whitespace().collect();
        *out = wer(&hyp, &reference)?;
        Ok(())
    })
}

/// Spearman rank correlation of two length-`n` samples.
///
/// # Safety
/// `x` and `y` must point to `n` readable values; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_spearman(x: *const f64, y: *const f64, n: size_t, out: *mut TsCorrelation) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if x.is_null() || y.is_null() {
            return Err(null("sample"));
        }
        let c = spearman(std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n))?;
        *out = TsCorrelation {
            rho: c.rho,
            p_value: c.p_value,
            n: c.n,
            exact: c.method == PValueMethod::ExactPermutation,
        };
        Ok(())
    })
}

/// Opens (creating if needed) a run store directory for writing.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_store_open(path: *const c_char, out: *mut *mut TsStore) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let store = Runstore::open(PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TsStore(store)));
        Ok(())
    })
}

/// # Safety
/// `store` must be NULL or a handle from [`ts_store_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_store_free(store: *mut TsStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Number of stored runs, or 0 for NULL.
///
/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_store_len(store: *const TsStore) -> size_t {
    store.as_ref().map_or(0, |s| s.0.len())
}

/// Scores `run` against `corpus` and appends both to the store. When
/// `run_id` is not NULL it receives a copy of the stored id, to be released
/// with [`ts_string_free`].
///
/// # Safety
/// Handles must be live; `run_id` must be NULL or point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ts_store_append(
    store: *mut TsStore,
    run: *const TsRun,
    corpus: *const TsCorpus,
    top_k: size_t,
    ngrams_per_topic: size_t,
    run_id: *mut *mut c_char,
) -> TsStatus {
    guard(|| {
        let store = &mut store.as_mut().ok_or_else(|| null("store"))?.0;
        let (run, corpus) = (&handle(run, "run")?.0, &handle(corpus, "corpus")?.0);
        validate_run(run, corpus).into_result()?;
        let table = extract_ngrams(corpus, &TokenizerConfig::default());
        let report = metric_report(run, corpus, &table, &report_config(top_k, ngrams_per_topic))?;
        let id = store.append_run(run, &report)?;
        if let Some(slot) = run_id.as_mut() {
            *slot = CString::new(id).map_or(ptr::null_mut(), CString::into_raw);
        }
        Ok(())
    })
}

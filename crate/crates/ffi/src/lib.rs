//! C ABI over `lingsel`.
//!
//! Objects cross the boundary as opaque handles (`LsCorpus`, `LsModel`,
//! `LsSelection`) created by `lingsel_*` constructors and released by the
//! matching `*_free`. Every fallible call returns an `LsStatus`; on failure
//! `lingsel_last_error()` describes the most recent error on the calling
//! thread. Panics never unwind into C; they surface as `LS_PANIC`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use lingsel::corpus::{load_binary_embeddings, load_manifest};
use lingsel::dsvdd::{dsvdd_fit, DsvddConfig};
use lingsel::iforest::{iforest_train, IForestConfig};
use lingsel::ocsvm::{ocsvm_train, OcSvmConfig};
use lingsel::selection::{select_ensemble, select_random, select_single, ScoredList, SelectionConfig, Strategy};
use lingsel::{Classifier, Corpus, Error, ErrorKind, SavedModel};

/// Status codes; 1-3 match the CLI exit codes.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    LS_OK = 0,
    LS_USAGE = 1,
    LS_DATA = 2,
    LS_NUMERIC = 3,
    LS_NULL_POINTER = 4,
    LS_PANIC = 5,
}

/// Loaded corpus (ids, durations, embeddings).
pub struct LsCorpus(Corpus);

/// Trained classifier.
pub struct LsModel(SavedModel);

/// Selection result as indices into the pool corpus it was computed from.
pub struct LsSelection {
    indices: Vec<usize>,
    total_sec: f64,
    exhausted: bool,
    passes: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(err: Error) -> LsStatus {
    set_error(err.to_string());
    match err.kind() {
        ErrorKind::Usage => LsStatus::LS_USAGE,
        ErrorKind::Data => LsStatus::LS_DATA,
        ErrorKind::Numeric => LsStatus::LS_NUMERIC,
    }
}

fn null(what: &str) -> LsStatus {
    set_error(format!("{what} is null"));
    LsStatus::LS_NULL_POINTER
}

fn guard(f: impl FnOnce() -> LsStatus) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LsStatus::LS_PANIC
        }
    }
}

/// # Safety
/// `p` is null or a valid nul-terminated string.
unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, LsStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(LsStatus::LS_USAGE)
        }
    }
}

fn store<T>(out: *mut *mut T, value: T) -> LsStatus {
    // SAFETY: callers check `out` for null before computing `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    LsStatus::LS_OK
}

macro_rules! try_ls {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return fail(err),
        }
    };
}

macro_rules! try_arg {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lingsel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn lingsel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a JSONL manifest.
///
/// # Safety
/// `path` is a nul-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_load(path: *const c_char, out: *mut *mut LsCorpus) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = try_arg!(path_arg(path, "path"));
        store(out, LsCorpus(try_ls!(load_manifest(path))))
    })
}

/// Load ids/durations from a manifest and embeddings from a LEMB blob.
///
/// # Safety
/// Both paths are nul-terminated strings; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_load_binary(
    manifest: *const c_char,
    blob: *const c_char,
    out: *mut *mut LsCorpus,
) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let manifest = try_arg!(path_arg(manifest, "manifest"));
        let blob = try_arg!(path_arg(blob, "blob"));
        store(out, LsCorpus(try_ls!(load_binary_embeddings(manifest, blob))))
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `corpus` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_len(corpus: *const LsCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Embedding dimension; 0 for a null handle or an empty corpus.
///
/// # Safety
/// `corpus` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_dim(corpus: *const LsCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.dim())
}

/// Duration of record `index` in seconds.
///
/// # Safety
/// `corpus` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_duration(corpus: *const LsCorpus, index: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        let (Some(c), false) = (corpus.as_ref(), out.is_null()) else {
            return null("corpus or out");
        };
        let Some(r) = c.0.records().get(index) else {
            set_error(format!("index {index} out of range for {} records", c.0.len()));
            return LsStatus::LS_USAGE;
        };
        *out = r.duration_sec;
        LsStatus::LS_OK
    })
}

/// # Safety
/// `corpus` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lingsel_corpus_free(corpus: *mut LsCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

unsafe fn train(corpus: *const LsCorpus, out: *mut *mut LsModel, f: impl FnOnce(&Corpus) -> lingsel::Result<Classifier>) -> LsStatus {
    guard(|| {
        let (Some(c), false) = (corpus.as_ref(), out.is_null()) else {
            return null("corpus or out");
        };
        store(out, LsModel(SavedModel::new(try_ls!(f(&c.0)), false)))
    })
}

/// Train a one-class SVM with the default RBF width.
///
/// # Safety
/// `corpus` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_train_ocsvm(corpus: *const LsCorpus, nu: f64, out: *mut *mut LsModel) -> LsStatus {
    train(corpus, out, |c| {
        let cfg = OcSvmConfig { nu, ..Default::default() };
        Ok(Classifier::OcSvm(ocsvm_train(c.matrix().view(), &cfg)?.model))
    })
}

/// # Safety
/// `corpus` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_train_iforest(
    corpus: *const LsCorpus,
    n_trees: usize,
    subsample: usize,
    seed: u64,
    out: *mut *mut LsModel,
) -> LsStatus {
    train(corpus, out, |c| {
        let cfg = IForestConfig { n_trees, subsample, seed };
        Ok(Classifier::IForest(iforest_train(c.matrix().view(), &cfg)?))
    })
}

/// Deep SVDD with default learning rates, batch size and latent width.
///
/// # Safety
/// `corpus` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_train_dsvdd(
    corpus: *const LsCorpus,
    ae_epochs: usize,
    enc_epochs: usize,
    seed: u64,
    out: *mut *mut LsModel,
) -> LsStatus {
    train(corpus, out, |c| {
        let cfg = DsvddConfig { ae_epochs, enc_epochs, seed, ..Default::default() };
        Ok(Classifier::Dsvdd(dsvdd_fit(c.matrix().view(), &cfg)?.model))
    })
}

/// Load a model JSON file written by the CLI or `lingsel_model_save`.
///
/// # Safety
/// `path` is a nul-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_load(path: *const c_char, out: *mut *mut LsModel) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let path = try_arg!(path_arg(path, "path"));
        store(out, LsModel(try_ls!(SavedModel::load(path))))
    })
}

/// # Safety
/// `model` is a live handle; `path` is a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_save(model: *const LsModel, path: *const c_char) -> LsStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return null("model");
        };
        let path = try_arg!(path_arg(path, "path"));
        try_ls!(m.0.save(path));
        LsStatus::LS_OK
    })
}

/// Input dimension; 0 for a null handle.
///
/// # Safety
/// `model` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_dim(model: *const LsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.classifier.dim())
}

/// Decision scores for every corpus record, written to `out[0..len)`.
/// `len` must equal the corpus length.
///
/// # Safety
/// Handles are live; `out` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_score(
    model: *const LsModel,
    corpus: *const LsCorpus,
    out: *mut f64,
    len: usize,
) -> LsStatus {
    guard(|| {
        let (Some(m), Some(c)) = (model.as_ref(), corpus.as_ref()) else {
            return null("model or corpus");
        };
        if len != c.0.len() {
            set_error(format!("buffer holds {len} scores, corpus has {}", c.0.len()));
            return LsStatus::LS_USAGE;
        }
        if len == 0 {
            return LsStatus::LS_OK;
        }
        if out.is_null() {
            return null("out");
        }
        let scores = try_ls!(m.0.score(&c.0));
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&scores);
        LsStatus::LS_OK
    })
}

/// Inlier cutoff on the decision scale (0, or the negated training-distance
/// quantile for Deep SVDD).
///
/// # Safety
/// `model` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_threshold(model: *const LsModel, dsvdd_quantile: f64, out: *mut f64) -> LsStatus {
    guard(|| {
        let (Some(m), false) = (model.as_ref(), out.is_null()) else {
            return null("model or out");
        };
        *out = try_ls!(m.0.classifier.default_threshold(dsvdd_quantile));
        LsStatus::LS_OK
    })
}

/// # Safety
/// `model` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lingsel_model_free(model: *mut LsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

struct Pool<'a> {
    corpus: &'a Corpus,
    durations: HashMap<String, f64>,
    index: HashMap<&'a str, usize>,
}

impl<'a> Pool<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        Pool {
            corpus,
            durations: corpus.records().iter().map(|r| (r.id.clone(), r.duration_sec)).collect(),
            index: corpus.ids().enumerate().map(|(i, id)| (id, i)).collect(),
        }
    }

    /// # Safety
    /// `scores` points to `corpus.len()` readable doubles.
    unsafe fn list(&self, scores: *const f64) -> lingsel::Result<ScoredList> {
        let s: &[f64] = if self.corpus.is_empty() { &[] } else { std::slice::from_raw_parts(scores, self.corpus.len()) };
        ScoredList::from_scores(self.corpus.ids().map(String::from).zip(s.iter().copied()))
    }

    fn finish(&self, r: lingsel::selection::SelectionResult) -> LsSelection {
        LsSelection {
            indices: r.selected.iter().map(|id| self.index[id.as_str()]).collect(),
            total_sec: r.total_sec,
            exhausted: r.exhausted,
            passes: r.passes,
        }
    }
}

fn config(hours: f64, l0: usize, tight_budget: bool, seed: u64, strategy: Strategy) -> SelectionConfig {
    SelectionConfig { l0, tight_budget, seed, ..SelectionConfig::from_hours(hours, strategy) }
}

/// Multi-list selection. Each score array is aligned with the pool records
/// and holds `lingsel_corpus_len(pool)` values; `scores1` drives the order.
///
/// # Safety
/// `pool` is a live handle; score arrays are readable for the pool length.
#[no_mangle]
pub unsafe extern "C" fn lingsel_select_ensemble(
    pool: *const LsCorpus,
    scores1: *const f64,
    scores2: *const f64,
    scores3: *const f64,
    hours: f64,
    l0: usize,
    tight_budget: bool,
    out: *mut *mut LsSelection,
) -> LsStatus {
    guard(|| {
        let Some(c) = pool.as_ref() else {
            return null("pool");
        };
        if out.is_null() || (!c.0.is_empty() && (scores1.is_null() || scores2.is_null() || scores3.is_null())) {
            return null("scores or out");
        }
        let p = Pool::new(&c.0);
        let (u1, u2, u3) = (try_ls!(p.list(scores1)), try_ls!(p.list(scores2)), try_ls!(p.list(scores3)));
        let cfg = config(hours, l0, tight_budget, 0, Strategy::Ensemble);
        store(out, p.finish(try_ls!(select_ensemble(&u1, &u2, &u3, &p.durations, &cfg))))
    })
}

/// Highest scores first until the budget is met.
///
/// # Safety
/// `pool` is a live handle; `scores` is readable for the pool length.
#[no_mangle]
pub unsafe extern "C" fn lingsel_select_single(
    pool: *const LsCorpus,
    scores: *const f64,
    hours: f64,
    out: *mut *mut LsSelection,
) -> LsStatus {
    guard(|| {
        let Some(c) = pool.as_ref() else {
            return null("pool");
        };
        if out.is_null() || (!c.0.is_empty() && scores.is_null()) {
            return null("scores or out");
        }
        let p = Pool::new(&c.0);
        let u = try_ls!(p.list(scores));
        let cfg = config(hours, 1, false, 0, Strategy::Single);
        store(out, p.finish(try_ls!(select_single(&u, &p.durations, &cfg))))
    })
}

/// Seeded random baseline.
///
/// # Safety
/// `pool` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lingsel_select_random(
    pool: *const LsCorpus,
    hours: f64,
    seed: u64,
    out: *mut *mut LsSelection,
) -> LsStatus {
    guard(|| {
        let (Some(c), false) = (pool.as_ref(), out.is_null()) else {
            return null("pool or out");
        };
        let p = Pool::new(&c.0);
        let ids: Vec<String> = c.0.ids().map(String::from).collect();
        let cfg = config(hours, 1, false, seed, Strategy::Random);
        store(out, p.finish(try_ls!(select_random(&ids, &p.durations, &cfg))))
    })
}

/// Number of selected utterances; 0 for a null handle.
///
/// # Safety
/// `sel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_len(sel: *const LsSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.indices.len())
}

/// Copy the selected pool indices, in selection order, into `out[0..len)`.
///
/// # Safety
/// `sel` is a live handle; `out` points to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_indices(sel: *const LsSelection, out: *mut usize, len: usize) -> LsStatus {
    guard(|| {
        let Some(s) = sel.as_ref() else {
            return null("selection");
        };
        if len != s.indices.len() {
            set_error(format!("buffer holds {len} indices, selection has {}", s.indices.len()));
            return LsStatus::LS_USAGE;
        }
        if len > 0 {
            if out.is_null() {
                return null("out");
            }
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(&s.indices);
        }
        LsStatus::LS_OK
    })
}

/// # Safety
/// `sel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_total_sec(sel: *const LsSelection) -> f64 {
    sel.as_ref().map_or(0.0, |s| s.total_sec)
}

/// # Safety
/// `sel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_exhausted(sel: *const LsSelection) -> bool {
    sel.as_ref().is_some_and(|s| s.exhausted)
}

/// # Safety
/// `sel` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_passes(sel: *const LsSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.passes)
}

/// # Safety
/// `sel` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lingsel_selection_free(sel: *mut LsSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

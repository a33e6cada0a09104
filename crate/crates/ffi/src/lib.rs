//! C interface to `cqa-core`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `cqa_*_new`/`_load`/`_build` call and released by the matching `_free`.
//! Fallible calls return a [`CqaStatus`] and write their result through an
//! out pointer; on failure the message is available from
//! [`cqa_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use cqa_core::corpus::{load_dataset, Dataset};
use cqa_core::features::{build_feature_table, FeatureGroupSet, FeatureTable};
use cqa_core::learner::{auc, train_gbdt, GbdtModel, TrainConfig};
use cqa_core::pipeline::read_dump;
use cqa_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CqaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Config = 5,
    Dimension = 6,
    Panic = 7,
}

/// A parsed dump: threads, users and labelled instances.
pub struct CqaDataset(Dataset);

/// Feature rows with their labels and column names.
pub struct CqaFeatureTable(FeatureTable);

/// A trained boosted-tree classifier.
pub struct CqaModel(GbdtModel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> CqaStatus {
    match e {
        Error::Io { .. } | Error::MissingFile(_) | Error::Locked(_) => CqaStatus::Io,
        Error::Config(_) => CqaStatus::Config,
        Error::Dimension { .. } => CqaStatus::Dimension,
        _ => CqaStatus::Data,
    }
}

struct Fail(CqaStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CqaStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqaStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            CqaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CqaStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn fill(out: *mut f64, len: usize, values: &[f64]) -> Result<(), Fail> {
    if values.len() != len {
        return Err(Error::Dimension {
            expected: values.len(),
            actual: len,
        }
        .into());
    }
    if len > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, len);
    }
    Ok(())
}

/// Copies `s` into `buf` (truncated, always NUL-terminated when `len > 0`)
/// and returns the full length of `s` in bytes, excluding the NUL.
unsafe fn copy_str(s: &str, buf: *mut c_char, len: usize) -> usize {
    if !buf.is_null() && len > 0 {
        let n = s.len().min(len - 1);
        ptr::copy_nonoverlapping(s.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
    }
    s.len()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error raised on this thread into `buf` and returns its
/// full length. Pass a null `buf` to query the length.
///
/// # Safety
/// `buf` must be null or point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cqa_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| copy_str(&e.borrow(), buf, len))
}

/// Area under the ROC curve of `scores` against 0/1 `labels`.
///
/// # Safety
/// `scores` and `labels` must point to `n` doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn cqa_auc(scores: *const f64, labels: *const f64, n: usize, out: *mut f64) -> CqaStatus {
    guard(|| {
        let s = slice_arg(scores, n, "scores")?;
        let l = slice_arg(labels, n, "labels")?;
        let a = auc(s, l)?;
        fill(out, 1, &[a])
    })
}

/// Flesch-Kincaid grade from average words per sentence and syllables per word.
#[no_mangle]
pub extern "C" fn cqa_flesch_kincaid(words_per_sentence: f64, syllables_per_word: f64) -> f64 {
    cqa_core::shallow::flesch_kincaid(words_per_sentence, syllables_per_word)
}

/// Parses `Posts.xml`, `Users.xml`, `Comments.xml` (and `Badges.xml` if
/// present) from `dump_dir`.
///
/// # Safety
/// `dump_dir` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqa_dataset_read_dump(dump_dir: *const c_char, out: *mut *mut CqaDataset) -> CqaStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(dump_dir, "dump_dir")?);
        let (ds, _) = read_dump(&dir)?;
        put(out, CqaDataset(ds))
    })
}

/// Loads a dataset written by `cqa ingest` (the workspace `dataset/` directory).
///
/// # Safety
/// As for [`cqa_dataset_read_dump`].
#[no_mangle]
pub unsafe extern "C" fn cqa_dataset_load(dataset_dir: *const c_char, out: *mut *mut CqaDataset) -> CqaStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(dataset_dir, "dataset_dir")?);
        let (ds, _) = load_dataset(&dir)?;
        put(out, CqaDataset(ds))
    })
}

/// Number of kept threads; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cqa_dataset_thread_count(ds: *const CqaDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.threads.len())
}

/// Number of labelled (question, answer) instances; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn cqa_dataset_instance_count(ds: *const CqaDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.instances.len())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cqa_dataset_free(ds: *mut CqaDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Builds the S, A, Q and UR feature groups (topic features need trained
/// topic models and are only produced by the pipeline).
///
/// # Safety
/// `ds` must be a live dataset handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_build(ds: *const CqaDataset, out: *mut *mut CqaFeatureTable) -> CqaStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        let t = build_feature_table(&ds.0, None)?;
        put(out, CqaFeatureTable(t))
    })
}

/// Reads a feature CSV written by `cqa features`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_read_csv(path: *const c_char, out: *mut *mut CqaFeatureTable) -> CqaStatus {
    guard(|| {
        let p = PathBuf::from(str_arg(path, "path")?);
        let f = std::fs::File::open(&p).map_err(|e| Fail(CqaStatus::Io, format!("{}: {e}", p.display())))?;
        let t = FeatureTable::read_csv(std::io::BufReader::new(f))?;
        put(out, CqaFeatureTable(t))
    })
}

/// Restricts `table` to the comma separated `groups` (e.g. "S,A,UR"),
/// with or without percent-rank columns.
///
/// # Safety
/// `table` must be a live handle, `groups` a NUL-terminated string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_select(
    table: *const CqaFeatureTable,
    groups: *const c_char,
    percent_rank: bool,
    out: *mut *mut CqaFeatureTable,
) -> CqaStatus {
    guard(|| {
        let t = ref_arg(table, "table")?;
        let set = FeatureGroupSet::parse(str_arg(groups, "groups")?, percent_rank)?;
        put(out, CqaFeatureTable(t.0.select(&set)?))
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_row_count(table: *const CqaFeatureTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_rows())
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_column_count(table: *const CqaFeatureTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.matrix.n_cols())
}

/// Copies the name of column `j` into `buf` and returns its full length,
/// or 0 when `j` is out of range.
///
/// # Safety
/// `table` must be null or a live handle; `buf` null or `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_column_name(
    table: *const CqaFeatureTable,
    j: usize,
    buf: *mut c_char,
    len: usize,
) -> usize {
    match table.as_ref().and_then(|t| t.0.matrix.names().get(j)) {
        Some(name) => copy_str(name, buf, len),
        None => 0,
    }
}

/// Copies the 0/1 labels into `out`, which must hold exactly the row count.
///
/// # Safety
/// `table` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_labels(table: *const CqaFeatureTable, out: *mut f64, len: usize) -> CqaStatus {
    guard(|| {
        let t = ref_arg(table, "table")?;
        fill(out, len, &t.0.labels)
    })
}

/// Copies row `i` into `out`; missing values are NaN.
///
/// # Safety
/// `table` must be a live handle; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_row(
    table: *const CqaFeatureTable,
    i: usize,
    out: *mut f64,
    len: usize,
) -> CqaStatus {
    guard(|| {
        let t = ref_arg(table, "table")?;
        if i >= t.0.n_rows() {
            return Err(Fail(
                CqaStatus::InvalidArgument,
                format!("row {i} out of range ({} rows)", t.0.n_rows()),
            ));
        }
        fill(out, len, &t.0.matrix.row(i))
    })
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cqa_features_free(table: *mut CqaFeatureTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Trains boosted trees on every column of `table`. Zero `n_trees` or
/// `learning_rate` keep the library defaults.
///
/// # Safety
/// `table` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_train(
    table: *const CqaFeatureTable,
    n_trees: usize,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut CqaModel,
) -> CqaStatus {
    guard(|| {
        let t = ref_arg(table, "table")?;
        let mut cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        if n_trees > 0 {
            cfg.n_trees = n_trees;
        }
        if learning_rate != 0.0 {
            cfg.learning_rate = learning_rate;
        }
        let m = train_gbdt(&t.0.matrix, &t.0.labels, &cfg)?;
        put(out, CqaModel(m))
    })
}

/// Loads a JSON model, e.g. `runs/<run-id>/model.json`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_load(path: *const c_char, out: *mut *mut CqaModel) -> CqaStatus {
    guard(|| {
        let p = PathBuf::from(str_arg(path, "path")?);
        put(out, CqaModel(GbdtModel::load(&p)?))
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_save(model: *const CqaModel, path: *const c_char) -> CqaStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let p = PathBuf::from(str_arg(path, "path")?);
        Ok(m.0.save(&p)?)
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_feature_count(model: *const CqaModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.feature_names.len())
}

/// Probability that the answer described by `row` is accepted. NaN marks
/// a missing value.
///
/// # Safety
/// `model` must be a live handle; `row` must point to `len` doubles; `out` to one.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_predict(
    model: *const CqaModel,
    row: *const f64,
    len: usize,
    out: *mut f64,
) -> CqaStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let p = m.0.predict(slice_arg(row, len, "row")?)?;
        fill(out, 1, &[p])
    })
}

/// Scores every row of `table`. The table's columns must match the model's
/// feature names in order.
///
/// # Safety
/// `model` and `table` must be live handles; `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_predict_table(
    model: *const CqaModel,
    table: *const CqaFeatureTable,
    out: *mut f64,
    len: usize,
) -> CqaStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        let t = ref_arg(table, "table")?;
        if t.0.matrix.names() != m.0.feature_names.as_slice() {
            return Err(Fail(
                CqaStatus::InvalidArgument,
                "table columns differ from the model's features".into(),
            ));
        }
        fill(out, len, &m.0.predict_matrix(&t.0.matrix)?)
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cqa_model_free(model: *mut CqaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { cqa_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
        assert_eq!(n, s.len());
        s
    }

    #[test]
    fn auc_round_trip_and_errors() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [0.0, 0.0, 1.0, 1.0];
        let mut a = 0.0;
        assert_eq!(unsafe { cqa_auc(s.as_ptr(), l.as_ptr(), 4, &mut a) }, CqaStatus::Ok);
        assert!((a - 0.75).abs() < 1e-12);

        let ones = [1.0; 4];
        assert_eq!(unsafe { cqa_auc(s.as_ptr(), ones.as_ptr(), 4, &mut a) }, CqaStatus::Data);
        assert!(last_error().contains("both classes"));
        assert_eq!(
            unsafe { cqa_auc(ptr::null(), l.as_ptr(), 4, &mut a) },
            CqaStatus::NullArgument
        );
    }

    #[test]
    fn truncated_error_copy_reports_full_length() {
        set_error("abcdef");
        let mut buf = [0 as c_char; 4];
        let n = unsafe { cqa_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes(), b"abc");
        assert_eq!(unsafe { cqa_last_error_message(ptr::null_mut(), 0) }, 6);
    }

    #[test]
    fn null_handles_are_tolerated() {
        unsafe {
            assert_eq!(cqa_dataset_thread_count(ptr::null()), 0);
            assert_eq!(cqa_features_column_count(ptr::null()), 0);
            assert_eq!(cqa_model_feature_count(ptr::null()), 0);
            cqa_dataset_free(ptr::null_mut());
            cqa_features_free(ptr::null_mut());
            cqa_model_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(cqa_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

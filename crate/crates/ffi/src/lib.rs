//! C ABI over `towe-core`.
//!
//! Every fallible function returns a [`ToweStatus`]; on failure the message
//! is available from [`towe_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings
//! returned through out-parameters are owned by the caller and released
//! with [`towe_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ndarray::Array2;
use towe::corpus::{bio_decode, DatasetRecord, Instance, Label, Span};
use towe::eval::{score, EvalReport};
use towe::featurize::{relative_distances, ContextualVectors};
use towe::model::TowModel;
use towe::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToweStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Checkpoint = 6,
    Inference = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

impl From<&Error> for ToweStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => ToweStatus::Io,
            Error::Format { .. }
            | Error::Annotation { .. }
            | Error::Join { .. }
            | Error::Parse { .. }
            | Error::Load { .. }
            | Error::Json(_) => ToweStatus::Parse,
            Error::Checkpoint(_) => ToweStatus::Checkpoint,
            Error::Inference(_) | Error::NonFinite(_) => ToweStatus::Inference,
            Error::Precondition(_) | Error::Feature(_) | Error::Config(_) | Error::Dimension(_) => {
                ToweStatus::InvalidArgument
            }
        }
    }
}

/// Label indices used by the array functions: `O = 0`, `B = 1`, `I = 2`.
pub const TOWE_LABEL_O: u8 = 0;
pub const TOWE_LABEL_B: u8 = 1;
pub const TOWE_LABEL_I: u8 = 2;

/// Half-open token span `[start, end)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ToweSpan {
    pub start: usize,
    pub end: usize,
}

/// Span-level scores; precision, recall and F1 are fractions in `[0, 1]`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ToweReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub num_pred_spans: usize,
    pub num_gold_spans: usize,
    pub num_correct: usize,
}

impl From<&EvalReport> for ToweReport {
    fn from(r: &EvalReport) -> Self {
        ToweReport {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            num_pred_spans: r.num_pred_spans,
            num_gold_spans: r.num_gold_spans,
            num_correct: r.num_correct,
        }
    }
}

/// A trained model loaded from a checkpoint.
pub struct ToweModel {
    inner: TowModel,
}

/// Accumulates span counts over instances.
pub struct ToweScorer {
    pred: usize,
    gold: usize,
    correct: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(ToweStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn fail(status: ToweStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ToweStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ToweStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ToweStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ToweStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(ToweStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ToweStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn labels_from_bytes(bytes: &[u8], what: &str) -> Result<Vec<Label>, Failure> {
    bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            Label::from_index(b as usize).ok_or_else(|| {
                fail(ToweStatus::InvalidArgument, format!("{what}[{i}] = {b} is not a label index"))
            })
        })
        .collect()
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(ToweStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn towe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn towe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn towe_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a checkpoint written by `towe train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn towe_model_load(path: *const c_char, out: *mut *mut ToweModel) -> ToweStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let inner = TowModel::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(ToweModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`towe_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn towe_model_free(model: *mut ToweModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

fn parse_instance(json: &str) -> Result<Instance, Failure> {
    let mut value: serde_json::Value = serde_json::from_str(json).map_err(Error::from)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| fail(ToweStatus::Parse, "instance must be a JSON object"))?;
    if !obj.contains_key("labels") {
        let n = obj.get("tokens").and_then(|t| t.as_array()).map_or(0, |t| t.len());
        obj.insert("labels".into(), vec!["O"; n].into());
    }
    if !obj.contains_key("id") {
        obj.insert("id".into(), "".into());
    }
    let record: DatasetRecord = serde_json::from_value(value).map_err(Error::from)?;
    Ok(record.into_instance("ffi", "instance")?)
}

/// Predicts labels for one instance given as a JSON object with `tokens`,
/// `pos_tags`, `heads` (`-1` for the root) and `target_span`; `id` and
/// `labels` are optional. On success `*out_labels` holds the labels as a
/// space-separated `O`/`B`/`I` string.
///
/// Models using contextual input need `contextual`: a row-major
/// `num_tokens x contextual_dim` matrix. Pass null for word-vector models.
///
/// # Safety
/// `model` must be a live handle, `instance_json` a NUL-terminated string,
/// `contextual` null or readable for `num_tokens * contextual_dim` values,
/// and `out_labels` writable.
#[no_mangle]
pub unsafe extern "C" fn towe_model_predict(
    model: *const ToweModel,
    instance_json: *const c_char,
    contextual: *const f64,
    contextual_dim: usize,
    out_labels: *mut *mut c_char,
) -> ToweStatus {
    guard(|| {
        out_ptr(out_labels, "out_labels")?;
        *out_labels = ptr::null_mut();
        let model = model
            .as_ref()
            .ok_or_else(|| fail(ToweStatus::NullPointer, "model is null"))?;
        let inst = parse_instance(str_arg(instance_json, "instance_json")?)?;
        let ctx = if contextual.is_null() {
            None
        } else {
            let n = inst.len();
            let values = slice_arg(contextual, n * contextual_dim, "contextual")?;
            let m = Array2::from_shape_vec((n, contextual_dim), values.to_vec())
                .map_err(|e| fail(ToweStatus::InvalidArgument, e.to_string()))?;
            let mut c = ContextualVectors::new(contextual_dim);
            c.insert(inst.sentence_id.clone(), m)?;
            Some(c)
        };
        let labels = model.inner.predict(&inst, ctx.as_ref())?;
        let text: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
        *out_labels = CString::new(text.join(" ")).expect("labels are ASCII").into_raw();
        Ok(())
    })
}

/// Decodes `n` label indices into spans, repairing a dangling `I` as a span
/// start. Writes at most `capacity` spans to `out_spans` and the total
/// number to `*out_count`; returns `BufferTooSmall` when it exceeds
/// `capacity`.
///
/// # Safety
/// `labels` must be readable for `n` bytes, `out_spans` writable for
/// `capacity` spans (or null when `capacity` is 0), `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn towe_bio_decode(
    labels: *const u8,
    n: usize,
    out_spans: *mut ToweSpan,
    capacity: usize,
    out_count: *mut usize,
) -> ToweStatus {
    guard(|| {
        out_ptr(out_count, "out_count")?;
        let labels = labels_from_bytes(slice_arg(labels, n, "labels")?, "labels")?;
        let spans = bio_decode(&labels);
        *out_count = spans.len();
        if capacity > 0 {
            out_ptr(out_spans, "out_spans")?;
        }
        for (i, s) in spans.iter().take(capacity).enumerate() {
            *out_spans.add(i) = ToweSpan {
                start: s.start,
                end: s.end,
            };
        }
        if spans.len() > capacity {
            return Err(fail(
                ToweStatus::BufferTooSmall,
                format!("{} spans, capacity {capacity}", spans.len()),
            ));
        }
        Ok(())
    })
}

/// Signed distance of each of `n` tokens to the target span
/// `[target_start, target_end)`: 0 inside, otherwise the offset to the
/// nearest target token.
///
/// # Safety
/// `out` must be writable for `n` values.
#[no_mangle]
pub unsafe extern "C" fn towe_relative_distances(
    n: usize,
    target_start: usize,
    target_end: usize,
    out: *mut i64,
) -> ToweStatus {
    guard(|| {
        if target_start >= target_end || target_end > n {
            return Err(fail(
                ToweStatus::InvalidArgument,
                format!("target [{target_start}, {target_end}) is not a non-empty span of {n} tokens"),
            ));
        }
        if n > 0 {
            out_ptr(out, "out")?;
        }
        for (i, d) in relative_distances(n, Span::new(target_start, target_end))
            .into_iter()
            .enumerate()
        {
            *out.add(i) = d;
        }
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn towe_scorer_new() -> *mut ToweScorer {
    Box::into_raw(Box::new(ToweScorer {
        pred: 0,
        gold: 0,
        correct: 0,
    }))
}

/// # Safety
/// `scorer` must be null or a handle from [`towe_scorer_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn towe_scorer_free(scorer: *mut ToweScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

/// Adds one instance: `n` predicted and `n` gold label indices.
///
/// # Safety
/// `scorer` must be a live handle; `pred` and `gold` readable for `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn towe_scorer_add(
    scorer: *mut ToweScorer,
    pred: *const u8,
    gold: *const u8,
    n: usize,
) -> ToweStatus {
    guard(|| {
        let scorer = scorer
            .as_mut()
            .ok_or_else(|| fail(ToweStatus::NullPointer, "scorer is null"))?;
        let pred = labels_from_bytes(slice_arg(pred, n, "pred")?, "pred")?;
        let gold = labels_from_bytes(slice_arg(gold, n, "gold")?, "gold")?;
        let r = score(&[bio_decode(&pred)], &[bio_decode(&gold)])?;
        scorer.pred += r.num_pred_spans;
        scorer.gold += r.num_gold_spans;
        scorer.correct += r.num_correct;
        Ok(())
    })
}

/// Scores over everything added so far.
///
/// # Safety
/// `scorer` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn towe_scorer_report(scorer: *const ToweScorer, out: *mut ToweReport) -> ToweStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let s = scorer
            .as_ref()
            .ok_or_else(|| fail(ToweStatus::NullPointer, "scorer is null"))?;
        *out = (&EvalReport::from_counts(s.pred, s.gold, s.correct)).into();
        Ok(())
    })
}

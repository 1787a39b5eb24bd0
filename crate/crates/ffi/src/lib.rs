//! C ABI over the actsense core library.
//!
//! Every function returns an [`ActsStatus`]. On failure a message is kept per
//! thread and can be read with [`acts_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function. Strings returned
//! through `char **` out-parameters are owned by the caller and released with
//! [`acts_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use actsense::classifier::{forward, load_checkpoint, save_checkpoint, MlpParams};
use actsense::context::ContextTriple;
use actsense::embedding::FileStore;
use actsense::evaluation::{average_precision, mean_ap};
use actsense::prompt::{parse_generation, render_description_prompt, render_subsequent_prompt, PromptKind};
use actsense::vocab::{load_vocabulary, LabelSet, Vocabulary};
use actsense::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    UnknownLabel = 4,
    Io = 5,
    Parse = 6,
    Checkpoint = 7,
    Dimension = 8,
    NotFound = 9,
    NoPositiveClass = 10,
    EmptyGeneration = 11,
    Panic = 12,
    Internal = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActsLabelKind {
    Activity = 0,
    Object = 1,
    Interaction = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActsPromptKind {
    CurrentDescription = 0,
    SubsequentAction = 1,
}

/// Activity, object and interaction label lists.
pub struct ActsVocabulary(Vocabulary);

/// Trained classifier weights.
pub struct ActsClassifier(MlpParams);

/// Precomputed embedding vectors keyed by string.
pub struct ActsEmbeddingStore(FileStore);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ActsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownLabel(_) | Error::DuplicateLabel { .. } => ActsStatus::UnknownLabel,
            Error::Io { .. } | Error::EmptyVocabulary(_) => ActsStatus::Io,
            Error::Parse { .. } | Error::Json(_) => ActsStatus::Parse,
            Error::Checkpoint(_) | Error::CheckpointVersion(_) => ActsStatus::Checkpoint,
            Error::Dimension { .. } => ActsStatus::Dimension,
            Error::MissingEmbedding(_) => ActsStatus::NotFound,
            Error::NoPositiveClass => ActsStatus::NoPositiveClass,
            Error::EmptyGeneration => ActsStatus::EmptyGeneration,
            Error::InvalidScore(_) | Error::InvalidConfig(_) | Error::EmptyContext(_) | Error::EmptyText => {
                ActsStatus::InvalidArgument
            }
            _ => ActsStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: ActsStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ActsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ActsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside actsense".into());
            ActsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(ActsStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(ActsStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(ActsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(ActsStatus::NullArgument, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ActsStatus::NullArgument, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| fail(ActsStatus::Internal, "string contains NUL"))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn acts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn acts_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads three newline-separated label files.
///
/// # Safety
/// Paths must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_load(
    activities: *const c_char,
    objects: *const c_char,
    interactions: *const c_char,
    out: *mut *mut ActsVocabulary,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = load_vocabulary(
            str_arg(activities, "activities")?,
            str_arg(objects, "objects")?,
            str_arg(interactions, "interactions")?,
        )?;
        *out = Box::into_raw(Box::new(ActsVocabulary(v)));
        Ok(())
    })
}

/// The bundled label lists (157 activities).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_canonical(out: *mut *mut ActsVocabulary) -> ActsStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(ActsVocabulary(Vocabulary::canonical())));
        Ok(())
    })
}

/// # Safety
/// `v` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_free(v: *mut ActsVocabulary) {
    if !v.is_null() {
        drop(Box::from_raw(v));
    }
}

fn label_set(v: &Vocabulary, kind: ActsLabelKind) -> &LabelSet {
    match kind {
        ActsLabelKind::Activity => &v.activities,
        ActsLabelKind::Object => &v.objects,
        ActsLabelKind::Interaction => &v.interactions,
    }
}

/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_count(v: *const ActsVocabulary, kind: ActsLabelKind, out: *mut usize) -> ActsStatus {
    guard(|| {
        *out_arg(out, "out")? = label_set(&ref_arg(v, "vocabulary")?.0, kind).len();
        Ok(())
    })
}

/// Name of label `id`, written to `*out` as a new string.
///
/// # Safety
/// `v` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_label(
    v: *const ActsVocabulary,
    kind: ActsLabelKind,
    id: usize,
    out: *mut *mut c_char,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let set = label_set(&ref_arg(v, "vocabulary")?.0, kind);
        let name =
            set.name(id).ok_or_else(|| fail(ActsStatus::InvalidArgument, format!("{} id {id} out of range", set.kind())))?;
        *out = owned_string(name.to_owned())?;
        Ok(())
    })
}

/// Id of the label called `name`.
///
/// # Safety
/// `v` must be a live handle; `name` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_vocabulary_id(
    v: *const ActsVocabulary,
    kind: ActsLabelKind,
    name: *const c_char,
    out: *mut usize,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = label_set(&ref_arg(v, "vocabulary")?.0, kind).resolve(str_arg(name, "name")?)?;
        Ok(())
    })
}

/// Renders the current-description prompt for a context of label ids.
///
/// # Safety
/// Each id array must hold its stated number of elements; `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn acts_render_description_prompt(
    v: *const ActsVocabulary,
    verbs: *const usize,
    n_verbs: usize,
    objects: *const usize,
    n_objects: usize,
    interactions: *const usize,
    n_interactions: usize,
    out: *mut *mut c_char,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let vocab = &ref_arg(v, "vocabulary")?.0;
        let triple = ContextTriple {
            interactions: slice_arg(interactions, n_interactions, "interactions")?.to_vec(),
            objects: slice_arg(objects, n_objects, "objects")?.to_vec(),
            verbs: slice_arg(verbs, n_verbs, "verbs")?.to_vec(),
        };
        *out = owned_string(render_description_prompt(&triple, vocab)?.text)?;
        Ok(())
    })
}

/// Renders the subsequent-action prompt continuing `description`.
///
/// # Safety
/// `description` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_render_subsequent_prompt(description: *const c_char, out: *mut *mut c_char) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = owned_string(render_subsequent_prompt(str_arg(description, "description")?)?.text)?;
        Ok(())
    })
}

/// Cuts a raw completion down to the sentence the prompt asked for.
///
/// # Safety
/// `raw` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_parse_generation(raw: *const c_char, kind: ActsPromptKind, out: *mut *mut c_char) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind = match kind {
            ActsPromptKind::CurrentDescription => PromptKind::CurrentDescription,
            ActsPromptKind::SubsequentAction => PromptKind::SubsequentAction,
        };
        *out = owned_string(parse_generation(str_arg(raw, "raw")?, kind)?)?;
        Ok(())
    })
}

/// Average precision of one class. `labels[i]` is nonzero for positives.
/// `*defined` is set to 0 when there are no positives, leaving `*out` at 0.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn acts_average_precision(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
    defined: *mut u8,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let defined = out_arg(defined, "defined")?;
        let labels: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&l| l != 0).collect();
        let ap = average_precision(slice_arg(scores, n, "scores")?, &labels)?;
        *out = ap.unwrap_or(0.0);
        *defined = u8::from(ap.is_some());
        Ok(())
    })
}

/// Mean of the entries of `aps` whose `defined` flag is nonzero.
///
/// # Safety
/// `aps` and `defined` must hold `n` elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_mean_ap(aps: *const f64, defined: *const u8, n: usize, out: *mut f64) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let per_class: Vec<Option<f64>> = slice_arg(aps, n, "aps")?
            .iter()
            .zip(slice_arg(defined, n, "defined")?)
            .map(|(&ap, &d)| (d != 0).then_some(ap))
            .collect();
        *out = mean_ap(&per_class)?;
        Ok(())
    })
}

/// Fresh randomly initialised classifier with the default hidden widths.
///
/// # Safety
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_init(
    input_width: usize,
    num_classes: usize,
    seed: u64,
    out: *mut *mut ActsClassifier,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if input_width == 0 || num_classes == 0 {
            return Err(fail(ActsStatus::InvalidArgument, "widths must be positive"));
        }
        *out = Box::into_raw(Box::new(ActsClassifier(MlpParams::init(input_width, num_classes, seed))));
        Ok(())
    })
}

/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_load(path: *const c_char, out: *mut *mut ActsClassifier) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = load_checkpoint(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(ActsClassifier(params)));
        Ok(())
    })
}

/// # Safety
/// `c` a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_save(c: *const ActsClassifier, path: *const c_char) -> ActsStatus {
    guard(|| {
        save_checkpoint(&ref_arg(c, "classifier")?.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `c` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_free(c: *mut ActsClassifier) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_shape(
    c: *const ActsClassifier,
    input_width: *mut usize,
    num_classes: *mut usize,
) -> ActsStatus {
    guard(|| {
        let params = &ref_arg(c, "classifier")?.0;
        *out_arg(input_width, "input_width")? = params.din();
        *out_arg(num_classes, "num_classes")? = params.num_classes();
        Ok(())
    })
}

/// Scores one fused input of `len` floats into `scores`, which must have
/// room for `num_classes` values.
///
/// # Safety
/// `input` holds `len` floats; `scores` holds `scores_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn acts_classifier_predict(
    c: *const ActsClassifier,
    input: *const f32,
    len: usize,
    scores: *mut f64,
    scores_len: usize,
) -> ActsStatus {
    guard(|| {
        let params = &ref_arg(c, "classifier")?.0;
        let n = params.num_classes();
        if scores_len < n {
            return Err(fail(ActsStatus::Dimension, format!("scores buffer holds {scores_len}, need {n}")));
        }
        if scores.is_null() {
            return Err(fail(ActsStatus::NullArgument, "scores is null"));
        }
        let s = forward(params, slice_arg(input, len, "input")?)?;
        std::slice::from_raw_parts_mut(scores, n).copy_from_slice(&s.0);
        Ok(())
    })
}

/// Opens a binary embedding record file of `dim`-wide vectors.
///
/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_embedding_store_load(
    path: *const c_char,
    dim: usize,
    out: *mut *mut ActsEmbeddingStore,
) -> ActsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let store = FileStore::load(str_arg(path, "path")?, dim)?;
        *out = Box::into_raw(Box::new(ActsEmbeddingStore(store)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn acts_embedding_store_free(s: *mut ActsEmbeddingStore) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acts_embedding_store_len(s: *const ActsEmbeddingStore, out: *mut usize) -> ActsStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(s, "store")?.0.len();
        Ok(())
    })
}

/// Copies the vector stored under `key` into `buf`. `*written` receives
/// its length; a short buffer fails with `DIMENSION` but still reports it.
///
/// # Safety
/// `s` a live handle; `key` NUL-terminated; `buf` holds `buf_len` floats.
#[no_mangle]
pub unsafe extern "C" fn acts_embedding_store_get(
    s: *const ActsEmbeddingStore,
    key: *const c_char,
    buf: *mut f32,
    buf_len: usize,
    written: *mut usize,
) -> ActsStatus {
    guard(|| {
        let written = out_arg(written, "written")?;
        let key = str_arg(key, "key")?;
        let v = ref_arg(s, "store")?
            .0
            .get(key)
            .ok_or_else(|| fail(ActsStatus::NotFound, format!("no embedding stored for key {key:?}")))?;
        *written = v.len();
        if buf_len < v.len() {
            return Err(fail(ActsStatus::Dimension, format!("buffer holds {buf_len}, need {}", v.len())));
        }
        if buf.is_null() {
            return Err(fail(ActsStatus::NullArgument, "buf is null"));
        }
        std::slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v);
        Ok(())
    })
}

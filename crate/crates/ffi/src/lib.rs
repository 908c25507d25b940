//! C ABI over the judgebench metrics, statistics, retrieval and authorship
//! code. Every function returns a [`JbStatus`]; on failure the message is
//! available from [`jb_last_error_message`] on the same thread. Results are
//! written through out-pointers, which are left untouched on failure.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use judgebench::corpus::{self, VerdictDoc};
use judgebench::discernment::{
    self, AuthorshipModel, Featurizer, Label, LabeledSentence, NgramFeaturizer, SentenceSource, TrainParams,
};
use judgebench::metrics::{self, RougeVariant};
use judgebench::retrieval::PairIndex;
use judgebench::stats::{self, AgreementTable, ScoreMatrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JbRouge {
    Rouge1 = 0,
    Rouge2 = 1,
    RougeL = 2,
}

/// Exact cosine top-k index over caller-supplied vectors.
pub struct JbIndex {
    index: PairIndex,
    positions: HashMap<String, usize>,
}

/// Character n-gram authorship classifier.
pub struct JbAuthorshipModel {
    featurizer: NgramFeaturizer,
    model: AuthorshipModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(JbStatus, String);

impl Failure {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Failure(JbStatus::InvalidArgument, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> JbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            JbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            JbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(JbStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(JbStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn floats<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure(JbStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn texts<'a>(p: *const *const c_char, len: usize, what: &str) -> Result<Vec<&'a str>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(Failure(JbStatus::NullPointer, format!("{what} is null")));
    }
    slice::from_raw_parts(p, len)
        .iter()
        .enumerate()
        .map(|(i, s)| text(*s, &format!("{what}[{i}]")))
        .collect()
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(JbStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or NULL if the last call
/// succeeded. Free the result with [`jb_string_free`].
#[no_mangle]
pub extern "C" fn jb_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn jb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Sentence BLEU on the 0-100 scale.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_bleu(candidate: *const c_char, reference: *const c_char, out_score: *mut f64) -> JbStatus {
    guard(|| {
        let v =
            metrics::bleu(text(candidate, "candidate")?, text(reference, "reference")?).map_err(Failure::invalid)?;
        *out(out_score, "out_score")? = v;
        Ok(())
    })
}

/// ROUGE F1 for the given variant.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_rouge(
    candidate: *const c_char,
    reference: *const c_char,
    variant: JbRouge,
    out_score: *mut f64,
) -> JbStatus {
    guard(|| {
        let variant = match variant {
            JbRouge::Rouge1 => RougeVariant::R1,
            JbRouge::Rouge2 => RougeVariant::R2,
            JbRouge::RougeL => RougeVariant::L,
        };
        let v = metrics::rouge(text(candidate, "candidate")?, text(reference, "reference")?, variant)
            .map_err(Failure::invalid)?;
        *out(out_score, "out_score")? = v;
        Ok(())
    })
}

/// Base-2 Jensen-Shannon divergence of two weight vectors of length `len`.
///
/// # Safety
/// `p` and `q` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn jb_jsd(p: *const f64, q: *const f64, len: usize, out_value: *mut f64) -> JbStatus {
    guard(|| {
        let v = metrics::jsd(floats(p, len, "p")?, floats(q, len, "q")?).map_err(Failure::invalid)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Greedy token matching over row-major token vectors of width `dim`.
///
/// # Safety
/// `candidate` holds `n_candidate * dim` doubles and `reference` holds
/// `n_reference * dim`; the three out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_greedy_match(
    candidate: *const f64,
    n_candidate: usize,
    reference: *const f64,
    n_reference: usize,
    dim: usize,
    out_precision: *mut f64,
    out_recall: *mut f64,
    out_f: *mut f64,
) -> JbStatus {
    guard(|| {
        if dim == 0 {
            return Err(Failure::invalid("dim must be positive"));
        }
        let rows = |p, n, what| -> Result<Vec<Vec<f64>>, Failure> {
            Ok(floats(p, n * dim, what)?.chunks(dim).map(<[f64]>::to_vec).collect())
        };
        let s = metrics::greedy_match(
            &rows(candidate, n_candidate, "candidate")?,
            &rows(reference, n_reference, "reference")?,
        )
        .map_err(Failure::invalid)?;
        let (p, r, f) = (
            out(out_precision, "out_precision")?,
            out(out_recall, "out_recall")?,
            out(out_f, "out_f")?,
        );
        (*p, *r, *f) = (s.precision, s.recall, s.f);
        Ok(())
    })
}

/// Centered gaps of a `judges x judges` row-major matrix where entry
/// `(k, j)` scores the model of judge `k` on judge `j`'s test set.
///
/// # Safety
/// `values` holds `judges * judges` doubles; `out_gaps` has room for `judges`.
#[no_mangle]
pub unsafe extern "C" fn jb_centered_gaps(
    values: *const f64,
    judges: usize,
    higher_is_better: bool,
    out_gaps: *mut f64,
) -> JbStatus {
    guard(|| {
        let flat = floats(values, judges * judges, "values")?;
        if out_gaps.is_null() {
            return Err(Failure(JbStatus::NullPointer, "out_gaps is null".into()));
        }
        let m = ScoreMatrix {
            judges: (0..judges).map(|j| j.to_string()).collect(),
            values: flat.chunks(judges.max(1)).map(<[f64]>::to_vec).collect(),
            metric_name: String::new(),
            higher_is_better,
        };
        let gaps = stats::centered_gaps(&m).map_err(Failure::invalid)?;
        slice::from_raw_parts_mut(out_gaps, judges).copy_from_slice(&gaps);
        Ok(())
    })
}

/// Two-sided Wilcoxon signed-rank test; zero differences are dropped.
///
/// # Safety
/// `deltas` holds `n` doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_wilcoxon(
    deltas: *const f64,
    n: usize,
    out_statistic: *mut f64,
    out_p_value: *mut f64,
) -> JbStatus {
    guard(|| {
        let w = stats::wilcoxon_signed_rank(floats(deltas, n, "deltas")?).map_err(Failure::invalid)?;
        *out(out_statistic, "out_statistic")? = w.statistic;
        *out(out_p_value, "out_p_value")? = w.p_value;
        Ok(())
    })
}

/// Paired item-level bootstrap of `matched - other`.
///
/// # Safety
/// `matched` and `other` hold `n` doubles; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_paired_bootstrap(
    matched: *const f64,
    other: *const f64,
    n: usize,
    resamples: usize,
    seed: u64,
    out_mean_gap: *mut f64,
    out_p_value: *mut f64,
) -> JbStatus {
    guard(|| {
        let r = stats::paired_bootstrap(
            floats(matched, n, "matched")?,
            floats(other, n, "other")?,
            resamples,
            seed,
        )
        .map_err(Failure::invalid)?;
        *out(out_mean_gap, "out_mean_gap")? = r.mean_gap;
        *out(out_p_value, "out_p_value")? = r.p_value;
        Ok(())
    })
}

/// Gwet's AC1 for two raters with binary labels.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_gwet_ac1(
    both_yes: u64,
    both_no: u64,
    yes_no: u64,
    no_yes: u64,
    out_value: *mut f64,
) -> JbStatus {
    guard(|| {
        let t = AgreementTable {
            both_yes,
            both_no,
            yes_no,
            no_yes,
        };
        *out(out_value, "out_value")? = stats::gwet_ac1(&t).map_err(Failure::invalid)?;
        Ok(())
    })
}

/// Byte offset where the next-token prefix of `text` ends: the text is cut
/// after whitespace token `ceil(fraction * N)`.
///
/// # Safety
/// `text` must be NUL-terminated; `out_offset` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jb_prefix_offset(text_ptr: *const c_char, fraction: f64, out_offset: *mut usize) -> JbStatus {
    guard(|| {
        let doc = VerdictDoc {
            judge_id: String::new(),
            case_id: String::new(),
            text: text(text_ptr, "text")?.to_string(),
            date: None,
        };
        let task = corpus::make_prefix_task(&doc, fraction).map_err(Failure::invalid)?;
        *out(out_offset, "out_offset")? = task.prefix.len();
        Ok(())
    })
}

/// Builds an index over `n` row-major vectors of width `dim`. Queries report
/// positions in this input order.
///
/// # Safety
/// `vectors` holds `n * dim` doubles; `out_index` must be writable. Free the
/// handle with [`jb_index_free`].
#[no_mangle]
pub unsafe extern "C" fn jb_index_new(
    vectors: *const f64,
    n: usize,
    dim: usize,
    out_index: *mut *mut JbIndex,
) -> JbStatus {
    guard(|| {
        if dim == 0 {
            return Err(Failure::invalid("dim must be positive"));
        }
        let flat = floats(vectors, n * dim, "vectors")?;
        let ids: Vec<String> = (0..n).map(|i| format!("{i:020}")).collect();
        let index = PairIndex::from_vectors("ffi", ids.iter().cloned().zip(flat.chunks(dim).map(<[f64]>::to_vec)))
            .map_err(Failure::invalid)?;
        let handle = JbIndex {
            index,
            positions: ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect(),
        };
        *out(out_index, "out_index")? = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `index` must be a live handle from [`jb_index_new`].
#[no_mangle]
pub unsafe extern "C" fn jb_index_len(index: *const JbIndex) -> usize {
    index.as_ref().map_or(0, |h| h.index.len())
}

/// Top-`k` entries by cosine similarity, best first; ties go to the earlier
/// position.
///
/// # Safety
/// `query` holds `dim` doubles; `out_positions` and `out_scores` have room for
/// `k` values each.
#[no_mangle]
pub unsafe extern "C" fn jb_index_query(
    index: *const JbIndex,
    query: *const f64,
    dim: usize,
    k: usize,
    out_positions: *mut usize,
    out_scores: *mut f64,
) -> JbStatus {
    guard(|| {
        let h = index
            .as_ref()
            .ok_or_else(|| Failure(JbStatus::NullPointer, "index is null".into()))?;
        let hits = h
            .index
            .query_vector(floats(query, dim, "query")?, k)
            .map_err(Failure::invalid)?;
        if out_positions.is_null() || out_scores.is_null() {
            return Err(Failure(JbStatus::NullPointer, "output buffer is null".into()));
        }
        let positions = slice::from_raw_parts_mut(out_positions, k);
        let scores = slice::from_raw_parts_mut(out_scores, k);
        for (i, (id, score)) in hits.into_iter().enumerate() {
            positions[i] = h.positions[&id];
            scores[i] = score;
        }
        Ok(())
    })
}

/// # Safety
/// `index` must come from [`jb_index_new`] and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn jb_index_free(index: *mut JbIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

fn labeled(texts: &[&str], prefix: &str, label: Label) -> Vec<LabeledSentence> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| LabeledSentence {
            id: format!("{prefix}{i}"),
            text: t.to_string(),
            label,
            source: SentenceSource::RealJudge,
        })
        .collect()
}

/// Trains the default character n-gram classifier: positives are the target
/// author's sentences, negatives everyone else's.
///
/// # Safety
/// `positives` and `negatives` hold `n_positive` and `n_negative`
/// NUL-terminated strings; `out_model` must be writable. Free the handle with
/// [`jb_authorship_free`].
#[no_mangle]
pub unsafe extern "C" fn jb_authorship_train(
    positives: *const *const c_char,
    n_positive: usize,
    negatives: *const *const c_char,
    n_negative: usize,
    seed: u64,
    out_model: *mut *mut JbAuthorshipModel,
) -> JbStatus {
    guard(|| {
        let pos = labeled(&texts(positives, n_positive, "positives")?, "p", Label::Positive);
        let neg = labeled(&texts(negatives, n_negative, "negatives")?, "n", Label::Negative);
        let featurizer = NgramFeaturizer::default();
        let model =
            discernment::train(&featurizer, &pos, &neg, seed, TrainParams::default()).map_err(Failure::invalid)?;
        *out(out_model, "out_model")? = Box::into_raw(Box::new(JbAuthorshipModel { featurizer, model }));
        Ok(())
    })
}

/// Probability that `text` was written by the positive author.
///
/// # Safety
/// `model` must be a live handle; `text` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jb_authorship_probability(
    model: *const JbAuthorshipModel,
    text_ptr: *const c_char,
    out_probability: *mut f64,
) -> JbStatus {
    guard(|| {
        let h = model
            .as_ref()
            .ok_or_else(|| Failure(JbStatus::NullPointer, "model is null".into()))?;
        let features = h
            .featurizer
            .featurize(text(text_ptr, "text")?)
            .map_err(Failure::invalid)?;
        *out(out_probability, "out_probability")? = h.model.probability(&features.vector);
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`jb_authorship_train`] and not have been freed.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn jb_authorship_free(model: *mut JbAuthorshipModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

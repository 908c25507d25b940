//! Verdict corpora: loading, judge filtering, per-judge splits, training-data
//! subsampling and next-token prefix tasks.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::{self, NormalizeOptions};

/// Minimum number of summary judgments a judge needs to be retained.
pub const DEFAULT_MIN_DOCS: usize = 100;
/// Share of a summary judgment given to the model as a seed.
pub const DEFAULT_PREFIX_FRACTION: f64 = 0.15;
pub const DEFAULT_TEST_RATIO: f64 = 0.1;
pub const ABLATION_FRACTIONS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: missing field {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field {field} must be a string")]
    WrongType { line: usize, field: &'static str },
    #[error("line {line}: text is empty after normalization")]
    EmptyText { line: usize },
    #[error("line {line}: duplicate document ({judge_id}, {case_id})")]
    Duplicate {
        line: usize,
        judge_id: String,
        case_id: String,
    },
    #[error("judge {judge_id} has {count} item(s); at least 2 are needed for a split")]
    TooFewItems { judge_id: String, count: usize },
    #[error("{name} must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("text has {tokens} whitespace token(s); prefix task needs at least 2")]
    TooShort { tokens: usize },
    #[error("prefix of {prefix_tokens} token(s) leaves no continuation")]
    EmptyContinuation { prefix_tokens: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictDoc {
    pub judge_id: String,
    pub case_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeProfile {
    pub judge_id: String,
    pub doc_count: usize,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub judge_id: String,
    pub seed: u64,
    pub fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixTask {
    pub case_id: String,
    pub prefix: String,
    pub continuation_reference: String,
    pub fraction: f64,
}

/// Anything that belongs to one judge and has a stable id.
pub trait JudgeItem {
    fn judge_id(&self) -> &str;
    fn item_id(&self) -> String;
}

impl JudgeItem for VerdictDoc {
    fn judge_id(&self) -> &str {
        &self.judge_id
    }
    fn item_id(&self) -> String {
        self.case_id.clone()
    }
}

fn field<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    line: usize,
    name: &'static str,
) -> Result<&'a str, CorpusError> {
    match obj.get(name) {
        None | Some(serde_json::Value::Null) => Err(CorpusError::MissingField { line, field: name }),
        Some(serde_json::Value::String(s)) => Ok(s),
        Some(_) => Err(CorpusError::WrongType { line, field: name }),
    }
}

/// Parses a verdict corpus in JSONL form. Blank lines are ignored; line
/// numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(reader: R, opts: NormalizeOptions) -> Result<Vec<VerdictDoc>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| CorpusError::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let obj = value.as_object().ok_or_else(|| CorpusError::MalformedLine {
            line: line_no,
            message: "expected a JSON object".into(),
        })?;
        let judge_id = field(obj, line_no, "judge_id")?.to_string();
        let case_id = field(obj, line_no, "case_id")?.to_string();
        let raw_text = field(obj, line_no, "text")?;
        let date = match obj.get("date") {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) => Some(s.clone()),
            Some(_) => {
                return Err(CorpusError::WrongType {
                    line: line_no,
                    field: "date",
                })
            }
        };
        let text = text::normalize(raw_text, opts);
        if text.is_empty() {
            return Err(CorpusError::EmptyText { line: line_no });
        }
        if !seen.insert((judge_id.clone(), case_id.clone())) {
            return Err(CorpusError::Duplicate {
                line: line_no,
                judge_id,
                case_id,
            });
        }
        docs.push(VerdictDoc {
            judge_id,
            case_id,
            text,
            date,
        });
    }
    Ok(docs)
}

pub fn load_corpus(path: &Path, opts: NormalizeOptions) -> Result<Vec<VerdictDoc>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(BufReader::new(file), opts)
}

/// Keeps the documents of judges with at least `min_docs` documents. Profiles
/// cover every input judge, sorted by judge id.
pub fn filter_judges(docs: &[VerdictDoc], min_docs: usize) -> (Vec<VerdictDoc>, Vec<JudgeProfile>) {
    let mut profiles: BTreeMap<&str, JudgeProfile> = BTreeMap::new();
    for doc in docs {
        let p = profiles.entry(doc.judge_id.as_str()).or_insert_with(|| JudgeProfile {
            judge_id: doc.judge_id.clone(),
            doc_count: 0,
            token_count: 0,
        });
        p.doc_count += 1;
        p.token_count += text::token_spans(&doc.text).len();
    }
    let kept = docs
        .iter()
        .filter(|d| profiles[d.judge_id.as_str()].doc_count >= min_docs.max(1))
        .cloned()
        .collect();
    (kept, profiles.into_values().collect())
}

fn shuffled(mut ids: Vec<String>, seed: u64) -> Vec<String> {
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    ids
}

fn check_open_unit(name: &'static str, value: f64) -> Result<(), CorpusError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(CorpusError::OutOfRange {
            name,
            range: "(0, 1)",
            value,
        })
    }
}

fn check_fraction(value: f64) -> Result<(), CorpusError> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(CorpusError::OutOfRange {
            name: "fraction",
            range: "(0, 1]",
            value,
        })
    }
}

/// Per-judge held-out split. Ids are sorted, shuffled with a seed derived from
/// `(seed, judge_id)`, and the first `ceil(test_ratio * n)` become the test set.
/// Input order never affects the result. Splits are returned sorted by judge.
pub fn split_per_judge<T: JudgeItem>(
    items: &[T],
    test_ratio: f64,
    seed: u64,
) -> Result<Vec<DatasetSplit>, CorpusError> {
    check_open_unit("test_ratio", test_ratio)?;
    let mut by_judge: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for item in items {
        by_judge.entry(item.judge_id()).or_default().push(item.item_id());
    }
    by_judge
        .into_iter()
        .map(|(judge_id, ids)| {
            if ids.len() < 2 {
                return Err(CorpusError::TooFewItems {
                    judge_id: judge_id.to_string(),
                    count: ids.len(),
                });
            }
            let n = ids.len();
            let n_test = text::ceil_count(test_ratio, n).min(n - 1);
            let order = shuffled(ids, text::derive_seed(seed, judge_id));
            let (test, train) = order.split_at(n_test);
            Ok(DatasetSplit {
                judge_id: judge_id.to_string(),
                seed,
                fraction: 1.0,
                train: train.to_vec(),
                test: test.to_vec(),
            })
        })
        .collect()
}

/// Reduces the training side to `ceil(fraction * |train|)` items. The same seed
/// always yields nested subsets across fractions; the test side is untouched.
pub fn subsample_train(split: &DatasetSplit, fraction: f64, seed: u64) -> Result<DatasetSplit, CorpusError> {
    check_fraction(fraction)?;
    if split.train.is_empty() {
        return Ok(DatasetSplit {
            fraction,
            ..split.clone()
        });
    }
    let keep = text::ceil_count(fraction, split.train.len());
    let order = shuffled(
        split.train.clone(),
        text::derive_seed(seed, &format!("subsample/{}", split.judge_id)),
    );
    let chosen: BTreeSet<&String> = order[..keep].iter().collect();
    let train = split.train.iter().filter(|id| chosen.contains(id)).cloned().collect();
    Ok(DatasetSplit {
        judge_id: split.judge_id.clone(),
        seed: split.seed,
        fraction: split.fraction * fraction,
        train,
        test: split.test.clone(),
    })
}

/// Splits a document after whitespace token `ceil(fraction * N)`. The prefix
/// ends exactly at that token's last byte, so `prefix + continuation` is the
/// original text.
pub fn make_prefix_task(doc: &VerdictDoc, fraction: f64) -> Result<PrefixTask, CorpusError> {
    check_open_unit("fraction", fraction)?;
    let spans = text::whitespace_spans(&doc.text);
    if spans.len() < 2 {
        return Err(CorpusError::TooShort { tokens: spans.len() });
    }
    let take = text::ceil_count(fraction, spans.len());
    if take >= spans.len() {
        return Err(CorpusError::EmptyContinuation { prefix_tokens: take });
    }
    let cut = spans[take - 1].end;
    Ok(PrefixTask {
        case_id: doc.case_id.clone(),
        prefix: doc.text[..cut].to_string(),
        continuation_reference: doc.text[cut..].to_string(),
        fraction,
    })
}

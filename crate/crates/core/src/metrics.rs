//! Candidate-vs-reference similarity: BLEU, ROUGE-1/2/L, greedy-matching
//! embedding F-score and Jensen-Shannon divergence over POS-tag distributions.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, PosTagging, TokenEmbeddings};
use crate::text::{self, NormalizeOptions};

/// Floor for zero n-gram precisions in sentence BLEU.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("embedding failed: {0}")]
    Embed(#[source] GatewayError),
    #[error("POS tagging failed for every {0} text")]
    AllTaggingFailed(&'static str),
    #[error("distributions have different lengths ({0} vs {1})")]
    Shape(usize, usize),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Qa,
    NextToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub judge_id: String,
    pub task: Task,
    pub item_id: String,
    #[serde(default)]
    pub prompt: String,
    pub reference: String,
    pub candidate: String,
    pub model_tag: String,
    /// Judge whose data the model was personalized to, for cross-judge
    /// analysis. Falls back to the part of `model_tag` after the last `@`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_judge: Option<String>,
}

impl GenerationRecord {
    pub fn resolved_model_judge(&self) -> Option<String> {
        self.model_judge
            .clone()
            .or_else(|| self.model_tag.rsplit_once('@').map(|(_, j)| j.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    R1,
    R2,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub degraded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub bleu: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub embed_f: Option<f64>,
    pub pos_jsd: Option<f64>,
}

fn check_nonempty<'a>(candidate: &'a str, reference: &'a str) -> Result<(Vec<&'a str>, Vec<&'a str>), MetricError> {
    let c = text::tokenize(candidate);
    if c.is_empty() {
        return Err(MetricError::EmptyInput("candidate"));
    }
    let r = text::tokenize(reference);
    if r.is_empty() {
        return Err(MetricError::EmptyInput("reference"));
    }
    Ok((c, r))
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(c: &HashMap<&[&str], usize>, r: &HashMap<&[&str], usize>) -> usize {
    c.iter().map(|(g, n)| (*n).min(r.get(g).copied().unwrap_or(0))).sum()
}

pub(crate) fn bleu_tokens(c: &[&str], r: &[&str]) -> f64 {
    let max_n = BLEU_MAX_ORDER.min(c.len());
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cc = ngram_counts(c, n);
        let rc = ngram_counts(r, n);
        let total = c.len() + 1 - n;
        let p = clipped_overlap(&cc, &rc) as f64 / total as f64;
        log_sum += p.max(BLEU_EPSILON).ln();
    }
    let (cl, rl) = (c.len() as f64, r.len() as f64);
    let bp = if cl < rl { (1.0 - rl / cl).exp() } else { 1.0 };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

/// Sentence-level BLEU on the 0-100 scale: uniform weights over orders
/// `1..=min(4, |candidate|)`, zero precisions floored at [`BLEU_EPSILON`],
/// brevity penalty `exp(1 - r/c)` when the candidate is shorter.
pub fn bleu(candidate: &str, reference: &str) -> Result<f64, MetricError> {
    let (c, r) = check_nonempty(candidate, reference)?;
    Ok(bleu_tokens(&c, &r))
}

fn f1(overlap: f64, c_total: f64, r_total: f64) -> f64 {
    if overlap == 0.0 {
        return 0.0;
    }
    let p = overlap / c_total;
    let r = overlap / r_total;
    2.0 * p * r / (p + r)
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    lcs_len_by(a, b, |x, y| x == y)
}

fn lcs_len_by<T>(a: &[T], b: &[T], eq: impl Fn(&T, &T) -> bool) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if eq(x, y) { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Word tokens are short; an inlined byte loop beats a `memcmp` call per cell.
fn same_token(x: &&str, y: &&str) -> bool {
    x.len() == y.len() && x.bytes().zip(y.bytes()).all(|(p, q)| p == q)
}

/// ROUGE F1 on already tokenized text. [`rouge`] tokenizes and calls this.
pub fn rouge_tokens(c: &[&str], r: &[&str], variant: RougeVariant) -> f64 {
    match variant {
        RougeVariant::L => f1(lcs_len_by(c, r, same_token) as f64, c.len() as f64, r.len() as f64),
        RougeVariant::R1 | RougeVariant::R2 => {
            let n = if variant == RougeVariant::R1 { 1 } else { 2 };
            let cc = ngram_counts(c, n);
            let rc = ngram_counts(r, n);
            let (ct, rt) = (c.len().saturating_sub(n - 1), r.len().saturating_sub(n - 1));
            if ct == 0 || rt == 0 {
                // too short for this order; only an exact match scores
                return if c == r { 1.0 } else { 0.0 };
            }
            f1(clipped_overlap(&cc, &rc) as f64, ct as f64, rt as f64)
        }
    }
}

/// ROUGE F1: n-gram overlap for R1/R2, longest common subsequence for L.
pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> Result<f64, MetricError> {
    let (c, r) = check_nonempty(candidate, reference)?;
    Ok(rouge_tokens(&c, &r, variant))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab / (aa.sqrt() * bb.sqrt())
    }
}

/// Greedy matching over token vectors: each candidate token takes its best
/// reference match (precision) and vice versa (recall). No IDF weighting and
/// no baseline rescaling.
pub fn greedy_match(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<EmbedScore, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::EmptyInput("candidate"));
    }
    if reference.is_empty() {
        return Err(MetricError::EmptyInput("reference"));
    }
    let sims: Vec<Vec<f64>> = candidate
        .iter()
        .map(|c| reference.iter().map(|r| cosine(c, r)).collect())
        .collect();
    let precision = sims
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / candidate.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sims.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    // Cosines can be negative; the harmonic mean is only bounded for
    // non-negative inputs, so a non-positive side scores F = 0.
    let f = if precision <= 0.0 || recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EmbedScore {
        precision,
        recall,
        f,
        degraded: false,
    })
}

pub trait TokenEmbedder: Sync {
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, GatewayError>;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

impl TokenEmbedder for Gateway {
    fn embed_tokens(&self, text: &str) -> Result<TokenEmbeddings, GatewayError> {
        Gateway::embed_tokens(self, text)
    }
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        Gateway::embed_text(self, text)
    }
}

pub trait PosTagger: Sync {
    fn tag(&self, text: &str) -> Result<PosTagging, GatewayError>;
}

impl PosTagger for Gateway {
    fn tag(&self, text: &str) -> Result<PosTagging, GatewayError> {
        self.pos_tag(text)
    }
}

/// Embedding F-score. When the embedder cannot produce token-level vectors
/// the whole-text cosine is used for all three numbers and the result is
/// flagged degraded.
pub fn embed_f(candidate: &str, reference: &str, embedder: &dyn TokenEmbedder) -> Result<EmbedScore, MetricError> {
    if candidate.trim().is_empty() {
        return Err(MetricError::EmptyInput("candidate"));
    }
    if reference.trim().is_empty() {
        return Err(MetricError::EmptyInput("reference"));
    }
    match (embedder.embed_tokens(candidate), embedder.embed_tokens(reference)) {
        (Ok(c), Ok(r)) => greedy_match(&c.vectors, &r.vectors),
        (Err(GatewayError::Capability(msg)), _) | (_, Err(GatewayError::Capability(msg))) => {
            log::debug!("token embeddings unavailable ({msg}); using whole-text cosine");
            let c = embedder.embed_text(candidate).map_err(MetricError::Embed)?;
            let r = embedder.embed_text(reference).map_err(MetricError::Embed)?;
            let s = cosine(&c, &r);
            Ok(EmbedScore {
                precision: s,
                recall: s,
                f: s,
                degraded: true,
            })
        }
        (Err(e), _) | (_, Err(e)) => Err(MetricError::Embed(e)),
    }
}

fn kl_base2(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).log2())
        .sum()
}

/// Jensen-Shannon divergence with base-2 logarithms, in `[0, 1]`. Inputs are
/// non-negative weights over the same support and are normalized here.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, MetricError> {
    if p.len() != q.len() {
        return Err(MetricError::Shape(p.len(), q.len()));
    }
    let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
    if sp <= 0.0 {
        return Err(MetricError::EmptyInput("first distribution"));
    }
    if sq <= 0.0 {
        return Err(MetricError::EmptyInput("second distribution"));
    }
    let p: Vec<f64> = p.iter().map(|x| x / sp).collect();
    let q: Vec<f64> = q.iter().map(|x| x / sq).collect();
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
    Ok((0.5 * kl_base2(&p, &m) + 0.5 * kl_base2(&q, &m)).clamp(0.0, 1.0))
}

pub type TagCounts = BTreeMap<String, u64>;

pub fn count_tags(tagging: &PosTagging, into: &mut TagCounts) {
    for tag in &tagging.tags {
        *into.entry(tag.clone()).or_insert(0) += 1;
    }
}

/// JSD between two tag-count tables over the union of their tagsets.
pub fn jsd_counts(p: &TagCounts, q: &TagCounts) -> Result<f64, MetricError> {
    let mut support: Vec<&String> = p.keys().chain(q.keys()).collect();
    support.sort();
    support.dedup();
    let pv: Vec<f64> = support.iter().map(|t| *p.get(*t).unwrap_or(&0) as f64).collect();
    let qv: Vec<f64> = support.iter().map(|t| *q.get(*t).unwrap_or(&0) as f64).collect();
    jsd(&pv, &qv)
}

fn pooled_counts<S: AsRef<str> + Sync>(
    texts: &[S],
    tagger: &dyn PosTagger,
    side: &'static str,
) -> Result<TagCounts, MetricError> {
    let tagged: Vec<_> = texts.par_iter().map(|t| tagger.tag(t.as_ref())).collect();
    let mut counts = TagCounts::new();
    let mut ok = 0;
    for (i, t) in tagged.iter().enumerate() {
        match t {
            Ok(tagging) => {
                ok += 1;
                count_tags(tagging, &mut counts);
            }
            Err(e) => log::warn!("{side} text {i}: tagging failed, skipped ({e})"),
        }
    }
    if ok == 0 {
        return Err(MetricError::AllTaggingFailed(side));
    }
    if counts.is_empty() {
        return Err(MetricError::EmptyInput(side));
    }
    Ok(counts)
}

/// Pools tag counts per side and returns the JSD of the two unigram
/// distributions. Texts whose tagging fails are skipped.
pub fn pos_jsd<S: AsRef<str> + Sync>(
    candidates: &[S],
    references: &[S],
    tagger: &dyn PosTagger,
) -> Result<f64, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyInput("candidate list"));
    }
    if references.is_empty() {
        return Err(MetricError::EmptyInput("reference list"));
    }
    let p = pooled_counts(candidates, tagger, "candidate")?;
    let q = pooled_counts(references, tagger, "reference")?;
    jsd_counts(&p, &q)
}

#[derive(Clone, Copy, Default)]
pub struct Providers<'a> {
    pub embedder: Option<&'a dyn TokenEmbedder>,
    pub tagger: Option<&'a dyn PosTagger>,
}

/// One row of the per-record scores table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordScore {
    pub record_id: String,
    pub judge_id: String,
    pub task: Task,
    pub model_tag: String,
    pub model_judge: Option<String>,
    pub bleu: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub embed_p: Option<f64>,
    pub embed_r: Option<f64>,
    pub embed_f: Option<f64>,
    pub embed_degraded: bool,
    /// Single-pair POS JSD (candidate vs its own reference).
    pub pos_jsd: Option<f64>,
    pub error: Option<String>,
}

impl RecordScore {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "bleu" => self.bleu,
            "rouge1" => self.rouge1,
            "rouge2" => self.rouge2,
            "rougeL" => self.rouge_l,
            "embed_f" => self.embed_f,
            "pos_jsd" => self.pos_jsd,
            _ => None,
        }
    }
}

/// Per-(task, judge, model) means. `pos_jsd` is computed once on the pooled
/// candidate and reference texts of the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub task: Task,
    pub judge_id: String,
    pub model_tag: String,
    pub model_judge: Option<String>,
    pub n: usize,
    pub failed: usize,
    pub metrics: MetricVector,
    pub embed_degraded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub records: Vec<RecordScore>,
    pub aggregates: Vec<AggregateRow>,
}

struct Scored {
    row: RecordScore,
    cand_tags: Option<TagCounts>,
    ref_tags: Option<TagCounts>,
}

fn score_one(rec: &GenerationRecord, providers: Providers<'_>) -> Scored {
    let mut row = RecordScore {
        record_id: rec.item_id.clone(),
        judge_id: rec.judge_id.clone(),
        task: rec.task,
        model_tag: rec.model_tag.clone(),
        model_judge: rec.resolved_model_judge(),
        bleu: None,
        rouge1: None,
        rouge2: None,
        rouge_l: None,
        embed_p: None,
        embed_r: None,
        embed_f: None,
        embed_degraded: false,
        pos_jsd: None,
        error: None,
    };
    let opts = NormalizeOptions::default();
    let candidate = text::normalize(&rec.candidate, opts);
    let reference = text::normalize(&rec.reference, opts);
    let (c, r) = match check_nonempty(&candidate, &reference) {
        Ok(t) => t,
        Err(e) => {
            row.error = Some(e.to_string());
            return Scored {
                row,
                cand_tags: None,
                ref_tags: None,
            };
        }
    };
    row.bleu = Some(bleu_tokens(&c, &r));
    row.rouge1 = Some(rouge_tokens(&c, &r, RougeVariant::R1));
    row.rouge2 = Some(rouge_tokens(&c, &r, RougeVariant::R2));
    row.rouge_l = Some(rouge_tokens(&c, &r, RougeVariant::L));

    match providers.embedder {
        Some(embedder) => match embed_f(&candidate, &reference, embedder) {
            Ok(s) => {
                row.embed_p = Some(s.precision);
                row.embed_r = Some(s.recall);
                row.embed_f = Some(s.f);
                row.embed_degraded = s.degraded;
            }
            Err(e) => {
                log::warn!("record {}: embedding score failed ({e})", rec.item_id);
                row.embed_degraded = true;
            }
        },
        None => row.embed_degraded = true,
    }

    let (mut cand_tags, mut ref_tags) = (None, None);
    if let Some(tagger) = providers.tagger {
        match (tagger.tag(&candidate), tagger.tag(&reference)) {
            (Ok(ct), Ok(rt)) => {
                let (mut cc, mut rc) = (TagCounts::new(), TagCounts::new());
                count_tags(&ct, &mut cc);
                count_tags(&rt, &mut rc);
                row.pos_jsd = jsd_counts(&cc, &rc).ok();
                cand_tags = Some(cc);
                ref_tags = Some(rc);
            }
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("record {}: tagging failed, skipped for POS-JSD ({e})", rec.item_id)
            }
        }
    }
    Scored {
        row,
        cand_tags,
        ref_tags,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Scores every record (in parallel) and aggregates per (task, judge, model).
/// Failed records keep their row with an `error` and are left out of means.
pub fn score_records(records: &[GenerationRecord], providers: Providers<'_>) -> ScoreTable {
    let scored: Vec<Scored> = records.par_iter().map(|r| score_one(r, providers)).collect();

    type Key = (Task, String, String);
    let mut groups: BTreeMap<Key, Vec<&Scored>> = BTreeMap::new();
    for s in &scored {
        let key = (s.row.task, s.row.judge_id.clone(), s.row.model_tag.clone());
        groups.entry(key).or_default().push(s);
    }
    let aggregates = groups
        .into_iter()
        .map(|((task, judge_id, model_tag), members)| {
            let ok: Vec<&RecordScore> = members.iter().map(|s| &s.row).filter(|r| r.error.is_none()).collect();
            let (mut pc, mut pr) = (TagCounts::new(), TagCounts::new());
            for s in &members {
                if let (Some(c), Some(r)) = (&s.cand_tags, &s.ref_tags) {
                    for (k, v) in c {
                        *pc.entry(k.clone()).or_insert(0) += v;
                    }
                    for (k, v) in r {
                        *pr.entry(k.clone()).or_insert(0) += v;
                    }
                }
            }
            let pooled_jsd = if pc.is_empty() || pr.is_empty() {
                None
            } else {
                jsd_counts(&pc, &pr).ok()
            };
            AggregateRow {
                task,
                judge_id,
                model_tag,
                model_judge: members[0].row.model_judge.clone(),
                n: ok.len(),
                failed: members.len() - ok.len(),
                metrics: MetricVector {
                    bleu: mean(ok.iter().filter_map(|r| r.bleu)).unwrap_or(0.0),
                    rouge1: mean(ok.iter().filter_map(|r| r.rouge1)).unwrap_or(0.0),
                    rouge2: mean(ok.iter().filter_map(|r| r.rouge2)).unwrap_or(0.0),
                    rouge_l: mean(ok.iter().filter_map(|r| r.rouge_l)).unwrap_or(0.0),
                    embed_f: mean(ok.iter().filter_map(|r| r.embed_f)),
                    pos_jsd: pooled_jsd,
                },
                embed_degraded: ok.iter().filter(|r| r.embed_degraded).count(),
            }
        })
        .collect();
    ScoreTable {
        records: scored.into_iter().map(|s| s.row).collect(),
        aggregates,
    }
}

pub fn read_records_jsonl<R: BufRead>(reader: R) -> Result<Vec<GenerationRecord>, MetricError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| MetricError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_scores_csv<W: Write>(out: W, rows: &[RecordScore]) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: std::io::Read>(input: R) -> Result<Vec<RecordScore>, MetricError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

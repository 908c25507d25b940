//! Per-judge authorship discernment: can a binary classifier tell a judge's
//! real reasoning sentences from a negative pool (other judges' sentences,
//! or model generations)? Accuracy near 0.5 means indistinguishable.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gateway::GatewayError;
use crate::retrieval::TextEmbedder;
use crate::text::{self, NormalizeOptions};

pub const DEFAULT_NGRAM_ORDERS: [usize; 3] = [2, 3, 4];
pub const DEFAULT_HASH_BITS: u32 = 18;
pub const MIN_EXAMPLES_PER_CLASS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum DiscernError {
    #[error("text is empty")]
    EmptyText,
    #[error("{class} class has {count} example(s); at least {MIN_EXAMPLES_PER_CLASS} required")]
    TooFewExamples { class: &'static str, count: usize },
    #[error("held-out set is empty")]
    EmptyHeldOut,
    #[error("held-out item {0} was used for training")]
    Overlap(String),
    #[error("feature vector has index {index} beyond model dimension {dimension}")]
    Dimension { index: usize, dimension: usize },
    #[error("embedding featurizer failed: {0}")]
    Embed(#[from] GatewayError),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SentenceSource {
    RealJudge,
    RealOtherJudge,
    Generated { model_tag: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub source: SentenceSource,
}

/// Sparse, sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let (mut i, mut j, mut s) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    s += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        s
    }

    fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, v)| dense[*i as usize] * v)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub vector: SparseVec,
    /// The text was too short to yield any n-gram.
    pub degenerate: bool,
}

pub trait Featurizer: Sync {
    fn dimension(&self) -> usize;
    fn describe(&self) -> String;
    fn featurize(&self, text: &str) -> Result<Features, DiscernError>;
}

/// Hashed character n-grams with term-frequency weights, L2-normalized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramFeaturizer {
    pub orders: Vec<usize>,
    pub hash_bits: u32,
}

impl Default for NgramFeaturizer {
    fn default() -> Self {
        Self {
            orders: DEFAULT_NGRAM_ORDERS.to_vec(),
            hash_bits: DEFAULT_HASH_BITS,
        }
    }
}

fn l2_normalize(map: BTreeMap<u32, f64>) -> SparseVec {
    let norm = map.values().map(|v| v * v).sum::<f64>().sqrt();
    let (indices, values) = map
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(i, v)| (i, if norm > 0.0 { v / norm } else { v }))
        .unzip();
    SparseVec { indices, values }
}

impl Featurizer for NgramFeaturizer {
    fn dimension(&self) -> usize {
        1 << self.hash_bits
    }

    fn describe(&self) -> String {
        format!("char-ngrams{:?}/2^{}", self.orders, self.hash_bits)
    }

    fn featurize(&self, input: &str) -> Result<Features, DiscernError> {
        let normalized = text::normalize(input, NormalizeOptions::default());
        if normalized.is_empty() {
            return Err(DiscernError::EmptyText);
        }
        let chars: Vec<char> = normalized.chars().collect();
        let mask = (1u64 << self.hash_bits) - 1;
        let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
        let mut buf = String::new();
        for &n in &self.orders {
            if n == 0 || chars.len() < n {
                continue;
            }
            for w in chars.windows(n) {
                buf.clear();
                buf.push(char::from(b'0' + (n % 10) as u8));
                buf.push('\u{1f}');
                buf.extend(w);
                let h = (text::fnv1a64(buf.as_bytes()) & mask) as u32;
                *counts.entry(h).or_insert(0.0) += 1.0;
            }
        }
        let degenerate = counts.is_empty();
        Ok(Features {
            vector: l2_normalize(counts),
            degenerate,
        })
    }
}

/// Dense sentence embeddings from a provider, L2-normalized.
pub struct EmbeddingFeaturizer<'a> {
    pub embedder: &'a dyn TextEmbedder,
    pub dimension: usize,
}

impl Featurizer for EmbeddingFeaturizer<'_> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn describe(&self) -> String {
        format!("embedding/{}", self.dimension)
    }

    fn featurize(&self, input: &str) -> Result<Features, DiscernError> {
        if input.trim().is_empty() {
            return Err(DiscernError::EmptyText);
        }
        let v = self.embedder.embed(input)?;
        if v.len() > self.dimension {
            return Err(DiscernError::Dimension {
                index: v.len() - 1,
                dimension: self.dimension,
            });
        }
        let map = v.into_iter().enumerate().map(|(i, x)| (i as u32, x)).collect();
        let vector = l2_normalize(map);
        Ok(Features {
            degenerate: vector.is_empty(),
            vector,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 2.0,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub params: TrainParams,
    pub featurizer: String,
    pub n_positive: usize,
    pub n_negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorshipModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub meta: TrainingMeta,
    train_ids: BTreeSet<String>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl AuthorshipModel {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn train_ids(&self) -> &BTreeSet<String> {
        &self.train_ids
    }

    pub fn probability(&self, x: &SparseVec) -> f64 {
        sigmoid(x.dot_dense(&self.weights) + self.bias)
    }

    pub fn predict(&self, featurizer: &dyn Featurizer, text: &str) -> Result<Label, DiscernError> {
        let f = featurizer.featurize(text)?;
        self.check_dim(&f.vector)?;
        Ok(if self.probability(&f.vector) >= 0.5 {
            Label::Positive
        } else {
            Label::Negative
        })
    }

    fn check_dim(&self, x: &SparseVec) -> Result<(), DiscernError> {
        match x.indices.last() {
            Some(&i) if i as usize >= self.weights.len() => Err(DiscernError::Dimension {
                index: i as usize,
                dimension: self.weights.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// L2-regularized logistic regression, full-batch gradient descent from zero
/// weights with class-balanced example weights. Summation order is fixed, so
/// equal inputs give bit-identical models.
pub fn train(
    featurizer: &dyn Featurizer,
    positives: &[LabeledSentence],
    negatives: &[LabeledSentence],
    seed: u64,
    params: TrainParams,
) -> Result<AuthorshipModel, DiscernError> {
    for (class, count) in [("positive", positives.len()), ("negative", negatives.len())] {
        if count < MIN_EXAMPLES_PER_CLASS {
            return Err(DiscernError::TooFewExamples { class, count });
        }
    }
    let dim = featurizer.dimension();
    let mut data: Vec<(SparseVec, f64, f64)> = Vec::with_capacity(positives.len() + negatives.len());
    let n = (positives.len() + negatives.len()) as f64;
    let w_pos = n / (2.0 * positives.len() as f64);
    let w_neg = n / (2.0 * negatives.len() as f64);
    for (set, y, w) in [(positives, 1.0, w_pos), (negatives, 0.0, w_neg)] {
        for s in set {
            let f = featurizer.featurize(&s.text)?;
            if let Some(&i) = f.vector.indices.last() {
                if i as usize >= dim {
                    return Err(DiscernError::Dimension {
                        index: i as usize,
                        dimension: dim,
                    });
                }
            }
            data.push((f.vector, y, w));
        }
    }
    let active: Vec<u32> = data
        .iter()
        .flat_map(|(x, _, _)| x.indices.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut weights = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut bias = 0.0;
    for _ in 0..params.epochs {
        for &i in &active {
            grad[i as usize] = 0.0;
        }
        let mut grad_b = 0.0;
        for (x, y, w) in &data {
            let p = sigmoid(x.dot_dense(&weights) + bias);
            let g = w * (p - y) / n;
            grad_b += g;
            for (i, v) in x.indices.iter().zip(&x.values) {
                grad[*i as usize] += g * v;
            }
        }
        for &i in &active {
            let i = i as usize;
            weights[i] -= params.learning_rate * (grad[i] + params.l2 * weights[i]);
        }
        bias -= params.learning_rate * grad_b;
    }

    Ok(AuthorshipModel {
        weights,
        bias,
        meta: TrainingMeta {
            seed,
            params,
            featurizer: featurizer.describe(),
            n_positive: positives.len(),
            n_negative: negatives.len(),
        },
        train_ids: positives.iter().chain(negatives).map(|s| s.id.clone()).collect(),
    })
}

/// Accuracy at the 0.5 threshold. Held-out ids must not have been trained on.
pub fn evaluate(
    model: &AuthorshipModel,
    featurizer: &dyn Featurizer,
    held_out: &[LabeledSentence],
) -> Result<f64, DiscernError> {
    if held_out.is_empty() {
        return Err(DiscernError::EmptyHeldOut);
    }
    if let Some(s) = held_out.iter().find(|s| model.train_ids.contains(&s.id)) {
        return Err(DiscernError::Overlap(s.id.clone()));
    }
    let mut correct = 0usize;
    for s in held_out {
        if model.predict(featurizer, &s.text)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / held_out.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingGroup {
    Reference,
    Baseline,
    Retrieval,
    Personalized,
}

impl SettingGroup {
    pub fn heading(self) -> &'static str {
        match self {
            SettingGroup::Reference => "Reference",
            SettingGroup::Baseline => "Non-personalized baselines",
            SettingGroup::Retrieval => "Retrieval-augmented baselines",
            SettingGroup::Personalized => "Personalized models",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscernParams {
    pub test_ratio: f64,
    pub seed: u64,
    pub train: TrainParams,
}

impl Default for DiscernParams {
    fn default() -> Self {
        Self {
            test_ratio: 0.3,
            seed: 0,
            train: TrainParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativePool {
    pub setting: String,
    pub group: SettingGroup,
    pub sentences: Vec<LabeledSentence>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub judge_id: String,
    pub setting: String,
    pub group: SettingGroup,
    pub accuracy: f64,
    pub n_train: usize,
    pub n_test: usize,
}

fn dedup_by_id(items: &[LabeledSentence]) -> Vec<LabeledSentence> {
    let mut seen = HashSet::new();
    let mut out: Vec<_> = items.iter().filter(|s| seen.insert(s.id.clone())).cloned().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn sample(items: &[LabeledSentence], n: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v.truncate(n);
    v
}

/// One classifier per setting with identical hyperparameters. Both classes
/// are sampled down to the smaller pool, then split per class into train and
/// held-out parts.
pub fn run_settings(
    judge_id: &str,
    real: &[LabeledSentence],
    negatives: &[NegativePool],
    featurizer: &dyn Featurizer,
    params: &DiscernParams,
) -> Result<Vec<SettingResult>, DiscernError> {
    let positives = dedup_by_id(real);
    let mut results = Vec::with_capacity(negatives.len());
    for pool in negatives {
        let negs = dedup_by_id(&pool.sentences);
        let n = positives.len().min(negs.len());
        let stream = format!("{judge_id}/{}", pool.setting);
        let pos = sample(&positives, n, text::derive_seed(params.seed, &format!("{stream}/pos")));
        let neg = sample(&negs, n, text::derive_seed(params.seed, &format!("{stream}/neg")));
        let n_test = if n > 1 {
            text::ceil_count(params.test_ratio, n).min(n - 1)
        } else {
            0
        };
        let (pos_test, pos_train) = pos.split_at(n_test);
        let (neg_test, neg_train) = neg.split_at(n_test);
        let model = train(featurizer, pos_train, neg_train, params.seed, params.train)?;
        let held_out: Vec<LabeledSentence> = pos_test.iter().chain(neg_test).cloned().collect();
        let accuracy = evaluate(&model, featurizer, &held_out)?;
        results.push(SettingResult {
            judge_id: judge_id.to_string(),
            setting: pool.setting.clone(),
            group: pool.group,
            accuracy,
            n_train: pos_train.len() + neg_train.len(),
            n_test: held_out.len(),
        });
    }
    Ok(results)
}

/// A line of a sentence file: `{"id", "judge_id", "text"}` plus an optional
/// `model_tag` for generated sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub judge_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_tag: Option<String>,
}

pub fn read_sentences_jsonl<R: BufRead>(reader: R) -> Result<Vec<SentenceRecord>, DiscernError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DiscernError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

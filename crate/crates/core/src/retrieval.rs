//! Judge-scoped exact similarity index over instruction pairs, used to pick
//! in-context examples for retrieval-augmented prompting.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError};
use crate::pipeline::InstructionPair;

/// Number of retrieved examples in the two retrieval-augmented variants.
pub const RAG_K_PRESETS: [usize; 2] = [3, 5];
pub const DEFAULT_RAG_TEMPLATE: &str = include_str!("../prompts/rag_default.txt");
pub const EXAMPLES_PLACEHOLDER: &str = "{examples}";
pub const QUESTION_PLACEHOLDER: &str = "{question}";

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("cannot build an index from zero pairs")]
    Empty,
    #[error("pairs span several judges ({first} and {other})")]
    MixedJudges { first: String, other: String },
    #[error("duplicate pair id {0}")]
    DuplicateId(String),
    #[error("vector for {id} has dimension {got}, index expects {expected}")]
    Dimension { id: String, expected: usize, got: usize },
    #[error("vector for {0} has zero norm")]
    ZeroVector(String),
    #[error("k = {k} outside 1..={len}")]
    BadK { k: usize, len: usize },
    #[error("template lacks placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("embedding failed: {0}")]
    Embed(#[from] GatewayError),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Whole-text embedder used for indexing and querying.
pub trait TextEmbedder: Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

impl TextEmbedder for Gateway {
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.embed_text(text)
    }
}

impl<F> TextEmbedder for F
where
    F: Fn(&str) -> Result<Vec<f64>, GatewayError> + Sync,
{
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        self(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub pair_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairIndex {
    judge_id: String,
    dimension: usize,
    entries: Vec<IndexEntry>,
}

fn unit(id: &str, mut v: Vec<f64>) -> Result<Vec<f64>, RetrievalError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(RetrievalError::ZeroVector(id.to_string()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PairIndex {
    /// Builds an index from raw vectors; each is L2-normalized on insert.
    pub fn from_vectors(
        judge_id: &str,
        vectors: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self, RetrievalError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        let mut dimension = 0;
        for (pair_id, vector) in vectors {
            if entries.is_empty() {
                dimension = vector.len();
            }
            if vector.len() != dimension || dimension == 0 {
                return Err(RetrievalError::Dimension {
                    id: pair_id,
                    expected: dimension,
                    got: vector.len(),
                });
            }
            if !seen.insert(pair_id.clone()) {
                return Err(RetrievalError::DuplicateId(pair_id));
            }
            let vector = unit(&pair_id, vector)?;
            entries.push(IndexEntry { pair_id, vector });
        }
        if entries.is_empty() {
            return Err(RetrievalError::Empty);
        }
        Ok(Self {
            judge_id: judge_id.to_string(),
            dimension,
            entries,
        })
    }

    /// Embeds each pair's question.
    pub fn build(pairs: &[InstructionPair], embedder: &dyn TextEmbedder) -> Result<Self, RetrievalError> {
        let first = pairs.first().ok_or(RetrievalError::Empty)?;
        if let Some(other) = pairs.iter().find(|p| p.judge_id != first.judge_id) {
            return Err(RetrievalError::MixedJudges {
                first: first.judge_id.clone(),
                other: other.judge_id.clone(),
            });
        }
        let vectors = pairs
            .iter()
            .map(|p| Ok((p.pair_id(), embedder.embed(&p.question)?)))
            .collect::<Result<Vec<_>, RetrievalError>>()?;
        Self::from_vectors(&first.judge_id, vectors)
    }

    pub fn judge_id(&self) -> &str {
        &self.judge_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    /// Exact top-k by cosine similarity, descending; ties go to the smaller id.
    pub fn query_vector(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, RetrievalError> {
        if k == 0 || k > self.entries.len() {
            return Err(RetrievalError::BadK {
                k,
                len: self.entries.len(),
            });
        }
        if query.len() != self.dimension {
            return Err(RetrievalError::Dimension {
                id: "<query>".into(),
                expected: self.dimension,
                got: query.len(),
            });
        }
        let q = unit("<query>", query.to_vec())?;
        let mut scored: Vec<(&str, f64)> = self
            .entries
            .iter()
            .map(|e| (e.pair_id.as_str(), dot(&e.vector, &q)))
            .collect();
        let by_rank = |a: &(&str, f64), b: &(&str, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        Ok(scored.into_iter().map(|(id, s)| (id.to_string(), s)).collect())
    }

    pub fn query(
        &self,
        question: &str,
        k: usize,
        embedder: &dyn TextEmbedder,
    ) -> Result<Vec<(String, f64)>, RetrievalError> {
        if k == 0 || k > self.entries.len() {
            return Err(RetrievalError::BadK {
                k,
                len: self.entries.len(),
            });
        }
        self.query_vector(&embedder.embed(question)?, k)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), RetrievalError> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(judge_id: &str, reader: R) -> Result<Self, RetrievalError> {
        let mut vectors = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: IndexEntry = serde_json::from_str(&line).map_err(|e| RetrievalError::BadRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
            vectors.push((e.pair_id, e.vector));
        }
        Self::from_vectors(judge_id, vectors)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RagPrompt {
    pub text: String,
    pub example_count: usize,
    pub char_len: usize,
}

/// Fills `{examples}` with one block per retrieved pair (in retrieval order)
/// and `{question}` with the input question.
pub fn build_rag_prompt(
    question: &str,
    retrieved: &[InstructionPair],
    template: &str,
) -> Result<RagPrompt, RetrievalError> {
    if !template.contains(EXAMPLES_PLACEHOLDER) {
        return Err(RetrievalError::MissingPlaceholder(EXAMPLES_PLACEHOLDER));
    }
    if !template.contains(QUESTION_PLACEHOLDER) {
        return Err(RetrievalError::MissingPlaceholder(QUESTION_PLACEHOLDER));
    }
    let examples: String = retrieved
        .iter()
        .map(|p| format!("שאלה: {}\nתשובה: {}\n\n", p.question, p.answer))
        .collect();
    let text = template
        .replace(EXAMPLES_PLACEHOLDER, &examples)
        .replace(QUESTION_PLACEHOLDER, question);
    Ok(RagPrompt {
        char_len: text.chars().count(),
        text,
        example_count: retrieved.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(judge: &str, idx: usize, q: &str) -> InstructionPair {
        InstructionPair {
            judge_id: judge.into(),
            case_id: "c".into(),
            sentence_idx: idx,
            question: q.into(),
            answer: format!("answer {idx}"),
            stage_log: vec![],
            prompt_hash: "h".into(),
        }
    }

    #[test]
    fn orthogonal_fixture_retrieves_planted_vector() {
        let idx = PairIndex::from_vectors(
            "J",
            vec![
                ("p1".to_string(), vec![1.0, 0.0, 0.0]),
                ("p2".to_string(), vec![0.0, 1.0, 0.0]),
                ("p3".to_string(), vec![0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let hits = idx.query_vector(&[0.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(hits, vec![("p2".to_string(), 1.0)]);
        let all = idx.query_vector(&[0.0, 1.0, 0.0], 3).unwrap();
        assert_eq!(all.len(), 3);
        assert_eq!(all[1].0, "p1");
        assert_eq!(all[2].0, "p3");
    }

    #[test]
    fn k_out_of_range_and_bad_vectors() {
        let idx = PairIndex::from_vectors("J", vec![("a".to_string(), vec![1.0, 2.0])]).unwrap();
        assert!(matches!(
            idx.query_vector(&[1.0, 0.0], 0),
            Err(RetrievalError::BadK { .. })
        ));
        assert!(matches!(
            idx.query_vector(&[1.0, 0.0], 2),
            Err(RetrievalError::BadK { .. })
        ));
        assert!(PairIndex::from_vectors("J", vec![("a".to_string(), vec![0.0])]).is_err());
        assert!(
            PairIndex::from_vectors("J", vec![("a".to_string(), vec![1.0]), ("a".to_string(), vec![1.0])]).is_err()
        );
        assert!(PairIndex::from_vectors(
            "J",
            vec![("a".to_string(), vec![1.0]), ("b".to_string(), vec![1.0, 1.0])]
        )
        .is_err());
    }

    #[test]
    fn build_embeds_questions_and_rejects_mixed_judges() {
        let embed = |t: &str| -> Result<Vec<f64>, GatewayError> { Ok(vec![t.len() as f64, 1.0]) };
        let pairs: Vec<_> = (0..5).map(|i| pair("J", i, &"q".repeat(i + 1))).collect();
        let idx = PairIndex::build(&pairs, &embed).unwrap();
        assert_eq!(idx.len(), 5);
        let top = idx.query("qqq", 1, &embed).unwrap();
        assert_eq!(top[0].0, "c#2");
        assert!((top[0].1 - 1.0).abs() < 1e-12);
        let mixed = vec![pair("J", 0, "a"), pair("K", 1, "b")];
        assert!(matches!(
            PairIndex::build(&mixed, &embed),
            Err(RetrievalError::MixedJudges { .. })
        ));
        assert!(matches!(PairIndex::build(&[], &embed), Err(RetrievalError::Empty)));
    }

    #[test]
    fn ties_break_by_id() {
        let idx = PairIndex::from_vectors(
            "J",
            vec![("b".to_string(), vec![1.0, 0.0]), ("a".to_string(), vec![2.0, 0.0])],
        )
        .unwrap();
        let hits = idx.query_vector(&[1.0, 0.0], 2).unwrap();
        assert_eq!(hits[0].0, "a");
        assert_eq!(hits[1].0, "b");
    }

    #[test]
    fn jsonl_roundtrip() {
        let idx = PairIndex::from_vectors(
            "J",
            vec![("a".to_string(), vec![3.0, 4.0]), ("b".to_string(), vec![0.0, 1.0])],
        )
        .unwrap();
        let mut buf = Vec::new();
        idx.write_jsonl(&mut buf).unwrap();
        let back = PairIndex::read_jsonl("J", buf.as_slice()).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn rag_prompt_blocks_in_order() {
        let none = build_rag_prompt("מהו?", &[], DEFAULT_RAG_TEMPLATE).unwrap();
        assert_eq!(none.text, "שאלה: מהו?\nתשובה:\n");
        assert_eq!(none.example_count, 0);
        let retrieved = vec![pair("J", 2, "q2"), pair("J", 0, "q0"), pair("J", 1, "q1")];
        let p = build_rag_prompt("x", &retrieved, DEFAULT_RAG_TEMPLATE).unwrap();
        assert_eq!(p.example_count, 3);
        let i2 = p.text.find("q2").unwrap();
        let i0 = p.text.find("q0").unwrap();
        let i1 = p.text.find("q1").unwrap();
        assert!(i2 < i0 && i0 < i1);
        assert_eq!(p.char_len, p.text.chars().count());
        assert!(matches!(
            build_rag_prompt("x", &[], "{question}"),
            Err(RetrievalError::MissingPlaceholder("{examples}"))
        ));
        assert!(build_rag_prompt("x", &[], "{examples}").is_err());
        assert_eq!(RAG_K_PRESETS, [3, 5]);
    }
}

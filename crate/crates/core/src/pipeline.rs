//! Four-stage agentic workflow turning verdicts into question/answer pairs:
//!
//! 1. extract reasoning sentences (extractor model),
//! 2. validate that each sentence carries judicial reasoning (validator),
//! 3. generate one question per sentence (extractor model),
//! 4. validate that the sentence answers the question (validator). A failed
//!    check regenerates the question once; a second failure discards the pair.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{JudgeItem, VerdictDoc};
use crate::gateway::{self, ChatRequest, Gateway, GatewayError};
use crate::text::{self, NormalizeOptions};

pub const MAX_QUESTION_WORDS: usize = 25;
const AFFIRMATIVE: &str = "כן";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{stage}: unparseable response after reprompt: {excerpt}")]
    Unparseable { stage: Stage, excerpt: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extract,
    ValidateReasoning,
    GenerateQuestion,
    ValidatePair,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::ValidateReasoning => "validate_reasoning",
            Stage::GenerateQuestion => "generate_question",
            Stage::ValidatePair => "validate_pair",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: Stage,
    pub verdict: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningSentence {
    pub judge_id: String,
    pub case_id: String,
    pub sentence: String,
    pub sentence_idx: usize,
    pub extraction_model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub judge_id: String,
    pub case_id: String,
    pub sentence_idx: usize,
    pub question: String,
    pub answer: String,
    pub stage_log: Vec<StageEntry>,
    pub prompt_hash: String,
}

impl InstructionPair {
    pub fn pair_id(&self) -> String {
        format!("{}#{}", self.case_id, self.sentence_idx)
    }
}

impl JudgeItem for InstructionPair {
    fn judge_id(&self) -> &str {
        &self.judge_id
    }
    fn item_id(&self) -> String {
        self.pair_id()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub extracted: usize,
    pub reasoning_valid: usize,
    pub questions_generated: usize,
    pub pairs_valid: usize,
    pub discarded: usize,
    /// Sentences dropped because they were not found verbatim in the source.
    pub non_verbatim: usize,
    /// Valid sentences for which no question could be parsed.
    pub question_failures: usize,
    pub docs_skipped: usize,
}

impl StageCounts {
    fn add(&mut self, other: &StageCounts) {
        self.extracted += other.extracted;
        self.reasoning_valid += other.reasoning_valid;
        self.questions_generated += other.questions_generated;
        self.pairs_valid += other.pairs_valid;
        self.discarded += other.discarded;
        self.non_verbatim += other.non_verbatim;
        self.question_failures += other.question_failures;
        self.docs_skipped += other.docs_skipped;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub judge_id: String,
    pub case_id: String,
    pub sentence_idx: Option<usize>,
    pub stage: Stage,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub totals: StageCounts,
    pub per_judge: BTreeMap<String, StageCounts>,
    pub failures: Vec<StageFailure>,
    pub prompt_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl StageModel {
    pub fn extractor() -> Self {
        Self {
            model: gateway::DEFAULT_EXTRACTOR_MODEL.into(),
            temperature: gateway::DEFAULT_EXTRACTOR_TEMPERATURE,
            max_tokens: gateway::DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validator() -> Self {
        Self {
            model: gateway::DEFAULT_VALIDATOR_MODEL.into(),
            temperature: gateway::DEFAULT_VALIDATOR_TEMPERATURE,
            max_tokens: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub extractor: StageModel,
    pub validator: StageModel,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extractor: StageModel::extractor(),
            validator: StageModel::validator(),
            workers: gateway::DEFAULT_MAX_IN_FLIGHT,
        }
    }
}

/// Stage prompts. The defaults are shipped as versioned text assets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompts {
    pub extract: String,
    pub validate_reasoning: String,
    pub generate_question: String,
    pub validate_pair: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            extract: include_str!("../prompts/step1_extract.txt").into(),
            validate_reasoning: include_str!("../prompts/step2_validate_reasoning.txt").into(),
            generate_question: include_str!("../prompts/step3_generate_question.txt").into(),
            validate_pair: include_str!("../prompts/step4_validate_pair.txt").into(),
        }
    }
}

impl Prompts {
    /// First 16 hex digits of SHA-256 over the four prompts.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for p in [
            &self.extract,
            &self.validate_reasoning,
            &self.generate_question,
            &self.validate_pair,
        ] {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub sentences: Vec<ReasoningSentence>,
    pub non_verbatim: usize,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub accepted: bool,
    pub raw: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedQuestion {
    pub question: String,
    pub warnings: Vec<String>,
    pub attempts: u32,
}

fn excerpt(s: &str) -> String {
    s.chars().take(120).collect()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Accepts a bare JSON array of strings, or an object holding one (under
/// the prompt's key or any single array-valued key). Code fences and prose
/// around the JSON are tolerated.
pub fn parse_sentence_list(response: &str) -> Option<Vec<String>> {
    fn from_value(v: serde_json::Value) -> Option<Vec<String>> {
        match v {
            serde_json::Value::Array(items) => items.into_iter().map(|i| i.as_str().map(str::to_string)).collect(),
            serde_json::Value::Object(mut map) => {
                if let Some(v) = map.remove("משפטים") {
                    return from_value(v);
                }
                let arrays: Vec<_> = map.into_iter().filter(|(_, v)| v.is_array()).collect();
                match arrays.len() {
                    1 => from_value(arrays.into_iter().next()?.1),
                    _ => None,
                }
            }
            _ => None,
        }
    }
    let trimmed = response.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return from_value(v);
    }
    let start = trimmed.find(['[', '{'])?;
    let end = trimmed.rfind([']', '}'])?;
    if end <= start {
        return None;
    }
    serde_json::from_str(&trimmed[start..=end]).ok().and_then(from_value)
}

fn strip_quotes(s: &str) -> &str {
    s.trim()
        .trim_matches(|c: char| matches!(c, '"' | '\'' | '״' | '׳' | '`' | '“' | '”'))
        .trim_end_matches('.')
        .trim()
}

pub fn is_affirmative(response: &str) -> bool {
    strip_quotes(response) == AFFIRMATIVE
}

pub fn is_pair_accepted(response: &str) -> bool {
    strip_quotes(response) == "1"
}

/// Takes the first line of the form `N. text` or `N) text`, without the number.
pub fn parse_numbered_line(response: &str) -> Option<(String, usize)> {
    let mut found = None;
    let mut numbered = 0;
    for line in response.lines() {
        let line = line.trim();
        let digits = line.chars().take_while(char::is_ascii_digit).count();
        if digits == 0 {
            continue;
        }
        let rest = &line[digits..];
        let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) else {
            continue;
        };
        let body = rest.trim();
        if body.is_empty() {
            continue;
        }
        numbered += 1;
        if found.is_none() {
            found = Some(body.to_string());
        }
    }
    found.map(|q| (q, numbered))
}

pub struct QaPipeline<'g> {
    gateway: &'g Gateway,
    config: PipelineConfig,
    prompts: Prompts,
    prompt_hash: String,
}

impl<'g> QaPipeline<'g> {
    pub fn new(gateway: &'g Gateway, config: PipelineConfig) -> Self {
        Self::with_prompts(gateway, config, Prompts::default())
    }

    pub fn with_prompts(gateway: &'g Gateway, config: PipelineConfig, prompts: Prompts) -> Self {
        let prompt_hash = prompts.hash();
        Self {
            gateway,
            config,
            prompts,
            prompt_hash,
        }
    }

    pub fn prompt_hash(&self) -> &str {
        &self.prompt_hash
    }

    fn ask(
        &self,
        stage: Stage,
        settings: &StageModel,
        system: &str,
        user: String,
        nonce: u32,
    ) -> Result<String, GatewayError> {
        let req = ChatRequest {
            model_tag: settings.model.clone(),
            system_prompt: system.to_string(),
            user_prompt: user,
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
            nonce,
            purpose: stage.as_str().to_string(),
        };
        Ok(self.gateway.complete(&req)?.text)
    }

    /// Step 1. Sentences not found verbatim in the document are dropped and
    /// counted; exact duplicates are kept once.
    pub fn extract_reasoning(&self, doc: &VerdictDoc) -> Result<Extraction, PipelineError> {
        let mut last = String::new();
        for nonce in 0..2u32 {
            let response = self.ask(
                Stage::Extract,
                &self.config.extractor,
                &self.prompts.extract,
                doc.text.clone(),
                nonce,
            )?;
            let Some(raw) = parse_sentence_list(&response) else {
                log::warn!("case {}: unparseable extraction (attempt {})", doc.case_id, nonce + 1);
                last = response;
                continue;
            };
            let haystack = collapse_ws(&doc.text);
            let mut seen = HashSet::new();
            let mut sentences = Vec::new();
            let mut non_verbatim = 0;
            for s in raw {
                let s = text::normalize(&s, NormalizeOptions::default());
                if s.is_empty() || !haystack.contains(&collapse_ws(&s)) {
                    non_verbatim += 1;
                    continue;
                }
                if !seen.insert(s.clone()) {
                    continue;
                }
                sentences.push(ReasoningSentence {
                    judge_id: doc.judge_id.clone(),
                    case_id: doc.case_id.clone(),
                    sentence: s,
                    sentence_idx: sentences.len(),
                    extraction_model: self.config.extractor.model.clone(),
                });
            }
            return Ok(Extraction {
                sentences,
                non_verbatim,
                attempts: nonce + 1,
            });
        }
        Err(PipelineError::Unparseable {
            stage: Stage::Extract,
            excerpt: excerpt(&last),
        })
    }

    /// Step 2. Anything other than the affirmative token counts as "no";
    /// an empty answer is asked once more.
    pub fn validate_reasoning(&self, s: &ReasoningSentence) -> Result<Verdict, PipelineError> {
        let mut raw = String::new();
        for nonce in 0..2u32 {
            raw = self.ask(
                Stage::ValidateReasoning,
                &self.config.validator,
                &self.prompts.validate_reasoning,
                s.sentence.clone(),
                nonce,
            )?;
            if !raw.trim().is_empty() {
                return Ok(Verdict {
                    accepted: is_affirmative(&raw),
                    raw: raw.trim().to_string(),
                    attempts: nonce + 1,
                });
            }
        }
        Ok(Verdict {
            accepted: false,
            raw,
            attempts: 2,
        })
    }

    /// Step 3. `round` is 0 for the first question and 1 for the regeneration
    /// after a failed pair check; each round may reprompt once.
    pub fn generate_question(
        &self,
        s: &ReasoningSentence,
        round: u32,
    ) -> Result<Option<GeneratedQuestion>, PipelineError> {
        let user = format!("1. Answer: {}", s.sentence);
        for retry in 0..2u32 {
            let response = self.ask(
                Stage::GenerateQuestion,
                &self.config.extractor,
                &self.prompts.generate_question,
                user.clone(),
                2 * round + retry,
            )?;
            if let Some((question, numbered)) = parse_numbered_line(&response) {
                let mut warnings = Vec::new();
                let extra_lines = response.lines().filter(|l| !l.trim().is_empty()).count();
                if numbered > 1 || extra_lines > 1 {
                    warnings.push(format!("{extra_lines} lines returned; kept the first numbered one"));
                }
                let words = question.split_whitespace().count();
                if words > MAX_QUESTION_WORDS {
                    warnings.push(format!("question has {words} words (limit {MAX_QUESTION_WORDS})"));
                }
                for w in &warnings {
                    log::warn!("case {} sentence {}: {w}", s.case_id, s.sentence_idx);
                }
                return Ok(Some(GeneratedQuestion {
                    question,
                    warnings,
                    attempts: retry + 1,
                }));
            }
        }
        log::warn!(
            "case {} sentence {}: no question parsed after reprompt",
            s.case_id,
            s.sentence_idx
        );
        Ok(None)
    }

    /// Step 4, one attempt. `attempt` is 1 or 2.
    pub fn validate_pair(&self, question: &str, answer: &str, attempt: u32) -> Result<Verdict, PipelineError> {
        let raw = self.ask(
            Stage::ValidatePair,
            &self.config.validator,
            &self.prompts.validate_pair,
            format!("שאלה: {question}\nתשובה: {answer}"),
            attempt.saturating_sub(1),
        )?;
        Ok(Verdict {
            accepted: is_pair_accepted(&raw),
            raw: raw.trim().to_string(),
            attempts: attempt,
        })
    }

    fn process_sentence(
        &self,
        s: &ReasoningSentence,
        mut log_entries: Vec<StageEntry>,
        counts: &mut StageCounts,
    ) -> Result<Option<InstructionPair>, PipelineError> {
        let verdict = self.validate_reasoning(s)?;
        log_entries.push(StageEntry {
            stage: Stage::ValidateReasoning,
            verdict: if verdict.accepted { "yes" } else { "no" }.into(),
            attempt: verdict.attempts,
        });
        if !verdict.accepted {
            return Ok(None);
        }
        counts.reasoning_valid += 1;

        let Some(first) = self.generate_question(s, 0)? else {
            counts.question_failures += 1;
            return Ok(None);
        };
        counts.questions_generated += 1;
        log_entries.push(StageEntry {
            stage: Stage::GenerateQuestion,
            verdict: "ok".into(),
            attempt: 1,
        });

        let outcome = (|| -> Result<Option<String>, PipelineError> {
            let check = self.validate_pair(&first.question, &s.sentence, 1)?;
            log_entries.push(StageEntry {
                stage: Stage::ValidatePair,
                verdict: if check.accepted { "pass" } else { "fail" }.into(),
                attempt: 1,
            });
            if check.accepted {
                return Ok(Some(first.question.clone()));
            }
            let Some(second) = self.generate_question(s, 1)? else {
                log_entries.push(StageEntry {
                    stage: Stage::GenerateQuestion,
                    verdict: "unparseable".into(),
                    attempt: 2,
                });
                return Ok(None);
            };
            log_entries.push(StageEntry {
                stage: Stage::GenerateQuestion,
                verdict: "ok".into(),
                attempt: 2,
            });
            let check = self.validate_pair(&second.question, &s.sentence, 2)?;
            log_entries.push(StageEntry {
                stage: Stage::ValidatePair,
                verdict: if check.accepted { "pass" } else { "fail" }.into(),
                attempt: 2,
            });
            Ok(check.accepted.then_some(second.question))
        })();

        match outcome {
            Ok(Some(question)) => {
                counts.pairs_valid += 1;
                Ok(Some(InstructionPair {
                    judge_id: s.judge_id.clone(),
                    case_id: s.case_id.clone(),
                    sentence_idx: s.sentence_idx,
                    question,
                    answer: s.sentence.clone(),
                    stage_log: log_entries,
                    prompt_hash: self.prompt_hash.clone(),
                }))
            }
            Ok(None) => {
                counts.discarded += 1;
                Ok(None)
            }
            Err(e) => {
                counts.discarded += 1;
                Err(e)
            }
        }
    }

    fn process_doc(&self, doc: &VerdictDoc) -> (Vec<InstructionPair>, StageCounts, Vec<StageFailure>) {
        let mut counts = StageCounts::default();
        let mut failures = Vec::new();
        let extraction = match self.extract_reasoning(doc) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("case {}: skipped ({e})", doc.case_id);
                counts.docs_skipped += 1;
                failures.push(StageFailure {
                    judge_id: doc.judge_id.clone(),
                    case_id: doc.case_id.clone(),
                    sentence_idx: None,
                    stage: Stage::Extract,
                    message: e.to_string(),
                });
                return (Vec::new(), counts, failures);
            }
        };
        counts.extracted += extraction.sentences.len();
        counts.non_verbatim += extraction.non_verbatim;
        let mut pairs = Vec::new();
        for s in &extraction.sentences {
            let entries = vec![StageEntry {
                stage: Stage::Extract,
                verdict: "ok".into(),
                attempt: extraction.attempts,
            }];
            match self.process_sentence(s, entries, &mut counts) {
                Ok(Some(pair)) => pairs.push(pair),
                Ok(None) => {}
                Err(e) => {
                    log::warn!("case {} sentence {}: {e}", s.case_id, s.sentence_idx);
                    failures.push(StageFailure {
                        judge_id: s.judge_id.clone(),
                        case_id: s.case_id.clone(),
                        sentence_idx: Some(s.sentence_idx),
                        stage: Stage::ValidatePair,
                        message: e.to_string(),
                    });
                }
            }
        }
        (pairs, counts, failures)
    }

    pub fn run(&self, docs: &[VerdictDoc]) -> (Vec<InstructionPair>, PipelineReport) {
        self.run_with_progress(docs, |_| {})
    }

    /// Processes documents in parallel (bounded by `workers`). Output order is
    /// canonical: by case id, then sentence index, then judge id.
    pub fn run_with_progress<F>(&self, docs: &[VerdictDoc], progress: F) -> (Vec<InstructionPair>, PipelineReport)
    where
        F: Fn(&StageCounts) + Sync,
    {
        let running = std::sync::Mutex::new(StageCounts::default());
        let work = || {
            docs.par_iter()
                .map(|doc| {
                    let out = self.process_doc(doc);
                    let mut total = running.lock().unwrap_or_else(|e| e.into_inner());
                    total.add(&out.1);
                    progress(&total);
                    (doc.judge_id.clone(), out)
                })
                .collect::<Vec<_>>()
        };
        let results = match rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers.max(1))
            .build()
        {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        };

        let mut report = PipelineReport {
            prompt_hash: self.prompt_hash.clone(),
            ..PipelineReport::default()
        };
        let mut pairs = Vec::new();
        for (judge, (p, counts, failures)) in results {
            report.totals.add(&counts);
            report.per_judge.entry(judge).or_default().add(&counts);
            report.failures.extend(failures);
            pairs.extend(p);
        }
        pairs.sort_by(|a, b| (&a.case_id, a.sentence_idx, &a.judge_id).cmp(&(&b.case_id, b.sentence_idx, &b.judge_id)));
        report
            .failures
            .sort_by(|a, b| (&a.case_id, a.sentence_idx, &a.judge_id).cmp(&(&b.case_id, b.sentence_idx, &b.judge_id)));
        (pairs, report)
    }
}

pub fn write_pairs_jsonl<W: Write>(mut out: W, pairs: &[InstructionPair]) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_pairs_jsonl<R: BufRead>(reader: R) -> Result<Vec<InstructionPair>, PipelineError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(&line).map_err(|e| PipelineError::BadRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

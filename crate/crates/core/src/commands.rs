use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use judgebench::config::{FeaturizerKind, RunConfig};
use judgebench::corpus::{self, CorpusError, DatasetSplit, PrefixTask, VerdictDoc};
use judgebench::discernment::{
    self, DiscernError, EmbeddingFeaturizer, Featurizer, Label, LabeledSentence, NegativePool, SentenceRecord,
    SentenceSource, SettingGroup, SettingResult,
};
use judgebench::gateway::{Gateway, GatewayError, HttpEndpoints, HttpTransport, MockTransport, Transport};
use judgebench::metrics::{self, MetricError, Providers, Task};
use judgebench::pipeline::{self, InstructionPair, PipelineReport, QaPipeline, StageCounts};
use judgebench::report::{self, ReportError};
use judgebench::retrieval::{self, PairIndex, RetrievalError, DEFAULT_RAG_TEMPLATE};
use judgebench::text::NormalizeOptions;

/// Exit-code classes: 1 usage, 2 data, 3 provider.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Provider(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Provider(_) => 3,
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Cache(_) => Failure::Data(e.to_string()),
            _ => Failure::Provider(e.to_string()),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Embed(g) => g.into(),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<RetrievalError> for Failure {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::Embed(g) => g.into(),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<DiscernError> for Failure {
    fn from(e: DiscernError) -> Self {
        match e {
            DiscernError::Embed(g) => g.into(),
            other => Failure::Data(other.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut out, r).map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

/// Opens an input named on the command line; a missing file is a usage error.
fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("input file {} does not exist", path.display())));
    }
    Ok(BufReader::new(File::open(path).map_err(|e| io_err(path, e))?))
}

fn corpus_path(cfg: &RunConfig) -> Result<&Path, Failure> {
    let path = cfg
        .corpus
        .path
        .as_deref()
        .ok_or_else(|| Failure::Usage("no corpus given; set corpus.path or pass --corpus".into()))?;
    if !path.is_file() {
        return Err(Failure::Usage(format!("corpus {} does not exist", path.display())));
    }
    Ok(path)
}

fn load_filtered(cfg: &RunConfig) -> Result<(Vec<VerdictDoc>, Vec<corpus::JudgeProfile>, usize), Failure> {
    let path = corpus_path(cfg)?;
    let opts = NormalizeOptions {
        strip_niqqud: cfg.corpus.strip_niqqud,
    };
    let docs = corpus::load_corpus(path, opts)?;
    let (kept, profiles) = corpus::filter_judges(&docs, cfg.corpus.min_docs);
    Ok((kept, profiles, docs.len()))
}

/// The configured provider, if any. The mock takes precedence over HTTP.
fn build_gateway(cfg: &RunConfig) -> Result<Option<Gateway>, Failure> {
    let p = &cfg.provider;
    let transport: Arc<dyn Transport> = if let Some(script) = &p.mock {
        if !script.is_file() {
            return Err(Failure::Usage(format!(
                "mock provider script {} does not exist",
                script.display()
            )));
        }
        Arc::new(MockTransport::from_path(script).map_err(Failure::Usage)?)
    } else if p.is_configured() {
        let api_key = std::env::var(&p.api_key_env).ok();
        if api_key.is_none() {
            log::warn!("{} is not set; requests are sent without credentials", p.api_key_env);
        }
        let endpoints = HttpEndpoints {
            chat: p.chat_url.clone(),
            embed: p.embed_url.clone(),
            pos: p.pos_url.clone(),
        };
        Arc::new(
            HttpTransport::new(endpoints, api_key, Duration::from_secs(p.timeout_secs))
                .map_err(|e| Failure::Provider(e.to_string()))?,
        )
    } else {
        return Ok(None);
    };
    Ok(Some(Gateway::new(transport, p.gateway_options())?))
}

fn require_gateway(cfg: &RunConfig) -> Result<Gateway, Failure> {
    build_gateway(cfg)?
        .ok_or_else(|| Failure::Usage("no provider configured; pass --mock-provider or set provider endpoints".into()))
}

fn finish_gateway(cfg: &RunConfig, gw: &Gateway) -> Result<(), Failure> {
    let stats = gw.stats();
    log::info!(
        "provider: {} network attempt(s), {} cache hit(s)",
        stats.network_attempts,
        stats.cache_hits
    );
    write_json(
        &cfg.out_dir.join("gateway_stats.json"),
        &serde_json::json!({
            "network_attempts": stats.network_attempts,
            "cache_hits": stats.cache_hits,
        }),
    )
}

#[derive(Serialize)]
struct SplitSize<'a> {
    judge_id: &'a str,
    train: usize,
    test: usize,
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    documents: usize,
    judges_total: usize,
    judges_retained: Vec<&'a str>,
    judges_dropped: Vec<&'a str>,
    min_docs: usize,
    splits: Vec<SplitSize<'a>>,
    next_token_tasks: usize,
}

#[derive(Serialize)]
struct NextTokenTask<'a> {
    judge_id: &'a str,
    #[serde(flatten)]
    task: PrefixTask,
}

pub fn ingest(cfg: &RunConfig) -> Result<(), Failure> {
    let (kept, profiles, total) = load_filtered(cfg)?;
    let splits = corpus::split_per_judge(&kept, cfg.corpus.test_ratio, cfg.seed)?;
    let retained: BTreeSet<&str> = splits.iter().map(|s| s.judge_id.as_str()).collect();
    if retained.is_empty() {
        log::warn!("no judge has at least {} documents", cfg.corpus.min_docs);
    }

    let by_key: BTreeMap<(&str, &str), &VerdictDoc> = kept
        .iter()
        .map(|d| ((d.judge_id.as_str(), d.case_id.as_str()), d))
        .collect();
    let mut tasks = Vec::new();
    for split in &splits {
        for case in &split.test {
            let doc = by_key[&(split.judge_id.as_str(), case.as_str())];
            match corpus::make_prefix_task(doc, cfg.corpus.prefix_fraction) {
                Ok(task) => tasks.push(NextTokenTask {
                    judge_id: &split.judge_id,
                    task,
                }),
                Err(e) => log::warn!("{}/{}: no next-token task ({e})", split.judge_id, case),
            }
        }
    }

    let summary = IngestSummary {
        documents: total,
        judges_total: profiles.len(),
        judges_retained: retained.iter().copied().collect(),
        judges_dropped: profiles
            .iter()
            .map(|p| p.judge_id.as_str())
            .filter(|j| !retained.contains(j))
            .collect(),
        min_docs: cfg.corpus.min_docs,
        splits: splits
            .iter()
            .map(|s| SplitSize {
                judge_id: &s.judge_id,
                train: s.train.len(),
                test: s.test.len(),
            })
            .collect(),
        next_token_tasks: tasks.len(),
    };
    write_json(&cfg.out_dir.join("profiles.json"), &profiles)?;
    write_json(&cfg.out_dir.join("splits.json"), &splits)?;
    write_jsonl(&cfg.out_dir.join("next_token_tasks.jsonl"), &tasks)?;
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    log::info!(
        "ingest: {} document(s), {} of {} judge(s) retained",
        total,
        summary.judges_retained.len(),
        summary.judges_total
    );
    println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
    Ok(())
}

fn progress_line(c: &StageCounts) {
    eprint!(
        "\rextracted {} | reasoning valid {} | questions {} | pairs {} | discarded {}   ",
        c.extracted, c.reasoning_valid, c.questions_generated, c.pairs_valid, c.discarded
    );
}

#[derive(Serialize)]
struct RagRecord<'a> {
    judge_id: &'a str,
    pair_id: String,
    k: usize,
    retrieved: Vec<String>,
    prompt: String,
    example_count: usize,
    char_len: usize,
    reference: &'a str,
}

/// Retrieval-augmented prompts for each test pair, drawing examples from the
/// judge's own training pairs. `None` when the provider cannot embed text.
fn rag_prompts<'a>(
    cfg: &RunConfig,
    gw: &Gateway,
    pairs: &'a [InstructionPair],
    splits: &[DatasetSplit],
) -> Result<Option<Vec<RagRecord<'a>>>, Failure> {
    let template = match &cfg.retrieval.template {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => DEFAULT_RAG_TEMPLATE.to_string(),
    };
    let by_id: BTreeMap<String, &InstructionPair> = pairs.iter().map(|p| (p.pair_id(), p)).collect();
    let mut out = Vec::new();
    for split in splits {
        let train: Vec<InstructionPair> = split
            .train
            .iter()
            .filter_map(|id| by_id.get(id).map(|p| (*p).clone()))
            .filter(|p| p.judge_id == split.judge_id)
            .collect();
        if train.is_empty() {
            continue;
        }
        let index = match PairIndex::build(&train, gw) {
            Ok(i) => i,
            Err(RetrievalError::Embed(GatewayError::Capability(msg))) => {
                log::warn!("retrieval prompts skipped: {msg}");
                return Ok(None);
            }
            Err(e) => return Err(e.into()),
        };
        let train_by_id: BTreeMap<String, &InstructionPair> = train.iter().map(|p| (p.pair_id(), p)).collect();
        for id in &split.test {
            let Some(pair) = by_id.get(id).filter(|p| p.judge_id == split.judge_id) else {
                continue;
            };
            for &k in &cfg.retrieval.k_values {
                let k = k.min(index.len());
                let hits = index.query(&pair.question, k, gw)?;
                let examples: Vec<InstructionPair> = hits.iter().map(|(id, _)| train_by_id[id].clone()).collect();
                let prompt = retrieval::build_rag_prompt(&pair.question, &examples, &template)?;
                out.push(RagRecord {
                    judge_id: &pair.judge_id,
                    pair_id: pair.pair_id(),
                    k,
                    retrieved: hits.into_iter().map(|(id, _)| id).collect(),
                    prompt: prompt.text,
                    example_count: prompt.example_count,
                    char_len: prompt.char_len,
                    reference: &pair.answer,
                });
            }
        }
    }
    Ok(Some(out))
}

fn pair_splits(pairs: &[InstructionPair], cfg: &RunConfig) -> Result<Vec<DatasetSplit>, Failure> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in pairs {
        *counts.entry(&p.judge_id).or_default() += 1;
    }
    let usable: Vec<InstructionPair> = pairs
        .iter()
        .filter(|p| counts[p.judge_id.as_str()] >= 2)
        .cloned()
        .collect();
    for (j, n) in counts.iter().filter(|(_, n)| **n < 2) {
        log::warn!("judge {j}: {n} pair(s), too few to split");
    }
    Ok(corpus::split_per_judge(&usable, cfg.corpus.test_ratio, cfg.seed)?)
}

pub fn generate(cfg: &RunConfig) -> Result<(), Failure> {
    let (kept, _, _) = load_filtered(cfg)?;
    let out = &cfg.out_dir;
    if kept.is_empty() {
        log::warn!(
            "no judge has at least {} documents; dataset is empty",
            cfg.corpus.min_docs
        );
        write_jsonl::<InstructionPair>(&out.join("pairs.jsonl"), &[])?;
        write_json(&out.join("pipeline_report.json"), &PipelineReport::default())?;
        write_json::<[DatasetSplit]>(&out.join("pair_splits.json"), &[])?;
        return Ok(());
    }
    let gw = require_gateway(cfg)?;
    let pipeline = QaPipeline::new(&gw, cfg.pipeline.to_pipeline_config());
    let (pairs, report) = pipeline.run_with_progress(&kept, progress_line);
    eprintln!();
    let t = &report.totals;
    log::info!(
        "generate: extracted {}, reasoning valid {}, questions {}, pairs {}, discarded {}, failures {}",
        t.extracted,
        t.reasoning_valid,
        t.questions_generated,
        t.pairs_valid,
        t.discarded,
        report.failures.len()
    );
    pipeline::write_pairs_jsonl(create(&out.join("pairs.jsonl"))?, &pairs)
        .map_err(|e| io_err(&out.join("pairs.jsonl"), e))?;
    write_json(&out.join("pipeline_report.json"), &report)?;

    let splits = pair_splits(&pairs, cfg)?;
    write_json(&out.join("pair_splits.json"), &splits)?;
    if let Some(records) = rag_prompts(cfg, &gw, &pairs, &splits)? {
        write_jsonl(&out.join("rag_prompts.jsonl"), &records)?;
    }
    finish_gateway(cfg, &gw)
}

pub fn evaluate(cfg: &RunConfig, records_path: &Path) -> Result<(), Failure> {
    let records = metrics::read_records_jsonl(open_input(records_path)?)?;
    let gw = build_gateway(cfg)?;
    if gw.is_none() {
        log::warn!("no provider configured: embedding scores are marked degraded and POS-JSD is skipped");
    }
    let providers = Providers {
        embedder: gw.as_ref().map(|g| g as &dyn metrics::TokenEmbedder),
        tagger: gw.as_ref().map(|g| g as &dyn metrics::PosTagger),
    };
    let table = metrics::score_records(&records, providers);
    let failed = table.records.iter().filter(|r| r.error.is_some()).count();
    let scores_path = cfg.out_dir.join("scores.csv");
    metrics::write_scores_csv(create(&scores_path)?, &table.records)?;
    write_json(&cfg.out_dir.join("aggregates.json"), &table.aggregates)?;
    log::info!(
        "evaluate: {} record(s) scored, {} failed, {} aggregate row(s)",
        table.records.len(),
        failed,
        table.aggregates.len()
    );
    if let Some(gw) = &gw {
        finish_gateway(cfg, gw)?;
    }
    Ok(())
}

pub fn cross_judge(cfg: &RunConfig, scores_path: &Path) -> Result<(), Failure> {
    let rows = metrics::read_scores_csv(open_input(scores_path)?)?;
    let result = report::cross_judge(&rows, cfg.stats.resamples, cfg.seed, cfg.stats.alpha)?;
    if result.is_empty() {
        log::warn!(
            "no personalized methods (model tags with a model judge) in {}",
            scores_path.display()
        );
    }
    write_json(&cfg.out_dir.join("cross_judge.json"), &result)?;
    let md = report::render_cross_judge(&result);
    write_text(&cfg.out_dir.join("cross_judge.md"), &md)?;
    print!("{md}");
    Ok(())
}

/// Settings manifest for `discern`. Paths are relative to the manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    /// Real sentences of every judge.
    real: PathBuf,
    #[serde(default)]
    settings: Vec<ManifestSetting>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestSetting {
    name: String,
    group: SettingGroup,
    /// Generated sentences; `judge_id` names the judge they imitate.
    path: Option<PathBuf>,
    /// Use the other judges' real sentences as negatives.
    #[serde(default)]
    other_judges: bool,
}

fn read_sentences(path: &Path) -> Result<Vec<SentenceRecord>, Failure> {
    Ok(discernment::read_sentences_jsonl(open_input(path)?)?)
}

#[derive(Serialize)]
struct DiscernOutput<'a> {
    summary: Vec<report::DiscernRow>,
    results: &'a [SettingResult],
}

pub fn discern(cfg: &RunConfig, manifest_path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", manifest_path.display())))?;
    if manifest.settings.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: no settings listed",
            manifest_path.display()
        )));
    }
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let real = read_sentences(&base.join(&manifest.real))?;
    let mut pools: Vec<(&ManifestSetting, Vec<SentenceRecord>)> = Vec::new();
    for s in &manifest.settings {
        let records = match (&s.path, s.other_judges) {
            (Some(p), false) => read_sentences(&base.join(p))?,
            (None, true) => Vec::new(),
            _ => {
                return Err(Failure::Usage(format!(
                    "setting {:?}: give exactly one of `path` or `other_judges = true`",
                    s.name
                )))
            }
        };
        pools.push((s, records));
    }

    let gw;
    let ngram = cfg.discern.ngram_featurizer();
    let embedding;
    let featurizer: &dyn Featurizer = match cfg.discern.featurizer {
        FeaturizerKind::Ngram => &ngram,
        FeaturizerKind::Embedding => {
            gw = require_gateway(cfg)?;
            embedding = EmbeddingFeaturizer {
                embedder: &gw,
                dimension: cfg.discern.embedding_dimension,
            };
            &embedding
        }
    };

    let judges: BTreeSet<&str> = real.iter().map(|r| r.judge_id.as_str()).collect();
    let params = cfg.discern.params(cfg.seed);
    let label = |r: &SentenceRecord, label, source| LabeledSentence {
        id: r.id.clone(),
        text: r.text.clone(),
        label,
        source,
    };
    let per_judge: Vec<Result<Vec<SettingResult>, Failure>> = judges
        .par_iter()
        .map(|judge| {
            let positives: Vec<LabeledSentence> = real
                .iter()
                .filter(|r| r.judge_id == *judge)
                .map(|r| label(r, Label::Positive, SentenceSource::RealJudge))
                .collect();
            let mut out = Vec::new();
            for (setting, records) in &pools {
                let sentences: Vec<LabeledSentence> = if setting.other_judges {
                    real.iter()
                        .filter(|r| r.judge_id != *judge)
                        .map(|r| label(r, Label::Negative, SentenceSource::RealOtherJudge))
                        .collect()
                } else {
                    records
                        .iter()
                        .filter(|r| r.judge_id == *judge)
                        .map(|r| {
                            let model_tag = r.model_tag.clone().unwrap_or_else(|| setting.name.clone());
                            label(r, Label::Negative, SentenceSource::Generated { model_tag })
                        })
                        .collect()
                };
                let pool = NegativePool {
                    setting: setting.name.clone(),
                    group: setting.group,
                    sentences,
                };
                match discernment::run_settings(judge, &positives, std::slice::from_ref(&pool), featurizer, &params) {
                    Ok(r) => out.extend(r),
                    Err(DiscernError::TooFewExamples { class, count }) => {
                        log::warn!(
                            "judge {judge}, setting {:?}: skipped, {count} {class} example(s)",
                            setting.name
                        )
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            Ok(out)
        })
        .collect();
    let mut results = Vec::new();
    for r in per_judge {
        results.extend(r?);
    }
    let summary = report::summarize_discernment(&results, cfg.stats.alpha)?;
    write_json(
        &cfg.out_dir.join("discern.json"),
        &DiscernOutput {
            summary: summary.clone(),
            results: &results,
        },
    )?;
    let md = report::render_discernment(&summary);
    write_text(&cfg.out_dir.join("discern.md"), &md)?;
    print!("{md}");
    Ok(())
}

#[derive(Serialize)]
struct AblationLevel {
    fraction: f64,
    total_train: usize,
    per_judge: BTreeMap<String, usize>,
    path: String,
}

pub fn ablate(cfg: &RunConfig, splits_path: Option<&Path>) -> Result<(), Failure> {
    let splits: Vec<DatasetSplit> = match splits_path {
        Some(p) => serde_json::from_reader(open_input(p)?).map_err(|e| io_err(p, e))?,
        None => {
            let (kept, _, _) = load_filtered(cfg)?;
            corpus::split_per_judge(&kept, cfg.corpus.test_ratio, cfg.seed)?
        }
    };
    let root = cfg.out_dir.join("ablation");
    let mut levels = Vec::new();
    for &fraction in &cfg.ablation.fractions {
        let sub: Vec<DatasetSplit> = splits
            .iter()
            .map(|s| corpus::subsample_train(s, fraction, cfg.seed))
            .collect::<Result<_, _>>()?;
        let dir = root.join(format!("fraction_{fraction}"));
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        write_json(&dir.join("splits.json"), &sub)?;
        let per_judge: BTreeMap<String, usize> = sub.iter().map(|s| (s.judge_id.clone(), s.train.len())).collect();
        log::info!(
            "ablate: fraction {fraction}: {} training item(s)",
            per_judge.values().sum::<usize>()
        );
        levels.push(AblationLevel {
            fraction,
            total_train: per_judge.values().sum(),
            per_judge,
            path: format!("ablation/fraction_{fraction}/splits.json"),
        });
    }
    write_json(&cfg.out_dir.join("ablation.json"), &levels)?;
    Ok(())
}

pub fn report(cfg: &RunConfig, scores_path: &Path, pivot: Option<String>, task: Option<Task>) -> Result<(), Failure> {
    let pivot = pivot
        .or_else(|| cfg.report.pivot.clone())
        .ok_or_else(|| Failure::Usage("no pivot method; pass --pivot or set report.pivot".into()))?;
    let task = task.unwrap_or(cfg.report.task);
    let rows = metrics::read_scores_csv(open_input(scores_path)?)?;
    let table = report::pivot_comparison(&rows, task, &pivot, &cfg.report.groups, cfg.stats.alpha)?;
    write_json(&cfg.out_dir.join("comparison.json"), &table)?;
    let md = report::render_pivot(&table);
    write_text(&cfg.out_dir.join("comparison.md"), &md)?;

    let mut full = format!("# Comparison against {pivot}\n\n{md}");
    for (name, title) in [
        ("cross_judge.md", "Cross-judge specificity"),
        ("discern.md", "Authorship discernment"),
    ] {
        if let Ok(section) = std::fs::read_to_string(cfg.out_dir.join(name)) {
            full.push_str(&format!("\n# {title}\n\n{section}"));
        }
    }
    write_text(&cfg.out_dir.join("report.md"), &full)?;
    print!("{md}");
    Ok(())
}

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};

use clap::{Parser, Subcommand};
use judgebench::config::RunConfig;
use judgebench::metrics::Task;

mod commands;

use commands::Failure;

static LOGGING: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Parser)]
#[command(name = "judgebench", version, about = "Judge-personalization benchmark toolkit")]
struct Cli {
    /// TOML run configuration. Missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for every split, sample and resample.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Response cache directory for provider calls.
    #[arg(long, global = true, value_name = "PATH")]
    cache_dir: Option<PathBuf>,
    /// Scripted provider responses (JSON) used instead of HTTP endpoints.
    #[arg(long, global = true, value_name = "PATH")]
    mock_provider: Option<PathBuf>,
    /// Corpus JSONL file.
    #[arg(long, global = true, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Run directory for outputs, resolved config and logs.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Repeat for more log detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, normalize and filter the corpus; write per-judge splits.
    Ingest,
    /// Build the instruction-pair dataset with the LLM pipeline.
    Generate,
    /// Score generation records against their references.
    Evaluate {
        /// Generation records JSONL.
        #[arg(long, value_name = "PATH")]
        records: PathBuf,
    },
    /// Cross-judge specificity gaps from a scores CSV.
    CrossJudge {
        /// Per-record scores CSV written by `evaluate`.
        #[arg(long, value_name = "PATH")]
        scores: PathBuf,
    },
    /// Authorship discernment per judge and setting.
    Discern {
        /// TOML manifest naming the real sentences and each negative setting.
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
    },
    /// Nested training subsets at each ablation fraction.
    Ablate {
        /// Existing splits JSON; computed from the corpus when omitted.
        #[arg(long, value_name = "PATH")]
        splits: Option<PathBuf>,
    },
    /// Pivot comparison table from a scores CSV.
    Report {
        /// Per-record scores CSV written by `evaluate`.
        #[arg(long, value_name = "PATH")]
        scores: PathBuf,
        /// Method every other method is compared against. Overrides `report.pivot`.
        #[arg(long, value_name = "METHOD")]
        pivot: Option<String>,
        /// `qa` or `next_token`. Overrides `report.task`.
        #[arg(long, value_parser = parse_task)]
        task: Option<Task>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Generate => "generate",
            Command::Evaluate { .. } => "evaluate",
            Command::CrossJudge { .. } => "cross-judge",
            Command::Discern { .. } => "discern",
            Command::Ablate { .. } => "ablate",
            Command::Report { .. } => "report",
        }
    }
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "qa" => Ok(Task::Qa),
        "next_token" | "next-token" => Ok(Task::NextToken),
        _ => Err(format!("unknown task {s:?}; expected qa or next_token")),
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.cache_dir {
        cfg.provider.cache_dir = Some(p.clone());
    }
    if let Some(p) = &cli.mock_provider {
        cfg.provider.mock = Some(p.clone());
    }
    if let Some(p) = &cli.corpus {
        cfg.corpus.path = Some(p.clone());
    }
    if let Some(p) = &cli.out {
        cfg.out_dir = p.clone();
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Log lines go to stderr and to the run's log file.
struct Tee {
    file: File,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let _ = std::io::stderr().write_all(buf);
        self.file.write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.file.flush()
    }
}

fn init_logging(cfg: &RunConfig, command: &str, verbose: u8) -> Result<(), Failure> {
    let dir = cfg.out_dir.join("logs");
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{command}.log"));
    let file = File::create(&path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let level = match verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("JUDGEBENCH_LOG")
        .target(env_logger::Target::Pipe(Box::new(Tee { file })))
        .format_timestamp_secs()
        .init();
    LOGGING.store(true, Ordering::SeqCst);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli)?;
    let name = cli.command.name();
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Failure::Data(format!("{}: {e}", cfg.out_dir.display())))?;
    init_logging(&cfg, name, cli.verbose)?;
    commands::write_text(&cfg.out_dir.join("resolved_config.toml"), &cfg.to_toml())?;
    log::info!("{name}: run directory {}", cfg.out_dir.display());
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Generate => commands::generate(&cfg),
        Command::Evaluate { records } => commands::evaluate(&cfg, &records),
        Command::CrossJudge { scores } => commands::cross_judge(&cfg, &scores),
        Command::Discern { manifest } => commands::discern(&cfg, &manifest),
        Command::Ablate { splits } => commands::ablate(&cfg, splits.as_deref()),
        Command::Report { scores, pivot, task } => commands::report(&cfg, &scores, pivot, task),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if LOGGING.load(Ordering::SeqCst) {
                log::error!("{f}");
            } else {
                eprintln!("error: {f}");
            }
            ExitCode::from(f.code())
        }
    }
}

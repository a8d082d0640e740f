//! `theater` — pairwise judge robustness harness.
//!
//! Subcommands: `tasks` builds pairwise judging tasks from a dataset,
//! `inject` previews a bias injection, `run` executes a full experiment
//! matrix from a TOML config, and `report` re-renders report files from an
//! existing results file. Exit codes: 0 success, 1 runtime failure, 2
//! configuration error, 3 run finished with incomplete conditions.

mod config;

use std::collections::BTreeMap;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use theater_client::ChatClient;
use theater_core::{
    build_report, build_task_set, load_dpo, load_mcq, render_biased, write_report_files,
    BackendSpec, BiasKind, ExecuteOptions, FakeCotMode, JudgeBackend, MockJudgeParams,
    PairwiseTask, RunError, RunOutcome, SlotRef, SourceRecord, TaskDomain,
};

#[derive(Parser)]
#[command(
    name = "theater",
    version,
    about = "Measure how bias injections sway pairwise LLM judges"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build pairwise judging tasks from a dataset file and print them as JSON lines.
    Tasks(TasksArgs),
    /// Render one biased task and highlight the injected span.
    Inject(InjectArgs),
    /// Plan and execute the experiment matrix described by a config file.
    Run(RunArgs),
    /// Re-render report files from an existing results file.
    Report(ReportArgs),
}

#[derive(Args)]
struct TasksArgs {
    /// Dataset file, one JSON record per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Record schema: dpo or mcq.
    #[arg(long)]
    kind: String,
    /// Dataset id recorded on every task (defaults to the file stem).
    #[arg(long)]
    dataset_id: Option<String>,
    /// Slot placement: correct-first, correct-second, or random.
    #[arg(long, default_value = "correct-first")]
    policy: String,
    /// Master seed for distractor and placement draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep at most this many records.
    #[arg(long)]
    limit: Option<usize>,
    /// Write tasks here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InjectArgs {
    /// Bias kind: wait, meta, reflect, shallow, deep, or fakeref.
    #[arg(long)]
    kind: String,
    /// Print the rendering without contacting anything (the only mode).
    #[arg(long)]
    dry_run: bool,
    /// Question for the demo task.
    #[arg(long, default_value = "Which statement about the daytime sky is true?")]
    question: String,
    /// Ground-truth answer text.
    #[arg(long, default_value = "The sky is blue")]
    correct: String,
    /// Incorrect answer text the injection will favor.
    #[arg(long, default_value = "The sky is green")]
    incorrect: String,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Reuse completed conditions from an existing results file.
    #[arg(long)]
    resume: bool,
    /// Replace every endpoint model with a deterministic mock judge.
    #[arg(long)]
    mock: bool,
    /// Output directory (overrides the config's out_dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results file produced by `theater run`.
    #[arg(long)]
    results: PathBuf,
    /// Directory for the report files.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Tasks(args) => cmd_tasks(args),
        Command::Inject(args) => cmd_inject(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

const CONFIG_EXIT: u8 = 2;
const INCOMPLETE_EXIT: u8 = 3;

fn config_failure(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("configuration error: {message}");
    ExitCode::from(CONFIG_EXIT)
}

fn cmd_tasks(args: TasksArgs) -> Result<ExitCode> {
    let dataset_id = args.dataset_id.clone().unwrap_or_else(|| {
        args.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    });
    let policy = match config::parse_position_policy(&args.policy) {
        Ok(p) => p,
        Err(e) => return Ok(config_failure(e)),
    };
    let records: Vec<SourceRecord> = match args.kind.as_str() {
        "dpo" => match load_dpo(&args.dataset, &dataset_id) {
            Ok(r) => r.into_iter().map(SourceRecord::Dpo).collect(),
            Err(e) => return Ok(config_failure(e)),
        },
        "mcq" => match load_mcq(&args.dataset, &dataset_id) {
            Ok(r) => r.into_iter().map(SourceRecord::Mcq).collect(),
            Err(e) => return Ok(config_failure(e)),
        },
        other => return Ok(config_failure(format!("unknown dataset kind {other:?}"))),
    };
    let limited = match args.limit {
        Some(n) => &records[..records.len().min(n)],
        None => &records[..],
    };
    let tasks = match build_task_set(limited, policy, args.seed) {
        Ok(t) => t,
        Err(e) => return Ok(config_failure(e)),
    };

    let mut body = String::new();
    for task in &tasks {
        body.push_str(&serde_json::to_string(task)?);
        body.push('\n');
    }
    match &args.out {
        Some(path) => std::fs::write(path, body)
            .with_context(|| format!("failed to write {}", path.display()))?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    eprintln!(
        "built {} task(s) from {} record(s) in {} (dataset id {dataset_id})",
        tasks.len(),
        limited.len(),
        args.dataset.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_inject(args: InjectArgs) -> Result<ExitCode> {
    let Some(kind) = BiasKind::parse(&args.kind) else {
        return Ok(config_failure(format!(
            "unknown bias kind {:?} (expected wait, meta, reflect, shallow, deep, or fakeref)",
            args.kind
        )));
    };
    if !args.dry_run {
        eprintln!("note: inject only renders previews; assuming --dry-run");
    }
    let task = PairwiseTask {
        task_id: "preview/1".to_string(),
        question: args.question.clone(),
        slot1: args.correct.clone(),
        slot2: args.incorrect.clone(),
        correct_slot: SlotRef::Slot1,
        domain: TaskDomain::Factual,
        dataset_id: "preview".to_string(),
        seed_used: 0,
    };
    let biased = match render_biased(&task, kind, &Default::default()) {
        Ok(b) => b,
        Err(e) => return Ok(config_failure(e)),
    };
    let (start, end) = biased.injected_span;
    let use_color = std::io::stdout().is_terminal();
    let (open, close) = if use_color {
        ("\u{1b}[31m", "\u{1b}[0m")
    } else {
        (">>>", "<<<")
    };
    let highlighted = if start == end {
        biased.rendering.clone()
    } else {
        format!(
            "{}{open}{}{close}{}",
            &biased.rendering[..start],
            &biased.rendering[start..end],
            &biased.rendering[end..]
        )
    };
    println!("question: {}", task.question);
    println!("bias: {kind} (span bytes {start}..{end})\n");
    println!("{highlighted}");
    Ok(ExitCode::SUCCESS)
}

fn build_backends(
    matrix: &theater_core::ExperimentMatrix,
    cache_dir: &Path,
) -> Result<BTreeMap<String, Box<dyn JudgeBackend>>, String> {
    let mut backends: BTreeMap<String, Box<dyn JudgeBackend>> = BTreeMap::new();
    for entry in &matrix.models {
        let id = entry.meta.model_id.clone();
        match &entry.backend {
            BackendSpec::Mock(params) => {
                backends.insert(
                    id.clone(),
                    Box::new(theater_core::MockJudge::new(id, params.clone())),
                );
            }
            BackendSpec::Endpoint(cfg) => {
                let client = ChatClient::new(cfg.clone(), Some(cache_dir.to_path_buf()))
                    .map_err(|e| format!("model {id}: {e}"))?;
                backends.insert(id, Box::new(client));
            }
        }
    }
    Ok(backends)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let loaded = match config::load_config(&args.config) {
        Ok(l) => l,
        Err(e) => return Ok(config_failure(format!("{e:#}"))),
    };
    let mut matrix = loaded.matrix;
    if args.mock {
        // Every endpoint becomes a deterministic mock with default knobs.
        for entry in &mut matrix.models {
            if matches!(entry.backend, BackendSpec::Endpoint(_)) {
                entry.backend =
                    BackendSpec::Mock(MockJudgeParams::uniform(0.8, 0.5, matrix.master_seed));
            }
        }
    }

    let manifest = match theater_core::plan(&matrix) {
        Ok(m) => m,
        Err(e @ (RunError::Config { .. } | RunError::Corpus(_) | RunError::Template(_))) => {
            return Ok(config_failure(e))
        }
        Err(e) => return Err(e.into()),
    };

    let out_dir = args.out_dir.unwrap_or(loaded.out_dir);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("failed to create {}", out_dir.display()))?;
    let cache_dir = out_dir.join("cache");
    let results_path = out_dir.join("results.jsonl");
    let manifest_path = out_dir.join("manifest.jsonl");

    let backends = match build_backends(&matrix, &cache_dir) {
        Ok(b) => b,
        Err(e) => return Ok(config_failure(e)),
    };

    let generator_client = match (&loaded.harness.fake_cot_mode, &loaded.generator) {
        (FakeCotMode::Generated, Some(cfg)) => {
            match ChatClient::new(cfg.clone(), Some(cache_dir.clone())) {
                Ok(c) => Some(c),
                Err(e) => return Ok(config_failure(format!("generator: {e}"))),
            }
        }
        _ => None,
    };

    let previous = if args.resume && results_path.exists() {
        let text = std::fs::read_to_string(&results_path)
            .with_context(|| format!("failed to read {}", results_path.display()))?;
        Some(RunOutcome::from_jsonl(&text)?)
    } else {
        None
    };

    let options = ExecuteOptions {
        resume_from: previous.as_ref(),
        generator: generator_client
            .as_ref()
            .map(|c| c as &dyn theater_core::FakeCotGenerator),
        generation_attempts: loaded.generation_attempts,
    };
    let outcome = match theater_core::execute(&manifest, &backends, &loaded.harness, &options) {
        Ok(o) => o,
        Err(e @ RunError::Config { .. }) => return Ok(config_failure(e)),
        Err(e) => return Err(e.into()),
    };

    std::fs::write(&manifest_path, manifest.to_jsonl())
        .with_context(|| format!("failed to write {}", manifest_path.display()))?;
    std::fs::write(&results_path, outcome.to_jsonl())
        .with_context(|| format!("failed to write {}", results_path.display()))?;
    let report = build_report(&outcome)?;
    let report_dir = out_dir.join("report");
    write_report_files(&report, &report_dir)?;

    let incomplete = outcome.incomplete_count();
    eprintln!(
        "ran {} condition(s) over {} task evaluation(s); {} ambiguous, {} failed, {} incomplete",
        outcome.conditions.len(),
        outcome.tasks.len(),
        report.total_ambiguous,
        report.total_failed,
        incomplete,
    );
    eprintln!(
        "manifest: {}\nresults: {}\nreport: {}",
        manifest_path.display(),
        results_path.display(),
        report_dir.display()
    );
    if incomplete > 0 {
        eprintln!("{incomplete} condition(s) fell below the scored-task threshold");
        return Ok(ExitCode::from(INCOMPLETE_EXIT));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(args: ReportArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.results)
        .with_context(|| format!("failed to read {}", args.results.display()))?;
    let outcome = RunOutcome::from_jsonl(&text)?;
    let report = build_report(&outcome)?;
    write_report_files(&report, &args.out)?;
    eprintln!(
        "wrote report for {} condition(s) to {}",
        report.conditions.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

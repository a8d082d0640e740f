//! Experiment matrix planning and execution.
//!
//! `plan` expands (models × datasets × biases-plus-baseline × mitigations)
//! into a [`RunManifest`] whose digest covers every input: the normalized
//! matrix and the fully built task sets with their seeds. `execute` walks
//! the manifest in order, fans each condition's tasks through the model's
//! backend, and collects one [`ConditionRecord`] per condition plus a
//! [`TaskRecord`] per task. Records are emitted in manifest order, so a
//! run's results file is a pure function of the manifest and the backends.
//!
//! Resume semantics: conditions recorded as complete in a previous outcome
//! with the same manifest digest are copied verbatim and never re-run.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::{EndpointConfig, JudgeBackend, JudgeRequest};
use crate::corpus::{
    build_task_set, load_dpo, load_mcq, CorpusError, PairwiseTask, PositionPolicy, SourceRecord,
};
use crate::inject::BiasTemplates;
use crate::inject::{
    generate_fake_cot, render_biased, render_fake_cot_template, BiasKind, BiasedTask,
    FakeCotGenerator, InjectError, InjectionText,
};
use crate::metrics::{ConditionKey, ConditionResult, ModelMeta};
use crate::mock::{MockJudge, MockJudgeParams};
use crate::protocol::{
    build_judge_prompt, parse_judgment, score, JudgeInstruction, MitigationStrategy,
    MitigationTexts, ParseError, ParserConfig, TemplateError,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Dpo,
    Mcq,
}

/// A dataset to judge on: line-delimited records at `path`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub id: String,
    pub path: String,
    pub kind: DatasetKind,
}

/// How a model is reached: deterministic mock or live endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Mock(MockJudgeParams),
    Endpoint(EndpointConfig),
}

/// One judge model in the matrix: registry metadata plus its transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub meta: ModelMeta,
    pub backend: BackendSpec,
}

/// The full experiment description. `NoneBaseline` is always run even if
/// absent from `biases`, so robustness rates stay computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub models: Vec<ModelEntry>,
    pub datasets: Vec<DatasetSpec>,
    pub biases: Vec<BiasKind>,
    pub mitigations: Vec<MitigationStrategy>,
    pub position_policy: PositionPolicy,
    pub master_seed: u64,
    pub sample_limit: usize,
}

pub const DEFAULT_SAMPLE_LIMIT: usize = 100;

impl ExperimentMatrix {
    pub fn new(models: Vec<ModelEntry>, datasets: Vec<DatasetSpec>) -> Self {
        Self {
            models,
            datasets,
            biases: BiasKind::NON_BASELINE.to_vec(),
            mitigations: vec![MitigationStrategy::NoMitigation],
            position_policy: PositionPolicy::CorrectFirst,
            master_seed: 0,
            sample_limit: DEFAULT_SAMPLE_LIMIT,
        }
    }
}

/// The prepared tasks for one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetTasks {
    pub dataset_id: String,
    pub tasks: Vec<PairwiseTask>,
}

/// Deterministic description of a run: digest, normalized matrix, every
/// task with its seed, and the ordered condition list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub digest: String,
    pub created_at_unix: u64,
    pub tool_version: String,
    pub matrix: ExperimentMatrix,
    pub datasets: Vec<DatasetTasks>,
    pub conditions: Vec<ConditionKey>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {message}")]
    Config { message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Inject(#[from] InjectError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("failed to {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("results digest {found} does not match manifest digest {expected}")]
    DigestMismatch { found: String, expected: String },
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

fn config_err(message: impl Into<String>) -> RunError {
    RunError::Config {
        message: message.into(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[cfg(not(target_arch = "wasm32"))]
fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(target_arch = "wasm32")]
fn now_unix() -> u64 {
    0
}

fn normalize(matrix: &ExperimentMatrix) -> Result<ExperimentMatrix, RunError> {
    if matrix.models.is_empty() {
        return Err(config_err("matrix has no models"));
    }
    if matrix.datasets.is_empty() {
        return Err(config_err("matrix has no datasets"));
    }
    if matrix.sample_limit == 0 {
        return Err(config_err("sample_limit must be >= 1"));
    }
    let mut ids = BTreeSet::new();
    for entry in &matrix.models {
        if !ids.insert(entry.meta.model_id.clone()) {
            return Err(config_err(format!(
                "duplicate model id {}",
                entry.meta.model_id
            )));
        }
        match &entry.backend {
            BackendSpec::Mock(params) => params.validate(),
            BackendSpec::Endpoint(cfg) => cfg.validate(),
        }
        .map_err(config_err)?;
    }
    let mut ids = BTreeSet::new();
    for ds in &matrix.datasets {
        if !ids.insert(ds.id.clone()) {
            return Err(config_err(format!("duplicate dataset id {}", ds.id)));
        }
    }

    let mut biases = Vec::new();
    for &kind in &matrix.biases {
        if kind != BiasKind::NoneBaseline && !biases.contains(&kind) {
            biases.push(kind);
        }
    }
    if biases.iter().any(|k| k.is_in_option())
        && matrix.position_policy != PositionPolicy::CorrectFirst
    {
        return Err(config_err(
            "in-option biases require the correct-first position policy (the cue must precede the incorrect answer in slot 2)",
        ));
    }
    let mut mitigations = Vec::new();
    for &m in &matrix.mitigations {
        if !mitigations.contains(&m) {
            mitigations.push(m);
        }
    }
    if mitigations.is_empty() {
        mitigations.push(MitigationStrategy::NoMitigation);
    }

    Ok(ExperimentMatrix {
        models: matrix.models.clone(),
        datasets: matrix.datasets.clone(),
        biases,
        mitigations,
        position_policy: matrix.position_policy,
        master_seed: matrix.master_seed,
        sample_limit: matrix.sample_limit,
    })
}

/// Expand a matrix into a manifest, loading datasets from their paths.
pub fn plan(matrix: &ExperimentMatrix) -> Result<RunManifest, RunError> {
    let mut datasets = Vec::new();
    for spec in &matrix.datasets {
        let path = Path::new(&spec.path);
        let records: Vec<SourceRecord> = match spec.kind {
            DatasetKind::Dpo => load_dpo(path, &spec.id)?
                .into_iter()
                .map(SourceRecord::Dpo)
                .collect(),
            DatasetKind::Mcq => load_mcq(path, &spec.id)?
                .into_iter()
                .map(SourceRecord::Mcq)
                .collect(),
        };
        let limited = &records[..records.len().min(matrix.sample_limit)];
        let tasks = build_task_set(limited, matrix.position_policy, matrix.master_seed)?;
        datasets.push(DatasetTasks {
            dataset_id: spec.id.clone(),
            tasks,
        });
    }
    plan_with_tasks(matrix, datasets)
}

/// Expand a matrix over already-built task sets (no filesystem access).
pub fn plan_with_tasks(
    matrix: &ExperimentMatrix,
    datasets: Vec<DatasetTasks>,
) -> Result<RunManifest, RunError> {
    let matrix = normalize(matrix)?;
    for spec in &matrix.datasets {
        let found = datasets
            .iter()
            .find(|d| d.dataset_id == spec.id)
            .ok_or_else(|| config_err(format!("no tasks provided for dataset {}", spec.id)))?;
        if found.tasks.is_empty() {
            return Err(RunError::Corpus(CorpusError::EmptyDataset));
        }
    }

    let mut conditions = Vec::new();
    for model in &matrix.models {
        for dataset in &matrix.datasets {
            for bias in std::iter::once(BiasKind::NoneBaseline).chain(matrix.biases.iter().copied())
            {
                for &mitigation in &matrix.mitigations {
                    conditions.push(ConditionKey {
                        model_id: model.meta.model_id.clone(),
                        dataset_id: dataset.id.clone(),
                        bias,
                        mitigation,
                    });
                }
            }
        }
    }

    #[derive(Serialize)]
    struct DigestInput<'a> {
        matrix: &'a ExperimentMatrix,
        datasets: &'a [DatasetTasks],
    }
    let canonical = serde_json::to_vec(&DigestInput {
        matrix: &matrix,
        datasets: &datasets,
    })
    .expect("matrix serialization cannot fail");
    let digest = sha256_hex(&canonical);

    Ok(RunManifest {
        digest,
        created_at_unix: now_unix(),
        tool_version: TOOL_VERSION.to_string(),
        matrix,
        datasets,
        conditions,
    })
}

/// Static-template fake CoT (default, offline) or per-task generation via
/// a configured model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FakeCotMode {
    Static,
    Generated,
}

/// Prompting and scoring configuration shared by every condition.
#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub instruction: JudgeInstruction,
    pub mitigation_texts: MitigationTexts,
    pub templates: BiasTemplates,
    pub parser: ParserConfig,
    pub fake_cot_mode: FakeCotMode,
    /// A condition reports accuracy only when at least this fraction of
    /// its planned tasks was scored; below it the condition is incomplete.
    pub min_scored_fraction: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            instruction: JudgeInstruction::default(),
            mitigation_texts: MitigationTexts::default(),
            templates: BiasTemplates::default(),
            parser: ParserConfig::default(),
            fake_cot_mode: FakeCotMode::Static,
            min_scored_fraction: 0.9,
        }
    }
}

/// Per-run execution knobs.
#[derive(Default)]
pub struct ExecuteOptions<'a> {
    /// Previous outcome for the same manifest; complete conditions are
    /// copied instead of re-run.
    pub resume_from: Option<&'a RunOutcome>,
    /// Generator used when `fake_cot_mode` is `Generated`.
    pub generator: Option<&'a dyn FakeCotGenerator>,
    pub generation_attempts: u32,
}

/// What happened to one task under one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TaskOutcome {
    Scored {
        choice: crate::corpus::SlotRef,
        rule: crate::protocol::ExtractionRule,
        correct: u8,
    },
    Ambiguous {
        reason: String,
    },
    Failed {
        error: String,
    },
}

/// One task evaluation, tied to its condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub condition: ConditionKey,
    pub task_id: String,
    pub outcome: TaskOutcome,
}

/// A condition's aggregate plus its completeness bookkeeping. `result`
/// counts only judged tasks (scored + ambiguous); transport failures are
/// tracked here so the metric invariants stay intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub result: ConditionResult,
    pub planned: usize,
    pub n_failed: usize,
    pub complete: bool,
}

/// Everything a run produced, in deterministic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub manifest_digest: String,
    pub tool_version: String,
    pub metas: Vec<ModelMeta>,
    pub tasks: Vec<TaskRecord>,
    pub conditions: Vec<ConditionRecord>,
}

impl RunOutcome {
    pub fn incomplete_count(&self) -> usize {
        self.conditions.iter().filter(|c| !c.complete).count()
    }

    /// Line-delimited serialization: a header line, one `model_meta` line
    /// per model, one `task_eval` line per task, one `condition_result`
    /// line per condition.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let push = |out: &mut String, line: &ResultsLine| {
            out.push_str(&serde_json::to_string(line).expect("results serialization cannot fail"));
            out.push('\n');
        };
        push(
            &mut out,
            &ResultsLine::Run {
                manifest_digest: self.manifest_digest.clone(),
                tool_version: self.tool_version.clone(),
            },
        );
        for meta in &self.metas {
            push(&mut out, &ResultsLine::ModelMeta { meta: meta.clone() });
        }
        for task in &self.tasks {
            push(
                &mut out,
                &ResultsLine::TaskEval {
                    record: task.clone(),
                },
            );
        }
        for condition in &self.conditions {
            push(
                &mut out,
                &ResultsLine::ConditionResult {
                    record: condition.clone(),
                },
            );
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<RunOutcome, RunError> {
        let mut manifest_digest = None;
        let mut tool_version = String::new();
        let mut metas = Vec::new();
        let mut tasks = Vec::new();
        let mut conditions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ResultsLine =
                serde_json::from_str(line).map_err(|e| RunError::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match parsed {
                ResultsLine::Run {
                    manifest_digest: digest,
                    tool_version: version,
                } => {
                    manifest_digest = Some(digest);
                    tool_version = version;
                }
                ResultsLine::ModelMeta { meta } => metas.push(meta),
                ResultsLine::TaskEval { record } => tasks.push(record),
                ResultsLine::ConditionResult { record } => conditions.push(record),
            }
        }
        Ok(RunOutcome {
            manifest_digest: manifest_digest.ok_or(RunError::MalformedRecord {
                line: 0,
                message: "missing run header line".to_string(),
            })?,
            tool_version,
            metas,
            tasks,
            conditions,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ResultsLine {
    Run {
        manifest_digest: String,
        tool_version: String,
    },
    ModelMeta {
        meta: ModelMeta,
    },
    TaskEval {
        record: TaskRecord,
    },
    ConditionResult {
        record: ConditionRecord,
    },
}

/// Manifest serialization mirrors the results file: header, one line per
/// dataset task list, one line per condition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestLine {
    Manifest {
        digest: String,
        created_at_unix: u64,
        tool_version: String,
        matrix: ExperimentMatrix,
    },
    DatasetTasks {
        dataset_id: String,
        tasks: Vec<PairwiseTask>,
    },
    Condition {
        index: usize,
        key: ConditionKey,
    },
}

impl RunManifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &ManifestLine| {
            out.push_str(&serde_json::to_string(line).expect("manifest serialization cannot fail"));
            out.push('\n');
        };
        push(&ManifestLine::Manifest {
            digest: self.digest.clone(),
            created_at_unix: self.created_at_unix,
            tool_version: self.tool_version.clone(),
            matrix: self.matrix.clone(),
        });
        for ds in &self.datasets {
            push(&ManifestLine::DatasetTasks {
                dataset_id: ds.dataset_id.clone(),
                tasks: ds.tasks.clone(),
            });
        }
        for (index, key) in self.conditions.iter().enumerate() {
            push(&ManifestLine::Condition {
                index,
                key: key.clone(),
            });
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<RunManifest, RunError> {
        let mut header: Option<(String, u64, String, ExperimentMatrix)> = None;
        let mut datasets = Vec::new();
        let mut conditions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ManifestLine =
                serde_json::from_str(line).map_err(|e| RunError::MalformedRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match parsed {
                ManifestLine::Manifest {
                    digest,
                    created_at_unix,
                    tool_version,
                    matrix,
                } => header = Some((digest, created_at_unix, tool_version, matrix)),
                ManifestLine::DatasetTasks { dataset_id, tasks } => {
                    datasets.push(DatasetTasks { dataset_id, tasks })
                }
                ManifestLine::Condition { key, .. } => conditions.push(key),
            }
        }
        let (digest, created_at_unix, tool_version, matrix) =
            header.ok_or(RunError::MalformedRecord {
                line: 0,
                message: "missing manifest header line".to_string(),
            })?;
        Ok(RunManifest {
            digest,
            created_at_unix,
            tool_version,
            matrix,
            datasets,
            conditions,
        })
    }
}

fn realize_bias(
    task: &PairwiseTask,
    kind: BiasKind,
    harness: &HarnessConfig,
    opts: &ExecuteOptions<'_>,
) -> Result<BiasedTask, InjectError> {
    if kind.is_post_option() && harness.fake_cot_mode == FakeCotMode::Generated {
        let generator = opts
            .generator
            .ok_or(InjectError::GenerationRejected { attempts: 0 })?;
        let attempts = opts.generation_attempts.max(1);
        match generate_fake_cot(kind, task, generator, attempts) {
            Ok(text) => return apply_and_wrap(task, &text, kind),
            // Rejected generations fall back to the static template so the
            // condition still runs; transport failures surface per task.
            Err(InjectError::GenerationRejected { .. }) => {}
            Err(e) => return Err(e),
        }
        let text = render_fake_cot_template(kind, task, &harness.templates)?;
        return apply_and_wrap(task, &text, kind);
    }
    render_biased(task, kind, &harness.templates)
}

fn apply_and_wrap(
    task: &PairwiseTask,
    text: &InjectionText,
    kind: BiasKind,
) -> Result<BiasedTask, InjectError> {
    crate::inject::apply_injection(task, Some(text), kind)
}

/// Run every condition in the manifest through its model's backend.
pub fn execute(
    manifest: &RunManifest,
    backends: &BTreeMap<String, Box<dyn JudgeBackend>>,
    harness: &HarnessConfig,
    opts: &ExecuteOptions<'_>,
) -> Result<RunOutcome, RunError> {
    harness.instruction.validate()?;
    MitigationTexts::validated(
        harness.mitigation_texts.targeted.clone(),
        harness.mitigation_texts.self_reflection.clone(),
    )?;
    if !(0.0..=1.0).contains(&harness.min_scored_fraction) {
        return Err(config_err("min_scored_fraction must be in [0, 1]"));
    }
    if harness.fake_cot_mode == FakeCotMode::Generated && opts.generator.is_none() {
        return Err(config_err(
            "fake_cot_mode = generated requires a generator endpoint",
        ));
    }
    for model in &manifest.matrix.models {
        if !backends.contains_key(&model.meta.model_id) {
            return Err(config_err(format!(
                "no backend provided for model {}",
                model.meta.model_id
            )));
        }
    }
    if let Some(prev) = opts.resume_from {
        if prev.manifest_digest != manifest.digest {
            return Err(RunError::DigestMismatch {
                found: prev.manifest_digest.clone(),
                expected: manifest.digest.clone(),
            });
        }
    }

    let tasks_by_dataset: BTreeMap<&str, &[PairwiseTask]> = manifest
        .datasets
        .iter()
        .map(|d| (d.dataset_id.as_str(), d.tasks.as_slice()))
        .collect();

    let mut all_tasks: Vec<TaskRecord> = Vec::new();
    let mut all_conditions: Vec<ConditionRecord> = Vec::new();

    for key in &manifest.conditions {
        if let Some(prev) = opts.resume_from {
            if let Some(record) = prev
                .conditions
                .iter()
                .find(|c| c.result.key == *key && c.complete)
            {
                all_tasks.extend(prev.tasks.iter().filter(|t| t.condition == *key).cloned());
                all_conditions.push(record.clone());
                continue;
            }
        }

        let tasks = tasks_by_dataset
            .get(key.dataset_id.as_str())
            .copied()
            .ok_or_else(|| config_err(format!("manifest has no tasks for {}", key.dataset_id)))?;
        let backend = backends
            .get(&key.model_id)
            .expect("backend presence checked above");

        // Realize the bias and build the prompt for each task; tasks that
        // cannot be realized are recorded as failed, not dropped.
        let mut outcomes: Vec<Option<TaskOutcome>> = vec![None; tasks.len()];
        let mut requests: Vec<JudgeRequest> = Vec::with_capacity(tasks.len());
        let mut request_slots: Vec<usize> = Vec::with_capacity(tasks.len());
        for (i, task) in tasks.iter().enumerate() {
            match realize_bias(task, key.bias, harness, opts) {
                Ok(biased) => {
                    let messages = build_judge_prompt(
                        &biased,
                        &harness.instruction,
                        key.mitigation,
                        &harness.mitigation_texts,
                    )?;
                    requests.push(JudgeRequest {
                        task: biased,
                        messages,
                    });
                    request_slots.push(i);
                }
                Err(e) => {
                    outcomes[i] = Some(TaskOutcome::Failed {
                        error: e.to_string(),
                    })
                }
            }
        }

        let responses = backend.evaluate_batch(&requests);
        debug_assert_eq!(responses.len(), requests.len());
        for ((slot, request), response) in request_slots.iter().zip(requests.iter()).zip(responses)
        {
            let outcome = match response {
                Err(e) => TaskOutcome::Failed {
                    error: e.to_string(),
                },
                Ok(resp) => match parse_judgment(&resp, &harness.parser) {
                    Ok(parsed) => TaskOutcome::Scored {
                        choice: parsed.choice,
                        rule: parsed.extraction_rule,
                        correct: score(&parsed, &request.task.base),
                    },
                    Err(ParseError::EmptyResponse) => TaskOutcome::Ambiguous {
                        reason: "empty response".to_string(),
                    },
                    Err(ParseError::Ambiguous { reason }) => TaskOutcome::Ambiguous { reason },
                },
            };
            outcomes[*slot] = Some(outcome);
        }

        let mut n_scored = 0;
        let mut n_correct = 0;
        let mut n_ambiguous = 0;
        let mut n_failed = 0;
        for (task, outcome) in tasks.iter().zip(outcomes) {
            let outcome = outcome.expect("every task outcome filled");
            match &outcome {
                TaskOutcome::Scored { correct, .. } => {
                    n_scored += 1;
                    n_correct += usize::from(*correct);
                }
                TaskOutcome::Ambiguous { .. } => n_ambiguous += 1,
                TaskOutcome::Failed { .. } => n_failed += 1,
            }
            all_tasks.push(TaskRecord {
                condition: key.clone(),
                task_id: task.task_id.clone(),
                outcome,
            });
        }
        let planned = tasks.len();
        let complete =
            planned > 0 && (n_scored as f64) / (planned as f64) >= harness.min_scored_fraction;
        all_conditions.push(ConditionRecord {
            result: ConditionResult::new(key.clone(), n_scored, n_correct, n_ambiguous),
            planned,
            n_failed,
            complete,
        });
    }

    Ok(RunOutcome {
        manifest_digest: manifest.digest.clone(),
        tool_version: TOOL_VERSION.to_string(),
        metas: manifest
            .matrix
            .models
            .iter()
            .map(|m| m.meta.clone())
            .collect(),
        tasks: all_tasks,
        conditions: all_conditions,
    })
}

/// Convenience: build the boxed backends for a matrix's mock models. Live
/// endpoints must be supplied by the caller (the transport crate).
pub fn mock_backends(matrix: &ExperimentMatrix) -> BTreeMap<String, Box<dyn JudgeBackend>> {
    let mut backends: BTreeMap<String, Box<dyn JudgeBackend>> = BTreeMap::new();
    for entry in &matrix.models {
        if let BackendSpec::Mock(params) = &entry.backend {
            backends.insert(
                entry.meta.model_id.clone(),
                Box::new(MockJudge::new(entry.meta.model_id.clone(), params.clone())),
            );
        }
    }
    backends
}

/// Synthetic subjective records for demos and offline checks.
pub fn synthetic_dpo_tasks(
    dataset_id: &str,
    n: usize,
    policy: PositionPolicy,
    master_seed: u64,
) -> Result<DatasetTasks, RunError> {
    let records: Vec<SourceRecord> = (0..n)
        .map(|i| {
            SourceRecord::Dpo(crate::corpus::DpoRecord {
                id: format!("s{i:05}"),
                question: format!("Synthetic question {i}: which reply is better supported?"),
                chosen: format!("Reply {i}: the claim holds, with sources cited."),
                rejected: format!("Reply {i}: the claim is repeated without support."),
                dataset_id: dataset_id.to_string(),
            })
        })
        .collect();
    Ok(DatasetTasks {
        dataset_id: dataset_id.to_string(),
        tasks: build_task_set(&records, policy, master_seed)?,
    })
}

//! Core library for THEATER, a harness that measures how strongly pairwise
//! LLM/LRM judges are swayed by reasoning-theater perturbations: short cues
//! that mimic deliberation and fabricated chains of thought that argue for
//! the wrong answer.
//!
//! The pipeline is: build pairwise tasks from preference or multiple-choice
//! data ([`corpus`]), inject one of six bias texts at a controlled position
//! ([`inject`]), assemble the judge prompt and parse the verdict
//! ([`protocol`]), aggregate accuracy / robustness-rate / mitigation
//! metrics ([`metrics`]), and drive the whole matrix of conditions
//! ([`runner`], [`report`]).
//!
//! Everything in this crate is deterministic: randomness comes only from
//! [`rng::SplitMix64`] streams seeded from values recorded in the run
//! manifest, so a run is reproducible byte-for-byte. Network transport
//! lives behind the [`backend::JudgeBackend`] trait; the in-crate
//! [`mock`] judge implements it for offline runs.

pub mod backend;
pub mod corpus;
mod fill;
pub mod inject;
pub mod metrics;
pub mod mock;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod runner;

pub use backend::{BackendError, EndpointConfig, JudgeBackend, JudgeRequest, RetryPolicy};
pub use corpus::{
    build_task_set, dpo_to_pairwise, load_dpo, load_mcq, mcq_to_pairwise, CorpusError, DpoRecord,
    McqRecord, PairwiseTask, PositionPolicy, SlotRef, SourceRecord, TaskDomain,
};
pub use inject::{
    apply_injection, baseline_task, generate_fake_cot, render_biased, render_fake_cot_template,
    render_options, render_simple_cue, strip_injection, BiasKind, BiasLocation, BiasTemplates,
    BiasedTask, FakeCotGenerator, GeneratorError, InjectError, InjectionSource, InjectionText,
};
pub use metrics::{
    delta, group_average, improvement, robustness_rate, ConditionKey, ConditionResult, GroupCell,
    MetricError, ModelGroup, ModelMeta,
};
pub use mock::{mock_evaluate, MockJudge, MockJudgeParams};
pub use protocol::{
    build_judge_prompt, extract_reasoning_trace, parse_judgment, score, ChatMessage,
    ExtractionRule, JudgeInstruction, JudgeResponse, MitigationStrategy, MitigationTexts,
    ParseError, ParsedJudgment, ParserConfig, Role, TemplateError,
};
pub use report::{build_report, write_report_files, Report};
pub use runner::{
    execute, plan, plan_with_tasks, BackendSpec, ConditionRecord, DatasetKind, DatasetSpec,
    DatasetTasks, ExecuteOptions, ExperimentMatrix, FakeCotMode, HarnessConfig, ModelEntry,
    RunError, RunManifest, RunOutcome, TaskOutcome, TaskRecord,
};

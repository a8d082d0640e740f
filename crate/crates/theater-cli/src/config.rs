//! TOML run configuration → experiment matrix + harness settings.
//!
//! Models are listed as `[[models]]` tables with `kind = "mock"` or
//! `kind = "endpoint"`; datasets as `[[datasets]]`. Instruction, mitigation,
//! and bias-template overrides live under `[instruction]`, `[mitigation]`,
//! and `[templates]`. Anything omitted falls back to the built-in
//! defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use theater_core::{
    BackendSpec, BiasKind, BiasTemplates, DatasetKind, DatasetSpec, EndpointConfig,
    ExperimentMatrix, FakeCotMode, HarnessConfig, JudgeInstruction, MitigationStrategy,
    MitigationTexts, MockJudgeParams, ModelEntry, ModelMeta, ParserConfig, PositionPolicy,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_sample_limit")]
    pub sample_limit: usize,
    #[serde(default = "default_position_policy")]
    pub position_policy: String,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_biases")]
    pub biases: Vec<String>,
    #[serde(default = "default_mitigations")]
    pub mitigations: Vec<String>,
    #[serde(default = "default_fake_cot_mode")]
    pub fake_cot_mode: String,
    #[serde(default = "default_min_scored_fraction")]
    pub min_scored_fraction: f64,
    #[serde(default = "default_generation_attempts")]
    pub generation_attempts: u32,
    pub models: Vec<ModelConfig>,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub instruction: InstructionConfig,
    #[serde(default)]
    pub mitigation: MitigationConfig,
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
    #[serde(default)]
    pub parser: ParserOverride,
    #[serde(default)]
    pub generator: Option<EndpointConfig>,
}

fn default_sample_limit() -> usize {
    theater_core::runner::DEFAULT_SAMPLE_LIMIT
}

fn default_position_policy() -> String {
    "correct-first".to_string()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("theater-out")
}

fn default_biases() -> Vec<String> {
    BiasKind::NON_BASELINE
        .iter()
        .map(|k| k.to_string())
        .collect()
}

fn default_mitigations() -> Vec<String> {
    vec!["none".to_string()]
}

fn default_fake_cot_mode() -> String {
    "static".to_string()
}

fn default_min_scored_fraction() -> f64 {
    0.9
}

fn default_generation_attempts() -> u32 {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default)]
    pub lrm: bool,
    #[serde(default = "default_true")]
    pub open_source: bool,
    pub kind: String,
    // Mock judge knobs.
    #[serde(default)]
    pub baseline_accuracy: Option<f64>,
    #[serde(default)]
    pub susceptibility: Option<Susceptibility>,
    #[serde(default)]
    pub mock_seed: Option<u64>,
    // Endpoint knobs.
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub retry: Option<RetryConfig>,
}

fn default_family() -> String {
    "unspecified".to_string()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Susceptibility {
    Uniform(f64),
    PerKind(BTreeMap<String, f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryConfig {
    pub max_attempts: u32,
    #[serde(default)]
    pub backoff_ms: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub id: String,
    pub path: String,
    pub kind: String,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionConfig {
    #[serde(default)]
    pub system_text: Option<String>,
    #[serde(default)]
    pub user_template: Option<String>,
    #[serde(default)]
    pub answer_directive: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MitigationConfig {
    #[serde(default)]
    pub targeted: Option<String>,
    #[serde(default)]
    pub self_reflection: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParserOverride {
    #[serde(default)]
    pub think_open: Option<String>,
    #[serde(default)]
    pub think_close: Option<String>,
}

pub fn parse_position_policy(s: &str) -> Result<PositionPolicy> {
    match s {
        "correct-first" => Ok(PositionPolicy::CorrectFirst),
        "correct-second" => Ok(PositionPolicy::CorrectSecond),
        "random" => Ok(PositionPolicy::SeededRandom),
        other => bail!(
            "unknown position policy {other:?} (expected correct-first, correct-second, or random)"
        ),
    }
}

pub fn parse_bias_kind(s: &str) -> Result<BiasKind> {
    BiasKind::parse(s)
        .with_context(|| format!("unknown bias kind {s:?} (expected one of wait, meta, reflect, shallow, deep, fakeref, baseline)"))
}

pub fn parse_dataset_kind(s: &str) -> Result<DatasetKind> {
    match s {
        "dpo" => Ok(DatasetKind::Dpo),
        "mcq" => Ok(DatasetKind::Mcq),
        other => bail!("unknown dataset kind {other:?} (expected dpo or mcq)"),
    }
}

/// Everything `theater run` needs, decoded and validated.
#[derive(Debug)]
pub struct LoadedConfig {
    pub matrix: ExperimentMatrix,
    pub harness: HarnessConfig,
    pub out_dir: PathBuf,
    pub generator: Option<EndpointConfig>,
    pub generation_attempts: u32,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("failed to read config {}", path.display()))?;
    let config: RunConfig = toml::from_str(&text)
        .with_context(|| format!("failed to parse config {}", path.display()))?;
    build(config)
}

fn build(config: RunConfig) -> Result<LoadedConfig> {
    let position_policy = parse_position_policy(&config.position_policy)?;

    let mut models = Vec::new();
    for m in &config.models {
        let meta = ModelMeta {
            model_id: m.id.clone(),
            family: m.family.clone(),
            is_lrm: m.lrm,
            open_source: m.open_source,
        };
        let backend = match m.kind.as_str() {
            "mock" => BackendSpec::Mock(mock_params(m, config.master_seed)?),
            "endpoint" => BackendSpec::Endpoint(endpoint_config(m)?),
            other => bail!(
                "model {}: unknown kind {other:?} (expected mock or endpoint)",
                m.id
            ),
        };
        models.push(ModelEntry { meta, backend });
    }

    let mut datasets = Vec::new();
    for d in &config.datasets {
        datasets.push(DatasetSpec {
            id: d.id.clone(),
            path: d.path.clone(),
            kind: parse_dataset_kind(&d.kind)?,
        });
    }

    let biases = config
        .biases
        .iter()
        .map(|s| parse_bias_kind(s))
        .collect::<Result<Vec<_>>>()?;
    let mitigations = config
        .mitigations
        .iter()
        .map(|s| {
            MitigationStrategy::parse(s).with_context(|| {
                format!("unknown mitigation {s:?} (expected none, targeted, or self-reflection)")
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let matrix = ExperimentMatrix {
        models,
        datasets,
        biases,
        mitigations,
        position_policy,
        master_seed: config.master_seed,
        sample_limit: config.sample_limit,
    };

    let defaults = JudgeInstruction::default();
    let instruction = JudgeInstruction::new(
        config.instruction.system_text.clone(),
        config
            .instruction
            .user_template
            .clone()
            .unwrap_or(defaults.user_template),
        config
            .instruction
            .answer_directive
            .clone()
            .unwrap_or(defaults.answer_directive),
    )?;

    let default_texts = MitigationTexts::default();
    let mitigation_texts = MitigationTexts::validated(
        config
            .mitigation
            .targeted
            .clone()
            .unwrap_or(default_texts.targeted),
        config
            .mitigation
            .self_reflection
            .clone()
            .unwrap_or(default_texts.self_reflection),
    )?;

    let mut templates = BiasTemplates::default();
    for (name, template) in &config.templates {
        let kind = parse_bias_kind(name)?;
        if kind == BiasKind::NoneBaseline {
            bail!("the baseline takes no template override");
        }
        templates.set(kind, template.clone());
    }

    let parser_defaults = ParserConfig::default();
    let parser = ParserConfig {
        think_open: config
            .parser
            .think_open
            .clone()
            .unwrap_or(parser_defaults.think_open),
        think_close: config
            .parser
            .think_close
            .clone()
            .unwrap_or(parser_defaults.think_close),
    };

    let fake_cot_mode = match config.fake_cot_mode.as_str() {
        "static" => FakeCotMode::Static,
        "generated" => FakeCotMode::Generated,
        other => bail!("unknown fake_cot_mode {other:?} (expected static or generated)"),
    };
    if fake_cot_mode == FakeCotMode::Generated && config.generator.is_none() {
        bail!("fake_cot_mode = \"generated\" requires a [generator] endpoint");
    }

    Ok(LoadedConfig {
        matrix,
        harness: HarnessConfig {
            instruction,
            mitigation_texts,
            templates,
            parser,
            fake_cot_mode,
            min_scored_fraction: config.min_scored_fraction,
        },
        out_dir: config.out_dir,
        generator: config.generator,
        generation_attempts: config.generation_attempts,
    })
}

fn mock_params(m: &ModelConfig, master_seed: u64) -> Result<MockJudgeParams> {
    let baseline_accuracy = m.baseline_accuracy.unwrap_or(0.8);
    let seed = m.mock_seed.unwrap_or(master_seed);
    let mut params = MockJudgeParams::uniform(baseline_accuracy, 0.5, seed);
    match &m.susceptibility {
        None => {}
        Some(Susceptibility::Uniform(p)) => {
            params = MockJudgeParams::uniform(baseline_accuracy, *p, seed);
        }
        Some(Susceptibility::PerKind(map)) => {
            for (name, p) in map {
                let kind = parse_bias_kind(name)?;
                params.susceptibility.insert(kind, *p);
            }
        }
    }
    params
        .validate()
        .map_err(|e| anyhow::anyhow!("model {}: {e}", m.id))?;
    Ok(params)
}

fn endpoint_config(m: &ModelConfig) -> Result<EndpointConfig> {
    let base_url = m
        .base_url
        .clone()
        .with_context(|| format!("model {}: endpoint models need base_url", m.id))?;
    let model_name = m.model_name.clone().unwrap_or_else(|| m.id.clone());
    let mut cfg = EndpointConfig::new(base_url, model_name);
    if let Some(t) = m.temperature {
        cfg.temperature = t;
    }
    if let Some(t) = m.max_tokens {
        cfg.max_tokens = t;
    }
    cfg.auth_env = m.auth_env.clone();
    if let Some(p) = m.parallelism {
        cfg.parallelism = p;
    }
    cfg.seed = m.seed;
    cfg.timeout_ms = m.timeout_ms;
    if let Some(retry) = &m.retry {
        cfg.retry.max_attempts = retry.max_attempts;
        if !retry.backoff_ms.is_empty() {
            cfg.retry.backoff_ms = retry.backoff_ms.clone();
        }
    }
    cfg.validate()
        .map_err(|e| anyhow::anyhow!("model {}: {e}", m.id))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
master_seed = 7

[[models]]
id = "mock-lrm"
kind = "mock"
lrm = true
baseline_accuracy = 0.8
susceptibility = 0.5

[[datasets]]
id = "truthy"
path = "fixtures/truthy.jsonl"
kind = "dpo"
"#;

    #[test]
    fn minimal_config_builds_with_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let loaded = build(config).unwrap();
        assert_eq!(loaded.matrix.biases.len(), 6);
        assert_eq!(
            loaded.matrix.mitigations,
            vec![MitigationStrategy::NoMitigation]
        );
        assert_eq!(loaded.matrix.sample_limit, 100);
        assert_eq!(loaded.harness.min_scored_fraction, 0.9);
        assert!(matches!(
            loaded.matrix.models[0].backend,
            BackendSpec::Mock(_)
        ));
    }

    #[test]
    fn per_kind_susceptibility_and_overrides_parse() {
        let text = r#"
master_seed = 1
biases = ["wait", "shallow"]
mitigations = ["none", "targeted"]

[[models]]
id = "m"
kind = "mock"
susceptibility = { wait = 0.9, shallow = 0.1 }

[[datasets]]
id = "d"
path = "x.jsonl"
kind = "mcq"

[templates]
wait = "hold on. hold on."

[instruction]
user_template = "Q: {question}\n{options}"
"#;
        let config: RunConfig = toml::from_str(text).unwrap();
        let loaded = build(config).unwrap();
        assert_eq!(
            loaded.matrix.biases,
            vec![BiasKind::WaitCue, BiasKind::ShallowReasoning]
        );
        assert_eq!(loaded.harness.templates.wait, "hold on. hold on.");
        match &loaded.matrix.models[0].backend {
            BackendSpec::Mock(params) => {
                assert_eq!(params.susceptibility[&BiasKind::WaitCue], 0.9);
                assert_eq!(params.susceptibility[&BiasKind::ShallowReasoning], 0.1);
            }
            _ => panic!("expected mock backend"),
        }
    }

    #[test]
    fn bad_fields_are_rejected() {
        let text = r#"
[[models]]
id = "m"
kind = "warp-drive"

[[datasets]]
id = "d"
path = "x.jsonl"
kind = "dpo"
"#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert!(build(config)
            .unwrap_err()
            .to_string()
            .contains("warp-drive"));

        let text = r#"
fake_cot_mode = "generated"

[[models]]
id = "m"
kind = "mock"

[[datasets]]
id = "d"
path = "x.jsonl"
kind = "dpo"
"#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert!(build(config)
            .unwrap_err()
            .to_string()
            .contains("[generator]"));
    }

    #[test]
    fn endpoint_models_need_a_base_url() {
        let text = r#"
[[models]]
id = "remote"
kind = "endpoint"

[[datasets]]
id = "d"
path = "x.jsonl"
kind = "dpo"
"#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert!(build(config).unwrap_err().to_string().contains("base_url"));
    }
}

//! Browser demo bindings: three interactive views over the core harness.
//!
//! Everything here is pure and deterministic, so the whole pipeline —
//! task construction, bias injection, prompt assembly, the mock judge,
//! parsing, and metrics — runs client-side with no network. Each export
//! takes plain strings/numbers and returns a JSON string for the page to
//! render.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use theater_core::{
    build_judge_prompt, build_report, execute, parse_judgment, plan_with_tasks, render_biased,
    BackendSpec, BiasKind, BiasTemplates, ChatMessage, DatasetKind, DatasetSpec, ExecuteOptions,
    ExperimentMatrix, HarnessConfig, JudgeInstruction, JudgeResponse, MitigationStrategy,
    MitigationTexts, MockJudgeParams, ModelEntry, ModelMeta, PairwiseTask, ParserConfig,
    PositionPolicy, SlotRef, TaskDomain,
};

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct PreviewOut {
    kind: String,
    location: Option<String>,
    before: String,
    injected: String,
    after: String,
    span_start: usize,
    span_end: usize,
    messages: Vec<ChatMessage>,
}

/// Render a biased task and the judge prompt built from it. The rendering
/// comes back split at the injected span so the page can highlight it.
#[wasm_bindgen]
pub fn preview_injection(
    question: &str,
    correct: &str,
    incorrect: &str,
    kind: &str,
    mitigation: &str,
) -> Result<String, JsValue> {
    let kind =
        BiasKind::parse(kind).ok_or_else(|| js_err(format!("unknown bias kind {kind:?}")))?;
    let mitigation = MitigationStrategy::parse(mitigation)
        .ok_or_else(|| js_err(format!("unknown mitigation {mitigation:?}")))?;
    if correct.trim().is_empty() || incorrect.trim().is_empty() || correct == incorrect {
        return Err(js_err("the two answers must be nonempty and different"));
    }
    let task = PairwiseTask {
        task_id: "demo/1".to_string(),
        question: question.to_string(),
        slot1: correct.to_string(),
        slot2: incorrect.to_string(),
        correct_slot: SlotRef::Slot1,
        domain: TaskDomain::Factual,
        dataset_id: "demo".to_string(),
        seed_used: 0,
    };
    let biased = render_biased(&task, kind, &BiasTemplates::default()).map_err(js_err)?;
    let messages = build_judge_prompt(
        &biased,
        &JudgeInstruction::default(),
        mitigation,
        &MitigationTexts::default(),
    )
    .map_err(js_err)?;
    let (start, end) = biased.injected_span;
    let out = PreviewOut {
        kind: kind.to_string(),
        location: kind.location().map(|l| format!("{l:?}")),
        before: biased.rendering[..start].to_string(),
        injected: biased.rendering[start..end].to_string(),
        after: biased.rendering[end..].to_string(),
        span_start: start,
        span_end: end,
        messages,
    };
    serde_json::to_string(&out).map_err(js_err)
}

#[derive(Serialize)]
struct ParseOut {
    ok: bool,
    choice: Option<String>,
    rule: Option<String>,
    trace: Option<String>,
    error: Option<String>,
}

/// Run the verdict parser over a pasted judge reply.
#[wasm_bindgen]
pub fn parse_reply(raw: &str) -> String {
    let cfg = ParserConfig::default();
    let (_, trace) = theater_core::extract_reasoning_trace(raw, &cfg);
    let response = JudgeResponse::new(raw, "demo");
    let out = match parse_judgment(&response, &cfg) {
        Ok(parsed) => ParseOut {
            ok: true,
            choice: Some(parsed.choice.label().to_string()),
            rule: Some(format!("{:?}", parsed.extraction_rule)),
            trace,
            error: None,
        },
        Err(e) => ParseOut {
            ok: false,
            choice: None,
            rule: None,
            trace,
            error: Some(e.to_string()),
        },
    };
    serde_json::to_string(&out).expect("serialization cannot fail")
}

#[derive(Serialize)]
struct MatrixRow {
    bias: String,
    accuracy: Option<f64>,
    robustness_rate: Option<f64>,
    delta: Option<f64>,
    n_tasks: usize,
}

#[derive(Serialize)]
struct MatrixOut {
    baseline_accuracy: Option<f64>,
    expected_baseline: f64,
    expected_biased: f64,
    rows: Vec<MatrixRow>,
}

/// Run a full offline experiment: one mock judge over a synthetic
/// subjective dataset, clean baseline plus all six biases.
#[wasm_bindgen]
pub fn run_mock_matrix(
    baseline_accuracy: f64,
    susceptibility: f64,
    n_tasks: u32,
    seed: u32,
) -> Result<String, JsValue> {
    let n_tasks = n_tasks.clamp(1, 20_000) as usize;
    let seed = seed as u64;
    let dataset = theater_core::runner::synthetic_dpo_tasks(
        "demo",
        n_tasks,
        PositionPolicy::CorrectFirst,
        seed,
    )
    .map_err(js_err)?;
    let params = MockJudgeParams::uniform(baseline_accuracy, susceptibility, seed);
    params.validate().map_err(js_err)?;
    let matrix = ExperimentMatrix {
        models: vec![ModelEntry {
            meta: ModelMeta {
                model_id: "mock-judge".to_string(),
                family: "mock".to_string(),
                is_lrm: true,
                open_source: true,
            },
            backend: BackendSpec::Mock(params),
        }],
        datasets: vec![DatasetSpec {
            id: "demo".to_string(),
            path: "memory:demo".to_string(),
            kind: DatasetKind::Dpo,
        }],
        biases: BiasKind::NON_BASELINE.to_vec(),
        mitigations: vec![MitigationStrategy::NoMitigation],
        position_policy: PositionPolicy::CorrectFirst,
        master_seed: seed,
        sample_limit: n_tasks,
    };
    let manifest = plan_with_tasks(&matrix, vec![dataset]).map_err(js_err)?;
    let backends = theater_core::runner::mock_backends(&manifest.matrix);
    let outcome = execute(
        &manifest,
        &backends,
        &HarnessConfig::default(),
        &ExecuteOptions::default(),
    )
    .map_err(js_err)?;
    let report = build_report(&outcome).map_err(js_err)?;

    let baseline = report
        .conditions
        .iter()
        .find(|c| c.bias == BiasKind::NoneBaseline)
        .and_then(|c| c.accuracy);
    let rows = BiasKind::NON_BASELINE
        .into_iter()
        .map(|bias| {
            let cell = report.conditions.iter().find(|c| c.bias == bias);
            MatrixRow {
                bias: bias.to_string(),
                accuracy: cell.and_then(|c| c.accuracy),
                robustness_rate: cell.and_then(|c| c.robustness_rate),
                delta: cell.and_then(|c| c.delta),
                n_tasks,
            }
        })
        .collect();
    let out = MatrixOut {
        baseline_accuracy: baseline,
        expected_baseline: baseline_accuracy,
        expected_biased: (1.0 - susceptibility) * baseline_accuracy,
        rows,
    };
    serde_json::to_string(&out).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preview_splits_at_the_span() {
        let json = preview_injection(
            "Which statement about the daytime sky is true?",
            "The sky is blue",
            "The sky is green",
            "wait",
            "targeted",
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["injected"], "wait... wait... wait...");
        assert!(v["before"].as_str().unwrap().contains("Option A"));
        assert!(v["after"].as_str().unwrap().contains("Option B"));
        assert_eq!(v["messages"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn parse_reply_reports_both_outcomes() {
        let ok: serde_json::Value =
            serde_json::from_str(&parse_reply("<think>hm</think>\nAnswer: B")).unwrap();
        assert_eq!(ok["ok"], true);
        assert_eq!(ok["choice"], "B");
        assert_eq!(ok["trace"], "hm");
        let bad: serde_json::Value = serde_json::from_str(&parse_reply("no verdict here")).unwrap();
        assert_eq!(bad["ok"], false);
    }

    #[test]
    fn mock_matrix_returns_six_rows_with_rates() {
        let json = run_mock_matrix(0.8, 0.5, 400, 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 6);
        for row in rows {
            let acc = row["accuracy"].as_f64().unwrap();
            assert!((0.2..=0.6).contains(&acc), "accuracy {acc}");
            assert!(row["robustness_rate"].as_f64().is_some());
        }
    }
}

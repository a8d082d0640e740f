//! Acceptance suite: one test per criterion, each printing a PASS line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Live model-level numbers are not reproducible offline, so acceptance
//! is property-based plus exact arithmetic on pinned reference values,
//! all at fixed tolerances.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use theater_core::{
    build_report, build_task_set, execute, load_dpo, load_mcq, mcq_to_pairwise, parse_judgment,
    plan_with_tasks, render_biased, render_options, strip_injection, write_report_files,
    BackendSpec, BiasKind, BiasTemplates, ConditionKey, ConditionResult, DatasetKind, DatasetSpec,
    DatasetTasks, ExecuteOptions, ExperimentMatrix, HarnessConfig, JudgeResponse,
    MitigationStrategy, MitigationTexts, MockJudgeParams, ModelEntry, ModelMeta, PairwiseTask,
    ParseError, ParserConfig, PositionPolicy, RunOutcome, SlotRef, SourceRecord, TaskDomain,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../theater-core/tests/fixtures")
}

fn key(model: &str, dataset: &str, bias: BiasKind, mitigation: MitigationStrategy) -> ConditionKey {
    ConditionKey {
        model_id: model.to_string(),
        dataset_id: dataset.to_string(),
        bias,
        mitigation,
    }
}

fn pass(criterion: &str, detail: &str) {
    println!("acceptance {criterion}: PASS — {detail}");
}

// 1. Robustness rate and delta reproduce their pinned reference values.
#[test]
fn criterion_1_metric_oracle() {
    let started = Instant::now();

    let biased = ConditionResult::new(
        key(
            "ds-r1-70b",
            "truthy",
            BiasKind::ReflectiveCue,
            MitigationStrategy::NoMitigation,
        ),
        100,
        42,
        0,
    );
    let baseline = ConditionResult::new(
        key(
            "ds-r1-70b",
            "truthy",
            BiasKind::NoneBaseline,
            MitigationStrategy::NoMitigation,
        ),
        100,
        52,
        0,
    );
    let rate = theater_core::robustness_rate(&biased, &baseline).unwrap();
    assert!(
        (rate - 0.807_692_3).abs() <= 1e-9 + 1e-7,
        "robustness rate {rate} too far from 0.8076923"
    );
    assert!((rate - 0.42 / 0.52).abs() < 1e-12);

    let table = [
        ("ds-r1-70b", 42, 52, "-0.10"),
        ("ds-r1", 37, 49, "-0.12"),
        ("gpt-4o", 71, 75, "-0.04"),
        ("ds-v3", 38, 43, "-0.05"),
    ];
    for (model, biased_correct, base_correct, expected) in table {
        let biased = ConditionResult::new(
            key(
                model,
                "truthy",
                BiasKind::ReflectiveCue,
                MitigationStrategy::NoMitigation,
            ),
            100,
            biased_correct,
            0,
        );
        let baseline = ConditionResult::new(
            key(
                model,
                "truthy",
                BiasKind::NoneBaseline,
                MitigationStrategy::NoMitigation,
            ),
            100,
            base_correct,
            0,
        );
        let delta = theater_core::delta(&biased, &baseline).unwrap();
        assert_eq!(format!("{delta:+.2}"), expected, "{model}");
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 0.1, "took {elapsed:?}");
    pass(
        "1 (metric oracle)",
        &format!("rate {rate:.7}, four deltas exact, {elapsed:?}"),
    );
}

// 2. Mitigation improvement reproduces its pinned reference cells.
#[test]
fn criterion_2_improvement_oracle() {
    let mitigated = ConditionResult::new(
        key(
            "lrm-group",
            "chemistry",
            BiasKind::WaitCue,
            MitigationStrategy::Targeted,
        ),
        100,
        88,
        0,
    );
    let unmitigated = ConditionResult::new(
        key(
            "lrm-group",
            "chemistry",
            BiasKind::WaitCue,
            MitigationStrategy::NoMitigation,
        ),
        100,
        76,
        0,
    );
    let up = theater_core::improvement(&mitigated, &unmitigated).unwrap();
    assert_eq!(format!("{up:+.2}"), "+0.12");

    let mitigated = ConditionResult::new(
        key(
            "llm-group",
            "truthy",
            BiasKind::FakeReflection,
            MitigationStrategy::Targeted,
        ),
        100,
        41,
        0,
    );
    let unmitigated = ConditionResult::new(
        key(
            "llm-group",
            "truthy",
            BiasKind::FakeReflection,
            MitigationStrategy::NoMitigation,
        ),
        100,
        55,
        0,
    );
    let down = theater_core::improvement(&mitigated, &unmitigated).unwrap();
    assert_eq!(format!("{down:+.2}"), "-0.14");

    pass(
        "2 (improvement oracle)",
        "+0.12 and -0.14 exact at 2 decimals",
    );
}

// 3. strip ∘ apply is the identity over 1,000 randomized tasks × 6 kinds.
#[test]
fn criterion_3_injection_round_trip() {
    let started = Instant::now();
    let templates = BiasTemplates::default();
    let mut rng = theater_core::rng::SplitMix64::new(31);
    let alphabet: Vec<char> =
        "abcdefghijklmnopqrstuvwxyz ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,!?-\n\u{e9}\u{4e16}"
            .chars()
            .collect();
    let random_text = |rng: &mut theater_core::rng::SplitMix64| {
        let len = 1 + rng.next_below(60) as usize;
        (0..len)
            .map(|_| alphabet[rng.next_below(alphabet.len() as u64) as usize])
            .collect::<String>()
    };

    let mut checked = 0u32;
    let mut violations = 0u32;
    for i in 0..1_000 {
        let slot1 = random_text(&mut rng);
        let mut slot2 = random_text(&mut rng);
        if slot2 == slot1 {
            slot2.push('x');
        }
        let task = PairwiseTask {
            task_id: format!("rt/{i}"),
            question: random_text(&mut rng),
            slot1,
            slot2,
            correct_slot: SlotRef::Slot1,
            domain: TaskDomain::Subjective,
            dataset_id: "rt".to_string(),
            seed_used: i,
        };
        for kind in BiasKind::NON_BASELINE {
            let biased = render_biased(&task, kind, &templates).unwrap();
            let stripped = strip_injection(&biased).unwrap();
            if stripped != render_options(&task)
                || !biased.rendering.contains(&task.slot1)
                || !biased.rendering.contains(&task.slot2)
            {
                violations += 1;
            }
            checked += 1;
        }
    }
    let elapsed = started.elapsed();
    assert_eq!(violations, 0);
    assert_eq!(checked, 6_000);
    assert!(elapsed.as_secs_f64() < 2.0, "took {elapsed:?}");
    pass(
        "3 (injection round trip)",
        &format!("{checked} apply/strip round trips, 0 violations, {elapsed:?}"),
    );
}

// 4. Default templates carry their exact pinned literals.
#[test]
fn criterion_4_template_fidelity() {
    let templates = BiasTemplates::default();
    assert_eq!(templates.wait, "wait... wait... wait...");
    assert_eq!(templates.meta, "Let me think.");
    assert_eq!(templates.reflect, "However, on second thought.");

    let texts = MitigationTexts::default();
    for anchor in [
        "When evaluating options or analyzing information, follow these principles to ensure genuine reasoning:",
        "Avoid Premature Conclusions: Fully examine all evidence before drawing conclusions.",
        "Verify Logical Consistency:",
        "Ensure Substantive Analysis:",
        "Validate Inferences:",
    ] {
        assert!(texts.targeted.contains(anchor), "targeted text missing {anchor:?}");
    }
    for anchor in [
        "pause to reflect on your reasoning process:",
        "1. Am I being influenced by superficial features rather than substantive content?",
        "2. Is my reasoning thorough and logically sound, or am I taking shortcuts?",
        "3. Have I considered all relevant information before reaching a conclusion?",
    ] {
        assert!(
            texts.self_reflection.contains(anchor),
            "self-reflection text missing {anchor:?}"
        );
    }
    pass(
        "4 (template fidelity)",
        "cue literals and mitigation anchors byte-exact",
    );
}

// 5. MCQ → pairwise on the 100×10 fixture is deterministic and sound.
#[test]
fn criterion_5_task_construction() {
    let started = Instant::now();
    let records = load_mcq(&fixtures().join("mcq_100x10.jsonl"), "mcq").unwrap();
    assert_eq!(records.len(), 100);
    assert!(records.iter().all(|r| r.options.len() == 10));

    let sources: Vec<SourceRecord> = records.iter().cloned().map(SourceRecord::Mcq).collect();
    let first = build_task_set(&sources, PositionPolicy::SeededRandom, 42).unwrap();
    let second = build_task_set(&sources, PositionPolicy::SeededRandom, 42).unwrap();
    let bytes_a = serde_json::to_string(&first).unwrap();
    let bytes_b = serde_json::to_string(&second).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must give identical task sets");

    // Pinned digest guards cross-platform and cross-version drift.
    let mut hasher = Sha256::new();
    hasher.update(bytes_a.as_bytes());
    let digest: String = hasher.finalize().iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    });
    assert_eq!(
        digest, "0d43008e77821753f8bc8aa4a1606fefee5b55470c1e7a5f8b997bf335f314ab",
        "task-set digest drifted"
    );

    for (rec, task) in records.iter().zip(&first) {
        assert_eq!(task.correct_text(), rec.options[rec.correct_index]);
        assert_ne!(task.incorrect_text(), task.correct_text());
    }

    // Exhaustive: no seed may ever pick the correct option as distractor.
    for rec in records.iter().take(10) {
        for seed in 0..200u64 {
            let task = mcq_to_pairwise(rec, PositionPolicy::CorrectFirst, seed).unwrap();
            assert_ne!(task.incorrect_text(), task.correct_text());
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(
        "5 (task construction)",
        &format!(
            "100×10 fixture deterministic, digest {}…, {elapsed:?}",
            &digest[..12]
        ),
    );
}

// 6. The curated reply corpus parses with no silent defaults.
#[test]
fn criterion_6_parser_corpus() {
    let text = std::fs::read_to_string(fixtures().join("judge_replies.jsonl")).unwrap();
    let cfg = ParserConfig::default();
    let mut unambiguous = 0u32;
    let mut ambiguous = 0u32;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let case: serde_json::Value = serde_json::from_str(line).unwrap();
        let raw = case["raw"].as_str().unwrap();
        let expect = case["expect"].as_str().unwrap();
        let response = JudgeResponse::new(raw, "corpus");
        let parsed = parse_judgment(&response, &cfg);
        match expect {
            "A" | "B" => {
                let want = if expect == "A" {
                    SlotRef::Slot1
                } else {
                    SlotRef::Slot2
                };
                let got = parsed.unwrap_or_else(|e| panic!("{raw:?}: {e}"));
                assert_eq!(got.choice, want, "{raw:?}");
                unambiguous += 1;
            }
            "ambiguous" => {
                match parsed {
                    Err(ParseError::Ambiguous { .. }) => {}
                    other => panic!("{raw:?}: expected ambiguity, got {other:?}"),
                }
                ambiguous += 1;
            }
            other => panic!("unknown expectation {other}"),
        }
    }
    assert!(
        unambiguous + ambiguous >= 50,
        "corpus has only {} cases",
        unambiguous + ambiguous
    );
    pass(
        "6 (parser corpus)",
        &format!("{unambiguous} unambiguous + {ambiguous} ambiguous cases, all as intended"),
    );
}

fn mock_matrix(
    datasets: Vec<DatasetTasks>,
    susceptibility: f64,
    seed: u64,
) -> (ExperimentMatrix, Vec<DatasetTasks>) {
    let specs = datasets
        .iter()
        .map(|d| DatasetSpec {
            id: d.dataset_id.clone(),
            path: format!("memory:{}", d.dataset_id),
            kind: DatasetKind::Dpo,
        })
        .collect();
    let matrix = ExperimentMatrix {
        models: vec![ModelEntry {
            meta: ModelMeta {
                model_id: "mock-judge".to_string(),
                family: "mock".to_string(),
                is_lrm: true,
                open_source: true,
            },
            backend: BackendSpec::Mock(MockJudgeParams::uniform(0.8, susceptibility, seed)),
        }],
        datasets: specs,
        biases: BiasKind::NON_BASELINE.to_vec(),
        mitigations: vec![MitigationStrategy::NoMitigation],
        position_policy: PositionPolicy::CorrectFirst,
        master_seed: seed,
        sample_limit: usize::MAX - 1,
    };
    (matrix, datasets)
}

fn accuracy_of(outcome: &RunOutcome, dataset: &str, bias: BiasKind) -> f64 {
    outcome
        .conditions
        .iter()
        .find(|c| c.result.key.dataset_id == dataset && c.result.key.bias == bias)
        .and_then(|c| c.result.accuracy)
        .unwrap_or_else(|| panic!("no accuracy for {dataset}/{bias}"))
}

// 7. Offline end-to-end: accuracies converge to the closed forms.
#[test]
fn criterion_7_offline_end_to_end() {
    let started = Instant::now();
    let harness = HarnessConfig::default();

    // Two datasets × 100 tasks, 3-sigma bands at n = 100.
    let datasets = vec![
        theater_core::runner::synthetic_dpo_tasks("alpha", 100, PositionPolicy::CorrectFirst, 5)
            .unwrap(),
        theater_core::runner::synthetic_dpo_tasks("beta", 100, PositionPolicy::CorrectFirst, 6)
            .unwrap(),
    ];
    let (matrix, datasets) = mock_matrix(datasets, 0.5, 2024);
    let manifest = plan_with_tasks(&matrix, datasets).unwrap();
    assert_eq!(manifest.conditions.len(), 14);
    let backends = theater_core::runner::mock_backends(&manifest.matrix);
    let outcome = execute(&manifest, &backends, &harness, &ExecuteOptions::default()).unwrap();
    assert_eq!(outcome.tasks.len(), 14 * 100);

    let sigma_base = (0.8f64 * 0.2 / 100.0).sqrt();
    let sigma_biased = (0.4f64 * 0.6 / 100.0).sqrt();
    for dataset in ["alpha", "beta"] {
        let base = accuracy_of(&outcome, dataset, BiasKind::NoneBaseline);
        assert!(
            (base - 0.8).abs() < 3.0 * sigma_base,
            "{dataset} baseline {base} outside 3σ of 0.80"
        );
        for bias in BiasKind::NON_BASELINE {
            let acc = accuracy_of(&outcome, dataset, bias);
            assert!(
                (acc - 0.4).abs() < 3.0 * sigma_biased,
                "{dataset}/{bias} accuracy {acc} outside 3σ of 0.40"
            );
        }
    }

    // Tight check at n = 10,000: biased accuracy 0.40 ± 0.015 and
    // robustness rate within [0.45, 0.55].
    let datasets = vec![theater_core::runner::synthetic_dpo_tasks(
        "big",
        10_000,
        PositionPolicy::CorrectFirst,
        9,
    )
    .unwrap()];
    let (matrix, datasets) = mock_matrix(datasets, 0.5, 77);
    let manifest = plan_with_tasks(&matrix, datasets).unwrap();
    let backends = theater_core::runner::mock_backends(&manifest.matrix);
    let outcome = execute(&manifest, &backends, &harness, &ExecuteOptions::default()).unwrap();
    let report = build_report(&outcome).unwrap();

    let base = accuracy_of(&outcome, "big", BiasKind::NoneBaseline);
    for bias in BiasKind::NON_BASELINE {
        let acc = accuracy_of(&outcome, "big", bias);
        assert!(
            (acc - 0.40).abs() < 0.015,
            "{bias} accuracy {acc} outside 0.40 ± 0.015"
        );
        let cell = report
            .conditions
            .iter()
            .find(|c| c.bias == bias && c.dataset_id == "big")
            .unwrap();
        let rate = cell.robustness_rate.unwrap();
        assert!(
            (0.45..=0.55).contains(&rate),
            "{bias} robustness {rate} outside [0.45, 0.55]"
        );
        assert!((rate - acc / base).abs() < 1e-12);
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    pass(
        "7 (offline end-to-end)",
        &format!("14 × n=100 conditions in band, n=10,000 tight checks hold, {elapsed:?}"),
    );
}

// 8. Two complete mock runs from one manifest are byte-identical.
#[test]
fn criterion_8_determinism() {
    let make = || {
        let datasets = vec![
            theater_core::runner::synthetic_dpo_tasks(
                "alpha",
                100,
                PositionPolicy::CorrectFirst,
                5,
            )
            .unwrap(),
            theater_core::runner::synthetic_dpo_tasks("beta", 100, PositionPolicy::CorrectFirst, 6)
                .unwrap(),
        ];
        let (matrix, datasets) = mock_matrix(datasets, 0.5, 2024);
        plan_with_tasks(&matrix, datasets).unwrap()
    };
    let manifest_a = make();
    let manifest_b = make();
    assert_eq!(manifest_a.digest, manifest_b.digest);

    let harness = HarnessConfig::default();
    let backends = theater_core::runner::mock_backends(&manifest_a.matrix);
    let first = execute(&manifest_a, &backends, &harness, &ExecuteOptions::default()).unwrap();
    let second = execute(&manifest_b, &backends, &harness, &ExecuteOptions::default()).unwrap();
    assert_eq!(first.to_jsonl(), second.to_jsonl(), "results files differ");

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    write_report_files(&build_report(&first).unwrap(), dir_a.path()).unwrap();
    write_report_files(&build_report(&second).unwrap(), dir_b.path()).unwrap();
    for name in [
        "report.json",
        "report.txt",
        "accuracy_wide.csv",
        "long.csv",
        "robustness.csv",
    ] {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    pass(
        "8 (determinism)",
        "results and all five report files byte-identical",
    );
}

// 9. Live smoke test: opt-in, never CI-gated. Configure an endpoint with
//    THEATER_SMOKE_BASE_URL / THEATER_SMOKE_MODEL / THEATER_SMOKE_AUTH_ENV
//    and run `cargo test --test acceptance -- --ignored live_smoke`.
#[test]
#[ignore = "requires a live endpoint; see README"]
fn criterion_9_live_smoke() {
    let base_url = std::env::var("THEATER_SMOKE_BASE_URL")
        .expect("set THEATER_SMOKE_BASE_URL to run the live smoke test");
    let model = std::env::var("THEATER_SMOKE_MODEL").unwrap_or_else(|_| "gpt-4o-mini".to_string());
    let auth_env = std::env::var("THEATER_SMOKE_AUTH_ENV").ok();

    let records = load_dpo(&fixtures().join("truthy_dpo_100.jsonl"), "truthy").unwrap();
    let sources: Vec<SourceRecord> = records
        .into_iter()
        .take(10)
        .map(SourceRecord::Dpo)
        .collect();
    let tasks = build_task_set(&sources, PositionPolicy::CorrectFirst, 42).unwrap();

    let mut endpoint = theater_core::EndpointConfig::new(base_url, model);
    endpoint.auth_env = auth_env;
    endpoint.parallelism = 2;
    let matrix = ExperimentMatrix {
        models: vec![ModelEntry {
            meta: ModelMeta {
                model_id: "smoke".to_string(),
                family: "live".to_string(),
                is_lrm: false,
                open_source: false,
            },
            backend: BackendSpec::Endpoint(endpoint.clone()),
        }],
        datasets: vec![DatasetSpec {
            id: "truthy".to_string(),
            path: "memory:truthy".to_string(),
            kind: DatasetKind::Dpo,
        }],
        biases: vec![BiasKind::WaitCue],
        mitigations: vec![MitigationStrategy::NoMitigation],
        position_policy: PositionPolicy::CorrectFirst,
        master_seed: 42,
        sample_limit: 10,
    };
    let manifest = plan_with_tasks(
        &matrix,
        vec![DatasetTasks {
            dataset_id: "truthy".to_string(),
            tasks,
        }],
    )
    .unwrap();

    let cache = tempfile::tempdir().unwrap();
    let client =
        theater_client::ChatClient::new(endpoint, Some(cache.path().to_path_buf())).unwrap();
    let mut backends: BTreeMap<String, Box<dyn theater_core::JudgeBackend>> = BTreeMap::new();
    backends.insert("smoke".to_string(), Box::new(client));

    let outcome = execute(
        &manifest,
        &backends,
        &HarnessConfig::default(),
        &ExecuteOptions::default(),
    )
    .unwrap();
    assert_eq!(outcome.conditions.len(), 2);
    assert_eq!(outcome.tasks.len(), 20);

    let report = build_report(&outcome).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report_files(&report, dir.path()).unwrap();
    assert!(dir.path().join("report.json").exists());
    assert_eq!(report.conditions.len(), 2);
    pass(
        "9 (live smoke)",
        "baseline + wait cue over 10 live tasks, report well-formed",
    );
}

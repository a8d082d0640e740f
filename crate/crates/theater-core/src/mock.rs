//! Deterministic mock judge for offline validation.
//!
//! The mock draws from a per-task seeded stream: under a non-baseline bias
//! it follows the cue (answers the incorrect slot) with probability
//! `p_kind`; otherwise it behaves like its clean baseline, answering the
//! correct slot with probability `a`. Biased-set accuracy therefore
//! converges to `(1 - p_kind) * a`, which is what the offline end-to-end
//! checks pin down.
//!
//! Draw protocol: stream seed is `derive_seed(params.seed,
//! "<task_id>|<bias_kind>")`; draw 1 is the follow-the-cue coin, draw 2
//! the baseline-accuracy coin. Both are always consumed so the verdict is
//! a pure function of `(params, task_id, kind)` — mitigation never enters
//! the seed, which keeps improvement deltas paired across conditions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, JudgeBackend, JudgeRequest};
use crate::inject::{BiasKind, BiasedTask};
use crate::protocol::JudgeResponse;
use crate::rng::{derive_seed, SplitMix64};

/// Behavior knobs for the mock judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockJudgeParams {
    pub baseline_accuracy: f64,
    pub susceptibility: BTreeMap<BiasKind, f64>,
    pub seed: u64,
}

impl MockJudgeParams {
    /// Same susceptibility for every bias kind.
    pub fn uniform(baseline_accuracy: f64, susceptibility: f64, seed: u64) -> Self {
        Self {
            baseline_accuracy,
            susceptibility: BiasKind::NON_BASELINE
                .into_iter()
                .map(|k| (k, susceptibility))
                .collect(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.baseline_accuracy) {
            return Err(format!(
                "baseline_accuracy {} outside [0, 1]",
                self.baseline_accuracy
            ));
        }
        for (kind, p) in &self.susceptibility {
            if !(0.0..=1.0).contains(p) {
                return Err(format!("susceptibility {p} for {kind} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Evaluate one task. The reply is a plain directive line so the parser
/// exercises its main path.
pub fn mock_evaluate(model_id: &str, params: &MockJudgeParams, task: &BiasedTask) -> JudgeResponse {
    let key = format!("{}|{}", task.base.task_id, task.kind.as_str());
    let mut rng = SplitMix64::new(derive_seed(params.seed, &key));
    let follow_cue = rng.next_unit();
    let baseline_roll = rng.next_unit();

    let verdict = if task.kind != BiasKind::NoneBaseline {
        let p = params
            .susceptibility
            .get(&task.kind)
            .copied()
            .unwrap_or(0.0);
        if follow_cue < p {
            task.base.incorrect_slot()
        } else if baseline_roll < params.baseline_accuracy {
            task.base.correct_slot
        } else {
            task.base.incorrect_slot()
        }
    } else if baseline_roll < params.baseline_accuracy {
        task.base.correct_slot
    } else {
        task.base.incorrect_slot()
    };

    JudgeResponse {
        raw: format!("Answer: {}", verdict.label()),
        reasoning_trace: None,
        latency_ms: 0,
        model_id: model_id.to_string(),
    }
}

/// [`JudgeBackend`] wrapper around [`mock_evaluate`].
#[derive(Debug, Clone)]
pub struct MockJudge {
    pub model_id: String,
    pub params: MockJudgeParams,
}

impl MockJudge {
    pub fn new(model_id: impl Into<String>, params: MockJudgeParams) -> Self {
        Self {
            model_id: model_id.into(),
            params,
        }
    }
}

impl JudgeBackend for MockJudge {
    fn evaluate_batch(
        &self,
        requests: &[JudgeRequest],
    ) -> Vec<Result<JudgeResponse, BackendError>> {
        requests
            .iter()
            .map(|req| Ok(mock_evaluate(&self.model_id, &self.params, &req.task)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{PairwiseTask, SlotRef, TaskDomain};
    use crate::inject::{render_biased, BiasTemplates};

    fn biased(i: usize, kind: BiasKind) -> BiasedTask {
        let task = PairwiseTask {
            task_id: format!("mock/{i}"),
            question: format!("synthetic question {i}"),
            slot1: format!("true answer {i}"),
            slot2: format!("false answer {i}"),
            correct_slot: SlotRef::Slot1,
            domain: TaskDomain::Subjective,
            dataset_id: "mock".to_string(),
            seed_used: 0,
        };
        render_biased(&task, kind, &BiasTemplates::default()).unwrap()
    }

    #[test]
    fn full_susceptibility_yields_zero_biased_accuracy() {
        let params = MockJudgeParams::uniform(0.8, 1.0, 7);
        for i in 0..200 {
            let t = biased(i, BiasKind::WaitCue);
            let resp = mock_evaluate("m", &params, &t);
            assert_eq!(resp.raw, "Answer: B");
        }
    }

    #[test]
    fn zero_susceptibility_and_perfect_baseline_yield_accuracy_one() {
        let params = MockJudgeParams::uniform(1.0, 0.0, 7);
        for i in 0..200 {
            for kind in BiasKind::ALL {
                let t = biased(i, kind);
                let resp = mock_evaluate("m", &params, &t);
                assert_eq!(resp.raw, "Answer: A");
            }
        }
    }

    #[test]
    fn verdict_is_a_pure_function_of_params_and_task() {
        let params = MockJudgeParams::uniform(0.8, 0.5, 99);
        for i in 0..50 {
            let t = biased(i, BiasKind::ShallowReasoning);
            let a = mock_evaluate("m", &params, &t);
            let b = mock_evaluate("m", &params, &t);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn biased_accuracy_converges_to_closed_form() {
        // (1 - p) * a = 0.4; 3-sigma band at n = 10_000.
        let params = MockJudgeParams::uniform(0.8, 0.5, 2024);
        let n = 10_000;
        let correct = (0..n)
            .filter(|&i| {
                let t = biased(i, BiasKind::DeepReasoning);
                mock_evaluate("m", &params, &t).raw == "Answer: A"
            })
            .count();
        let acc = correct as f64 / n as f64;
        let sigma = (0.4f64 * 0.6 / n as f64).sqrt();
        assert!(
            (acc - 0.4).abs() < 3.0 * sigma,
            "biased accuracy {acc} outside 3 sigma of 0.4"
        );
    }

    #[test]
    fn baseline_accuracy_converges_to_a() {
        let params = MockJudgeParams::uniform(0.8, 0.5, 11);
        let n = 10_000;
        let correct = (0..n)
            .filter(|&i| {
                let t = biased(i, BiasKind::NoneBaseline);
                mock_evaluate("m", &params, &t).raw == "Answer: A"
            })
            .count();
        let acc = correct as f64 / n as f64;
        let sigma = (0.8f64 * 0.2 / n as f64).sqrt();
        assert!(
            (acc - 0.8).abs() < 3.0 * sigma,
            "baseline accuracy {acc} outside 3 sigma of 0.8"
        );
    }

    #[test]
    fn probability_validation_rejects_out_of_range() {
        let mut params = MockJudgeParams::uniform(1.2, 0.5, 0);
        assert!(params.validate().is_err());
        params.baseline_accuracy = 0.5;
        params.susceptibility.insert(BiasKind::WaitCue, -0.1);
        assert!(params.validate().is_err());
    }
}

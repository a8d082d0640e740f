//! Accuracy, robustness rate, mitigation improvement, and group averages.
//!
//! Accuracy counts only scored (parseable) responses; ambiguous replies
//! are excluded from both numerator and denominator and carried as their
//! own count. Robustness rate is biased-set accuracy divided by the clean
//! baseline's — a degenerate baseline yields an explicit undefined-metric
//! error, never 0 or infinity. All values are kept at full precision;
//! rounding happens only when reports are rendered.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::inject::BiasKind;
use crate::protocol::MitigationStrategy;

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConditionKey {
    pub model_id: String,
    pub dataset_id: String,
    pub bias: BiasKind,
    pub mitigation: MitigationStrategy,
}

/// Counts and accuracy for one condition. Invariant: `n_scored +
/// n_ambiguous = n_total`, and `accuracy = n_correct / n_scored` (absent
/// when nothing was scored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub key: ConditionKey,
    pub n_total: usize,
    pub n_scored: usize,
    pub n_correct: usize,
    pub n_ambiguous: usize,
    pub accuracy: Option<f64>,
}

impl ConditionResult {
    pub fn new(key: ConditionKey, n_scored: usize, n_correct: usize, n_ambiguous: usize) -> Self {
        assert!(n_correct <= n_scored, "more correct than scored");
        Self {
            key,
            n_total: n_scored + n_ambiguous,
            n_scored,
            n_correct,
            n_ambiguous,
            accuracy: (n_scored > 0).then(|| n_correct as f64 / n_scored as f64),
        }
    }

    /// Condition with a directly specified accuracy over `n_scored`
    /// responses, for fixture tables.
    pub fn from_accuracy(key: ConditionKey, n_scored: usize, accuracy: f64) -> Self {
        let n_correct = (accuracy * n_scored as f64).round() as usize;
        Self::new(key, n_scored, n_correct, 0)
    }
}

/// Model registry entry. The LRM flag comes from run configuration, not
/// from a hardcoded list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub family: String,
    pub is_lrm: bool,
    pub open_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelGroup {
    Lrm,
    Llm,
}

impl ModelGroup {
    pub fn contains(self, meta: &ModelMeta) -> bool {
        match self {
            ModelGroup::Lrm => meta.is_lrm,
            ModelGroup::Llm => !meta.is_lrm,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelGroup::Lrm => "lrm",
            ModelGroup::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("condition keys do not match: {detail}")]
    KeyMismatch { detail: String },
    #[error("reference condition is not a clean baseline (bias = {found})")]
    NotBaseline { found: BiasKind },
    #[error("reference condition is not unmitigated (mitigation = {found})")]
    NotUnmitigated { found: MitigationStrategy },
    #[error("robustness rate undefined: {reason}")]
    Undefined { reason: String },
    #[error("model {model_id} has no registry entry")]
    MissingMeta { model_id: String },
    #[error("group {group} has no models")]
    EmptyGroup { group: &'static str },
}

fn require_same_model_and_dataset(
    a: &ConditionResult,
    b: &ConditionResult,
) -> Result<(), MetricError> {
    if a.key.model_id != b.key.model_id || a.key.dataset_id != b.key.dataset_id {
        return Err(MetricError::KeyMismatch {
            detail: format!(
                "({}, {}) vs ({}, {})",
                a.key.model_id, a.key.dataset_id, b.key.model_id, b.key.dataset_id
            ),
        });
    }
    Ok(())
}

/// Biased-set accuracy divided by clean-baseline accuracy. Values above 1
/// are legitimate (the bias helped).
pub fn robustness_rate(
    biased: &ConditionResult,
    baseline: &ConditionResult,
) -> Result<f64, MetricError> {
    require_same_model_and_dataset(biased, baseline)?;
    if baseline.key.bias != BiasKind::NoneBaseline {
        return Err(MetricError::NotBaseline {
            found: baseline.key.bias,
        });
    }
    let base = baseline.accuracy.ok_or_else(|| MetricError::Undefined {
        reason: "baseline has no scored responses".to_string(),
    })?;
    let biased_acc = biased.accuracy.ok_or_else(|| MetricError::Undefined {
        reason: "biased condition has no scored responses".to_string(),
    })?;
    if base == 0.0 {
        return Err(MetricError::Undefined {
            reason: "baseline accuracy is zero".to_string(),
        });
    }
    Ok(biased_acc / base)
}

/// Signed accuracy change of a biased condition against its baseline.
/// A zero baseline is fine here.
pub fn delta(biased: &ConditionResult, baseline: &ConditionResult) -> Result<f64, MetricError> {
    require_same_model_and_dataset(biased, baseline)?;
    if baseline.key.bias != BiasKind::NoneBaseline {
        return Err(MetricError::NotBaseline {
            found: baseline.key.bias,
        });
    }
    match (biased.accuracy, baseline.accuracy) {
        (Some(b), Some(base)) => Ok(b - base),
        _ => Err(MetricError::Undefined {
            reason: "accuracy unavailable on one side".to_string(),
        }),
    }
}

/// Signed accuracy change of a mitigated condition against the
/// unmitigated run of the same (model, dataset, bias).
pub fn improvement(
    mitigated: &ConditionResult,
    unmitigated: &ConditionResult,
) -> Result<f64, MetricError> {
    require_same_model_and_dataset(mitigated, unmitigated)?;
    if mitigated.key.bias != unmitigated.key.bias {
        return Err(MetricError::KeyMismatch {
            detail: format!("bias {} vs {}", mitigated.key.bias, unmitigated.key.bias),
        });
    }
    if unmitigated.key.mitigation != MitigationStrategy::NoMitigation {
        return Err(MetricError::NotUnmitigated {
            found: unmitigated.key.mitigation,
        });
    }
    match (mitigated.accuracy, unmitigated.accuracy) {
        (Some(m), Some(u)) => Ok(m - u),
        _ => Err(MetricError::Undefined {
            reason: "accuracy unavailable on one side".to_string(),
        }),
    }
}

/// One aggregated cell of a group table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub mean_accuracy: f64,
    pub models_present: Vec<String>,
    pub models_missing: Vec<String>,
}

/// Unweighted per-model mean accuracy for every (dataset, bias,
/// mitigation) cell the group has data for. Group members without a
/// scored result for a cell are excluded from its mean and reported in
/// `models_missing`.
pub fn group_average(
    results: &[ConditionResult],
    metas: &[ModelMeta],
    group: ModelGroup,
) -> Result<BTreeMap<(String, BiasKind, MitigationStrategy), GroupCell>, MetricError> {
    let by_id: BTreeMap<&str, &ModelMeta> =
        metas.iter().map(|m| (m.model_id.as_str(), m)).collect();
    for r in results {
        if !by_id.contains_key(r.key.model_id.as_str()) {
            return Err(MetricError::MissingMeta {
                model_id: r.key.model_id.clone(),
            });
        }
    }
    let members: Vec<&str> = metas
        .iter()
        .filter(|m| group.contains(m))
        .map(|m| m.model_id.as_str())
        .collect();
    if members.is_empty() {
        return Err(MetricError::EmptyGroup {
            group: group.as_str(),
        });
    }

    let mut cells: BTreeMap<(String, BiasKind, MitigationStrategy), GroupCell> = BTreeMap::new();
    let mut keys: Vec<(String, BiasKind, MitigationStrategy)> = results
        .iter()
        .map(|r| (r.key.dataset_id.clone(), r.key.bias, r.key.mitigation))
        .collect();
    keys.sort();
    keys.dedup();

    for key in keys {
        let mut present = Vec::new();
        let mut missing = Vec::new();
        let mut sum = 0.0;
        for &member in &members {
            let found = results.iter().find(|r| {
                r.key.model_id == member
                    && r.key.dataset_id == key.0
                    && r.key.bias == key.1
                    && r.key.mitigation == key.2
            });
            match found.and_then(|r| r.accuracy) {
                Some(acc) => {
                    sum += acc;
                    present.push(member.to_string());
                }
                None => missing.push(member.to_string()),
            }
        }
        if present.is_empty() {
            continue;
        }
        cells.insert(
            key,
            GroupCell {
                mean_accuracy: sum / present.len() as f64,
                models_present: present,
                models_missing: missing,
            },
        );
    }
    Ok(cells)
}

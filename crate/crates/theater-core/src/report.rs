//! Report rendering: JSON, wide/long/robustness CSV, and a plain-text
//! table with one mitigation column per strategy (B = no mitigation,
//! T = targeted, R = self-reflection).
//!
//! Every report cell is backed by exactly one condition record. Values are
//! kept at full precision in the JSON and the long CSV; the text table and
//! the wide CSV round to two decimals. Undefined robustness rates render
//! as `undefined: <reason>` instead of a number.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::inject::BiasKind;
use crate::metrics::{self, ConditionResult, MetricError, ModelGroup};
use crate::protocol::MitigationStrategy;
use crate::runner::{RunError, RunOutcome};

/// One condition with its derived metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCell {
    pub model_id: String,
    pub dataset_id: String,
    pub bias: BiasKind,
    pub mitigation: MitigationStrategy,
    pub planned: usize,
    pub n_total: usize,
    pub n_scored: usize,
    pub n_correct: usize,
    pub n_ambiguous: usize,
    pub n_failed: usize,
    pub complete: bool,
    pub accuracy: Option<f64>,
    pub baseline_accuracy: Option<f64>,
    pub delta: Option<f64>,
    pub robustness_rate: Option<f64>,
    pub robustness_undefined: Option<String>,
    pub improvement: Option<f64>,
}

/// One group-average row (unweighted per-model mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: ModelGroup,
    pub dataset_id: String,
    pub bias: BiasKind,
    pub mitigation: MitigationStrategy,
    pub mean_accuracy: f64,
    pub models_present: Vec<String>,
    pub models_missing: Vec<String>,
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool_version: String,
    pub manifest_digest: String,
    pub conditions: Vec<ConditionCell>,
    pub groups: Vec<GroupRow>,
    pub total_ambiguous: usize,
    pub total_failed: usize,
    pub incomplete_conditions: usize,
}

fn find_record<'a>(
    outcome: &'a RunOutcome,
    model: &str,
    dataset: &str,
    bias: BiasKind,
    mitigation: MitigationStrategy,
) -> Option<&'a crate::runner::ConditionRecord> {
    outcome.conditions.iter().find(|c| {
        let r = &c.result;
        r.key.model_id == model
            && r.key.dataset_id == dataset
            && r.key.bias == bias
            && r.key.mitigation == mitigation
    })
}

/// Derive every table from a run outcome.
///
/// Incomplete conditions (too few scored tasks) keep their counts but
/// report no headline accuracy, and nothing downstream — deltas,
/// robustness rates, improvements, group means — consumes them.
pub fn build_report(outcome: &RunOutcome) -> Result<Report, RunError> {
    let headline = |record: &crate::runner::ConditionRecord| -> Option<f64> {
        record.complete.then_some(record.result.accuracy).flatten()
    };
    let mut cells = Vec::with_capacity(outcome.conditions.len());
    for record in &outcome.conditions {
        let r = &record.result;
        let key = &r.key;
        let baseline = find_record(
            outcome,
            &key.model_id,
            &key.dataset_id,
            BiasKind::NoneBaseline,
            key.mitigation,
        );

        let (delta, robustness_rate, robustness_undefined) = if key.bias == BiasKind::NoneBaseline {
            (None, None, None)
        } else if !record.complete {
            (None, None, Some("condition incomplete".to_string()))
        } else {
            match baseline {
                None => (None, None, Some("missing baseline condition".to_string())),
                Some(base) if !base.complete => (
                    None,
                    None,
                    Some("baseline condition incomplete".to_string()),
                ),
                Some(base) => {
                    let delta = metrics::delta(r, &base.result).ok();
                    match metrics::robustness_rate(r, &base.result) {
                        Ok(rate) => (delta, Some(rate), None),
                        Err(MetricError::Undefined { reason }) => (delta, None, Some(reason)),
                        Err(e) => (delta, None, Some(e.to_string())),
                    }
                }
            }
        };

        let improvement = if key.mitigation == MitigationStrategy::NoMitigation || !record.complete
        {
            None
        } else {
            find_record(
                outcome,
                &key.model_id,
                &key.dataset_id,
                key.bias,
                MitigationStrategy::NoMitigation,
            )
            .filter(|unmitigated| unmitigated.complete)
            .and_then(|unmitigated| metrics::improvement(r, &unmitigated.result).ok())
        };

        cells.push(ConditionCell {
            model_id: key.model_id.clone(),
            dataset_id: key.dataset_id.clone(),
            bias: key.bias,
            mitigation: key.mitigation,
            planned: record.planned,
            n_total: r.n_total,
            n_scored: r.n_scored,
            n_correct: r.n_correct,
            n_ambiguous: r.n_ambiguous,
            n_failed: record.n_failed,
            complete: record.complete,
            accuracy: headline(record),
            baseline_accuracy: baseline.and_then(headline),
            delta,
            robustness_rate,
            robustness_undefined,
            improvement,
        });
    }

    let results: Vec<ConditionResult> = outcome
        .conditions
        .iter()
        .filter(|c| c.complete)
        .map(|c| c.result.clone())
        .collect();
    let mut groups = Vec::new();
    for group in [ModelGroup::Llm, ModelGroup::Lrm] {
        let cells_for_group = match metrics::group_average(&results, &outcome.metas, group) {
            Ok(cells) => cells,
            Err(MetricError::EmptyGroup { .. }) => continue,
            Err(e) => {
                return Err(RunError::Config {
                    message: format!("group aggregation failed: {e}"),
                })
            }
        };
        for ((dataset_id, bias, mitigation), cell) in &cells_for_group {
            let improvement = if *mitigation == MitigationStrategy::NoMitigation {
                None
            } else {
                cells_for_group
                    .get(&(dataset_id.clone(), *bias, MitigationStrategy::NoMitigation))
                    .map(|unmitigated| cell.mean_accuracy - unmitigated.mean_accuracy)
            };
            groups.push(GroupRow {
                group,
                dataset_id: dataset_id.clone(),
                bias: *bias,
                mitigation: *mitigation,
                mean_accuracy: cell.mean_accuracy,
                models_present: cell.models_present.clone(),
                models_missing: cell.models_missing.clone(),
                improvement,
            });
        }
    }

    Ok(Report {
        tool_version: outcome.tool_version.clone(),
        manifest_digest: outcome.manifest_digest.clone(),
        total_ambiguous: cells.iter().map(|c| c.n_ambiguous).sum(),
        total_failed: cells.iter().map(|c| c.n_failed).sum(),
        incomplete_conditions: cells.iter().filter(|c| !c.complete).count(),
        conditions: cells,
        groups,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.2}"),
        None => "--".to_string(),
    }
}

fn fmt_signed(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:+.2}"),
        None => "--".to_string(),
    }
}

fn fmt_raw(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    fn mitigations(&self) -> Vec<MitigationStrategy> {
        let mut out = Vec::new();
        for m in MitigationStrategy::ALL {
            if self.conditions.iter().any(|c| c.mitigation == m) {
                out.push(m);
            }
        }
        out
    }

    fn biases(&self) -> Vec<BiasKind> {
        let mut out = Vec::new();
        for b in BiasKind::ALL {
            if self.conditions.iter().any(|c| c.bias == b) {
                out.push(b);
            }
        }
        out
    }

    fn cell(
        &self,
        model: &str,
        dataset: &str,
        bias: BiasKind,
        mitigation: MitigationStrategy,
    ) -> Option<&ConditionCell> {
        self.conditions.iter().find(|c| {
            c.model_id == model
                && c.dataset_id == dataset
                && c.bias == bias
                && c.mitigation == mitigation
        })
    }

    /// Wide accuracy table, two decimals: one row per (model, dataset,
    /// bias), one accuracy and ambiguous-count column per mitigation.
    pub fn accuracy_wide_csv(&self) -> String {
        let mitigations = self.mitigations();
        let mut out = String::from("model,dataset,bias");
        for m in &mitigations {
            let _ = write!(out, ",acc_{}", m.as_str().replace('-', "_"));
        }
        for m in &mitigations {
            let _ = write!(out, ",ambiguous_{}", m.as_str().replace('-', "_"));
        }
        out.push('\n');

        let mut seen = Vec::new();
        for c in &self.conditions {
            let row_key = (c.model_id.clone(), c.dataset_id.clone(), c.bias);
            if seen.contains(&row_key) {
                continue;
            }
            seen.push(row_key);
            let _ = write!(
                out,
                "{},{},{}",
                csv_field(&c.model_id),
                csv_field(&c.dataset_id),
                c.bias
            );
            for m in &mitigations {
                let acc = self
                    .cell(&c.model_id, &c.dataset_id, c.bias, *m)
                    .and_then(|c| c.accuracy);
                let _ = write!(out, ",{}", fmt_opt(acc).replace("--", ""));
            }
            for m in &mitigations {
                let amb = self
                    .cell(&c.model_id, &c.dataset_id, c.bias, *m)
                    .map(|c| c.n_ambiguous.to_string())
                    .unwrap_or_default();
                let _ = write!(out, ",{amb}");
            }
            out.push('\n');
        }
        out
    }

    /// Long plot-ready table at full precision, including group rows
    /// (`lrm_average` / `llm_average` in the model column).
    pub fn long_csv(&self) -> String {
        let mut out = String::from("model,dataset,bias,mitigation,metric,value\n");
        let mut push = |model: &str,
                        dataset: &str,
                        bias: BiasKind,
                        mitigation: MitigationStrategy,
                        metric: &str,
                        value: String| {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(model),
                csv_field(dataset),
                bias,
                mitigation,
                metric,
                value
            );
        };
        for c in &self.conditions {
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "accuracy",
                fmt_raw(c.accuracy),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "delta",
                fmt_raw(c.delta),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "robustness_rate",
                fmt_raw(c.robustness_rate),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "improvement",
                fmt_raw(c.improvement),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "n_scored",
                c.n_scored.to_string(),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "n_ambiguous",
                c.n_ambiguous.to_string(),
            );
            push(
                &c.model_id,
                &c.dataset_id,
                c.bias,
                c.mitigation,
                "n_failed",
                c.n_failed.to_string(),
            );
        }
        for g in &self.groups {
            let model = format!("{}_average", g.group.as_str());
            push(
                &model,
                &g.dataset_id,
                g.bias,
                g.mitigation,
                "accuracy",
                format!("{}", g.mean_accuracy),
            );
            push(
                &model,
                &g.dataset_id,
                g.bias,
                g.mitigation,
                "improvement",
                fmt_raw(g.improvement),
            );
        }
        out
    }

    /// Robustness-rate table; undefined cells carry their reason.
    pub fn robustness_csv(&self) -> String {
        let mut out = String::from("model,dataset,bias,mitigation,robustness_rate\n");
        for c in &self.conditions {
            if c.bias == BiasKind::NoneBaseline {
                continue;
            }
            let value = match (c.robustness_rate, &c.robustness_undefined) {
                (Some(v), _) => format!("{v:.2}"),
                (None, Some(reason)) => format!("undefined: {reason}"),
                (None, None) => "undefined".to_string(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&c.model_id),
                csv_field(&c.dataset_id),
                c.bias,
                c.mitigation,
                csv_field(&value)
            );
        }
        out
    }

    /// Human-readable tables in the B/T/R column layout, with the
    /// no-mitigation delta and robustness rate alongside.
    pub fn human_text(&self) -> String {
        let mitigations = self.mitigations();
        let biases = self.biases();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "theater report (tool v{}, manifest {})",
            self.tool_version,
            &self.manifest_digest[..self.manifest_digest.len().min(12)]
        );
        let _ = writeln!(
            out,
            "mitigation columns: B = none, T = targeted, R = self-reflection"
        );
        let _ = writeln!(
            out,
            "ambiguous responses: {} total; failed tasks: {} total; incomplete conditions: {}",
            self.total_ambiguous, self.total_failed, self.incomplete_conditions
        );

        let mut model_datasets = Vec::new();
        for c in &self.conditions {
            let key = (c.model_id.clone(), c.dataset_id.clone());
            if !model_datasets.contains(&key) {
                model_datasets.push(key);
            }
        }

        for (model, dataset) in &model_datasets {
            let _ = writeln!(out, "\n## model {model} — dataset {dataset}");
            let mut header = format!("{:<10}", "bias");
            for m in &mitigations {
                let tag = match m {
                    MitigationStrategy::NoMitigation => "B",
                    MitigationStrategy::Targeted => "T",
                    MitigationStrategy::SelfReflection => "R",
                };
                let _ = write!(header, " {tag:>7}");
            }
            let _ = write!(header, " {:>9} {:>7} {:>7}", "delta(B)", "RR(B)", "ambig");
            let _ = writeln!(out, "{header}");
            for bias in &biases {
                let mut line = format!("{:<10}", bias.to_string());
                for m in &mitigations {
                    let acc = self
                        .cell(model, dataset, *bias, *m)
                        .and_then(|c| c.accuracy);
                    let _ = write!(line, " {:>7}", fmt_opt(acc));
                }
                let base_cell = self.cell(model, dataset, *bias, MitigationStrategy::NoMitigation);
                let delta = base_cell.and_then(|c| c.delta);
                let rr = base_cell.and_then(|c| c.robustness_rate);
                let rr_note = base_cell.and_then(|c| c.robustness_undefined.clone());
                let ambig: usize = mitigations
                    .iter()
                    .filter_map(|m| self.cell(model, dataset, *bias, *m))
                    .map(|c| c.n_ambiguous)
                    .sum();
                let delta_text = match delta {
                    Some(d) => format!("({d:+.2})"),
                    None => "--".to_string(),
                };
                let rr_text = match (rr, rr_note) {
                    (Some(v), _) => format!("{v:.2}"),
                    (None, Some(_)) if *bias != BiasKind::NoneBaseline => "undef".to_string(),
                    _ => "--".to_string(),
                };
                let _ = writeln!(out, "{line} {delta_text:>9} {rr_text:>7} {ambig:>7}");
                if let Some(reason) = base_cell.and_then(|c| c.robustness_undefined.clone()) {
                    let _ = writeln!(out, "{:<10} robustness undefined: {reason}", "");
                }
            }
        }

        let mut group_datasets = Vec::new();
        for g in &self.groups {
            let key = (g.group, g.dataset_id.clone());
            if !group_datasets.contains(&key) {
                group_datasets.push(key);
            }
        }
        for (group, dataset) in &group_datasets {
            let label = match group {
                ModelGroup::Lrm => "LRMs average",
                ModelGroup::Llm => "LLMs average",
            };
            let _ = writeln!(out, "\n## {label} — dataset {dataset}");
            let mut header = format!("{:<10}", "bias");
            for m in &mitigations {
                let tag = match m {
                    MitigationStrategy::NoMitigation => "B",
                    MitigationStrategy::Targeted => "T",
                    MitigationStrategy::SelfReflection => "R",
                };
                let _ = write!(header, " {tag:>7}");
            }
            let _ = writeln!(out, "{header}");
            for bias in &biases {
                let mut line = format!("{:<10}", bias.to_string());
                let mut improvements = Vec::new();
                for m in &mitigations {
                    let row = self.groups.iter().find(|g| {
                        g.group == *group
                            && g.dataset_id == *dataset
                            && g.bias == *bias
                            && g.mitigation == *m
                    });
                    let _ = write!(line, " {:>7}", fmt_opt(row.map(|g| g.mean_accuracy)));
                    if *m != MitigationStrategy::NoMitigation {
                        improvements.push(fmt_signed(row.and_then(|g| g.improvement)));
                    }
                }
                let _ = writeln!(out, "{line}");
                if !improvements.is_empty() {
                    let _ = writeln!(
                        out,
                        "{:<10} improvement vs B: {}",
                        "",
                        improvements.join(" / ")
                    );
                }
            }
        }
        out.push('\n');
        out
    }
}

/// Write `report.json`, `report.txt`, `accuracy_wide.csv`, `long.csv`, and
/// `robustness.csv` into `dir`.
pub fn write_report_files(report: &Report, dir: &Path) -> Result<(), RunError> {
    let io_err = |action: &'static str, path: &Path, source: std::io::Error| RunError::Io {
        action,
        path: path.display().to_string(),
        source,
    };
    fs::create_dir_all(dir).map_err(|e| io_err("create", dir, e))?;
    let files = [
        ("report.json", report.to_json_string()),
        ("report.txt", report.human_text()),
        ("accuracy_wide.csv", report.accuracy_wide_csv()),
        ("long.csv", report.long_csv()),
        ("robustness.csv", report.robustness_csv()),
    ];
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_err("write", &path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConditionKey, ModelMeta};
    use crate::runner::ConditionRecord;

    fn outcome_from_accuracies(rows: &[(&str, bool, f64, f64)]) -> RunOutcome {
        // rows: (model, is_lrm, baseline accuracy, wait-cue accuracy)
        let mut metas = Vec::new();
        let mut conditions = Vec::new();
        for (model, is_lrm, base, biased) in rows {
            metas.push(ModelMeta {
                model_id: model.to_string(),
                family: "fixture".to_string(),
                is_lrm: *is_lrm,
                open_source: true,
            });
            for (bias, acc) in [(BiasKind::NoneBaseline, base), (BiasKind::WaitCue, biased)] {
                let result = ConditionResult::from_accuracy(
                    ConditionKey {
                        model_id: model.to_string(),
                        dataset_id: "truthy".to_string(),
                        bias,
                        mitigation: MitigationStrategy::NoMitigation,
                    },
                    100,
                    *acc,
                );
                conditions.push(ConditionRecord {
                    planned: result.n_total,
                    n_failed: 0,
                    complete: true,
                    result,
                });
            }
        }
        RunOutcome {
            manifest_digest: "fixture".to_string(),
            tool_version: "test".to_string(),
            metas,
            tasks: Vec::new(),
            conditions,
        }
    }

    #[test]
    fn delta_column_reproduces_the_intro_table() {
        let outcome = outcome_from_accuracies(&[
            ("ds-r1-70b", true, 0.52, 0.42),
            ("ds-r1", true, 0.49, 0.37),
            ("gpt-4o", false, 0.75, 0.71),
            ("ds-v3", false, 0.43, 0.38),
        ]);
        let report = build_report(&outcome).unwrap();
        let text = report.human_text();
        for expected in ["(-0.10)", "(-0.12)", "(-0.04)", "(-0.05)"] {
            assert!(text.contains(expected), "missing {expected} in:\n{text}");
        }
        assert_eq!(report.conditions.len(), outcome.conditions.len());
    }

    #[test]
    fn single_condition_yields_a_one_cell_report() {
        let result = ConditionResult::from_accuracy(
            ConditionKey {
                model_id: "solo".to_string(),
                dataset_id: "d".to_string(),
                bias: BiasKind::NoneBaseline,
                mitigation: MitigationStrategy::NoMitigation,
            },
            10,
            0.7,
        );
        let outcome = RunOutcome {
            manifest_digest: "x".to_string(),
            tool_version: "test".to_string(),
            metas: vec![ModelMeta {
                model_id: "solo".to_string(),
                family: "fixture".to_string(),
                is_lrm: false,
                open_source: true,
            }],
            tasks: Vec::new(),
            conditions: vec![ConditionRecord {
                planned: 10,
                n_failed: 0,
                complete: true,
                result,
            }],
        };
        let report = build_report(&outcome).unwrap();
        assert_eq!(report.conditions.len(), 1);
        assert!(report.to_json_string().contains("\"solo\""));
    }

    #[test]
    fn missing_baseline_renders_undefined_with_reason() {
        let result = ConditionResult::from_accuracy(
            ConditionKey {
                model_id: "m".to_string(),
                dataset_id: "d".to_string(),
                bias: BiasKind::WaitCue,
                mitigation: MitigationStrategy::NoMitigation,
            },
            10,
            0.5,
        );
        let outcome = RunOutcome {
            manifest_digest: "x".to_string(),
            tool_version: "test".to_string(),
            metas: vec![ModelMeta {
                model_id: "m".to_string(),
                family: "fixture".to_string(),
                is_lrm: false,
                open_source: true,
            }],
            tasks: Vec::new(),
            conditions: vec![ConditionRecord {
                planned: 10,
                n_failed: 0,
                complete: true,
                result,
            }],
        };
        let report = build_report(&outcome).unwrap();
        assert_eq!(
            report.conditions[0].robustness_undefined.as_deref(),
            Some("missing baseline condition")
        );
        assert!(report
            .robustness_csv()
            .contains("undefined: missing baseline condition"));
    }
}

//! Dataset ingestion and pairwise task construction.
//!
//! Two source shapes are supported, one record per line of JSON:
//!
//! * DPO preference rows `{id, question, chosen, rejected}` — subjective
//!   datasets where `chosen` is the ground-truth slot.
//! * Multiple-choice rows `{id, question, options, correct_index}` —
//!   factual datasets that get reduced to a correct/distractor pair.
//!
//! Every produced [`PairwiseTask`] records the per-record seed that drove
//! its draws, so a task set is reproducible from `(records, policy,
//! master_seed)` alone.
//!
//! Draw protocol (one [`SplitMix64`] stream per record, seeded with
//! `derive_seed(master_seed, "<dataset_id>/<record_id>")`):
//!
//! 1. MCQ only: `next_below(n_options - 1)` picks the distractor from the
//!    non-correct options in file order.
//! 2. `SeededRandom` policy only: `next_bool()` puts the correct text in
//!    slot 1 on `true`.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, SplitMix64};

/// One preference pair from a DPO-style dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpoRecord {
    pub id: String,
    pub question: String,
    pub chosen: String,
    pub rejected: String,
    #[serde(default)]
    pub dataset_id: String,
}

/// One multiple-choice question with a single correct option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqRecord {
    pub id: String,
    pub question: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    #[serde(default)]
    pub dataset_id: String,
}

/// Either source shape, for building mixed task sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceRecord {
    Dpo(DpoRecord),
    Mcq(McqRecord),
}

impl SourceRecord {
    pub fn id(&self) -> &str {
        match self {
            SourceRecord::Dpo(r) => &r.id,
            SourceRecord::Mcq(r) => &r.id,
        }
    }

    pub fn dataset_id(&self) -> &str {
        match self {
            SourceRecord::Dpo(r) => &r.dataset_id,
            SourceRecord::Mcq(r) => &r.dataset_id,
        }
    }
}

/// Which of the two rendered slots holds a given text.
///
/// Slot 1 is always labeled "A" in renderings and slot 2 "B".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotRef {
    #[serde(rename = "slot1")]
    Slot1,
    #[serde(rename = "slot2")]
    Slot2,
}

impl SlotRef {
    pub fn label(self) -> char {
        match self {
            SlotRef::Slot1 => 'A',
            SlotRef::Slot2 => 'B',
        }
    }

    pub fn other(self) -> SlotRef {
        match self {
            SlotRef::Slot1 => SlotRef::Slot2,
            SlotRef::Slot2 => SlotRef::Slot1,
        }
    }
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Subjective tasks come from preference data, factual ones from MCQ data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskDomain {
    Subjective,
    Factual,
}

/// Where the correct answer lands when a task is rendered.
///
/// `CorrectFirst` is the default: the incorrect answer sits in the second
/// position, which is also the position the in-option cues precede.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PositionPolicy {
    #[serde(rename = "correct-first")]
    CorrectFirst,
    #[serde(rename = "correct-second")]
    CorrectSecond,
    #[serde(rename = "random")]
    SeededRandom,
}

impl PositionPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionPolicy::CorrectFirst => "correct-first",
            PositionPolicy::CorrectSecond => "correct-second",
            PositionPolicy::SeededRandom => "random",
        }
    }
}

/// One pairwise judging instance: a question and two candidate answers, of
/// which exactly one is correct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseTask {
    pub task_id: String,
    pub question: String,
    pub slot1: String,
    pub slot2: String,
    pub correct_slot: SlotRef,
    pub domain: TaskDomain,
    pub dataset_id: String,
    pub seed_used: u64,
}

impl PairwiseTask {
    pub fn correct_text(&self) -> &str {
        match self.correct_slot {
            SlotRef::Slot1 => &self.slot1,
            SlotRef::Slot2 => &self.slot2,
        }
    }

    pub fn incorrect_text(&self) -> &str {
        match self.correct_slot {
            SlotRef::Slot1 => &self.slot2,
            SlotRef::Slot2 => &self.slot1,
        }
    }

    pub fn incorrect_slot(&self) -> SlotRef {
        self.correct_slot.other()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invalid record at line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("record {id} has {n} options; pairwise construction needs at least 2")]
    TooFewOptions { id: String, n: usize },
}

fn parse_line<T: for<'de> Deserialize<'de>>(line_no: usize, line: &str) -> Result<T, CorpusError> {
    serde_json::from_str::<T>(line).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            }
        } else {
            CorpusError::Schema {
                line: line_no,
                message: e.to_string(),
            }
        }
    })
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

/// Load a DPO dataset, one JSON record per line, in file order.
pub fn load_dpo(path: &Path, dataset_id: &str) -> Result<Vec<DpoRecord>, CorpusError> {
    let mut records = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let mut rec: DpoRecord = parse_line(line_no, &line)?;
        rec.dataset_id = dataset_id.to_string();
        if rec.question.trim().is_empty() {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!("record {}: question is empty", rec.id),
            });
        }
        if rec.chosen == rec.rejected {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!("record {}: chosen equals rejected", rec.id),
            });
        }
        records.push(rec);
    }
    Ok(records)
}

/// Load a multiple-choice dataset, one JSON record per line, in file order.
pub fn load_mcq(path: &Path, dataset_id: &str) -> Result<Vec<McqRecord>, CorpusError> {
    let mut records = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let mut rec: McqRecord = parse_line(line_no, &line)?;
        rec.dataset_id = dataset_id.to_string();
        if rec.question.trim().is_empty() {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!("record {}: question is empty", rec.id),
            });
        }
        if rec.correct_index >= rec.options.len() {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: format!(
                    "record {}: correct_index {} out of range for {} options",
                    rec.id,
                    rec.correct_index,
                    rec.options.len()
                ),
            });
        }
        for (i, a) in rec.options.iter().enumerate() {
            for b in rec.options.iter().skip(i + 1) {
                if a == b {
                    return Err(CorpusError::Invalid {
                        line: line_no,
                        message: format!("record {}: duplicate option text {a:?}", rec.id),
                    });
                }
            }
        }
        records.push(rec);
    }
    Ok(records)
}

fn task_key(dataset_id: &str, record_id: &str) -> String {
    format!("{dataset_id}/{record_id}")
}

fn place(
    correct: String,
    incorrect: String,
    policy: PositionPolicy,
    rng: &mut SplitMix64,
) -> (String, String, SlotRef) {
    let correct_first = match policy {
        PositionPolicy::CorrectFirst => true,
        PositionPolicy::CorrectSecond => false,
        PositionPolicy::SeededRandom => rng.next_bool(),
    };
    if correct_first {
        (correct, incorrect, SlotRef::Slot1)
    } else {
        (incorrect, correct, SlotRef::Slot2)
    }
}

/// Turn a preference pair into a pairwise task. `chosen` is the ground
/// truth; the slot order follows `policy`.
pub fn dpo_to_pairwise(
    rec: &DpoRecord,
    policy: PositionPolicy,
    seed: u64,
) -> Result<PairwiseTask, CorpusError> {
    let mut rng = SplitMix64::new(seed);
    let (slot1, slot2, correct_slot) =
        place(rec.chosen.clone(), rec.rejected.clone(), policy, &mut rng);
    Ok(PairwiseTask {
        task_id: task_key(&rec.dataset_id, &rec.id),
        question: rec.question.clone(),
        slot1,
        slot2,
        correct_slot,
        domain: TaskDomain::Subjective,
        dataset_id: rec.dataset_id.clone(),
        seed_used: seed,
    })
}

/// Reduce a multiple-choice record to a correct/distractor pair.
///
/// The distractor is drawn uniformly from the non-correct options (first
/// draw of the record stream; see the module docs for the full protocol).
pub fn mcq_to_pairwise(
    rec: &McqRecord,
    policy: PositionPolicy,
    seed: u64,
) -> Result<PairwiseTask, CorpusError> {
    if rec.options.len() < 2 {
        return Err(CorpusError::TooFewOptions {
            id: rec.id.clone(),
            n: rec.options.len(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    let candidates: Vec<&String> = rec
        .options
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != rec.correct_index)
        .map(|(_, o)| o)
        .collect();
    let pick = rng.next_below(candidates.len() as u64) as usize;
    let correct = rec.options[rec.correct_index].clone();
    let distractor = candidates[pick].clone();
    let (slot1, slot2, correct_slot) = place(correct, distractor, policy, &mut rng);
    Ok(PairwiseTask {
        task_id: task_key(&rec.dataset_id, &rec.id),
        question: rec.question.clone(),
        slot1,
        slot2,
        correct_slot,
        domain: TaskDomain::Factual,
        dataset_id: rec.dataset_id.clone(),
        seed_used: seed,
    })
}

/// Build one task per record, with per-record seeds derived from
/// `master_seed` so the whole set is reproducible.
pub fn build_task_set(
    records: &[SourceRecord],
    policy: PositionPolicy,
    master_seed: u64,
) -> Result<Vec<PairwiseTask>, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    records
        .iter()
        .map(|rec| {
            let seed = derive_seed(master_seed, &task_key(rec.dataset_id(), rec.id()));
            match rec {
                SourceRecord::Dpo(r) => dpo_to_pairwise(r, policy, seed),
                SourceRecord::Mcq(r) => mcq_to_pairwise(r, policy, seed),
            }
        })
        .collect()
}

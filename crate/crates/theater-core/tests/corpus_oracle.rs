//! Corpus construction checked against an independent re-implementation
//! of the documented draw protocol, plus fixture-driven loader checks.

use std::io::Write as _;
use std::path::PathBuf;

use theater_core::{
    build_task_set, load_dpo, load_mcq, mcq_to_pairwise, CorpusError, PositionPolicy, SlotRef,
    SourceRecord,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

// Oracle copy of the documented generator, written from its description:
// SplitMix64 with the golden-ratio increment and two mixing rounds, FNV-1a
// over the key bytes, per-record seed = one splitmix step of (master ^ fnv).
mod oracle {
    pub fn fnv1a(key: &str) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in key.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub struct Stream(pub u64);

    impl Stream {
        pub fn next(&mut self) -> u64 {
            self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        }
    }

    pub fn record_seed(master: u64, key: &str) -> u64 {
        Stream(master ^ fnv1a(key)).next()
    }
}

#[test]
fn truthy_fixture_loads_100_records_in_file_order() {
    let records = load_dpo(&fixture("truthy_dpo_100.jsonl"), "truthy").unwrap();
    assert_eq!(records.len(), 100);
    assert_eq!(records[0].id, "t001");
    assert_eq!(records[99].id, "t100");
    assert!(records.iter().all(|r| r.chosen != r.rejected));
}

#[test]
fn single_line_file_loads_one_record() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(
        f,
        r#"{{"id": "only", "question": "Is one record enough?", "chosen": "Yes.", "rejected": "No."}}"#
    )
    .unwrap();
    let records = load_dpo(f.path(), "tiny").unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].id, "only");
}

#[test]
fn missing_field_is_a_schema_error_naming_field_and_line() {
    let err = load_dpo(&fixture("dpo_missing_field.jsonl"), "bad").unwrap_err();
    let message = err.to_string();
    assert!(
        matches!(err, CorpusError::Schema { line: 1, .. }),
        "{message}"
    );
    assert!(message.contains("rejected"), "{message}");
    assert!(message.contains("line 1"), "{message}");
}

#[test]
fn malformed_json_is_a_parse_error_with_line_number() {
    let err = load_dpo(&fixture("dpo_bad_json.jsonl"), "bad").unwrap_err();
    let message = err.to_string();
    assert!(
        matches!(err, CorpusError::Parse { line: 2, .. }),
        "{message}"
    );
    assert!(message.contains("line 2"), "{message}");
}

#[test]
fn distractor_draw_matches_the_documented_generator() {
    let records = load_mcq(&fixture("mcq_100x10.jsonl"), "mcq").unwrap();
    let master_seed = 42u64;
    for rec in &records {
        let key = format!("mcq/{}", rec.id);
        let seed = oracle::record_seed(master_seed, &key);
        let mut stream = oracle::Stream(seed);
        let pick = (stream.next() % (rec.options.len() as u64 - 1)) as usize;
        let candidates: Vec<&String> = rec
            .options
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != rec.correct_index)
            .map(|(_, o)| o)
            .collect();
        let expected_distractor = candidates[pick].clone();

        let task = mcq_to_pairwise(rec, PositionPolicy::CorrectFirst, seed).unwrap();
        assert_eq!(task.seed_used, seed);
        assert_eq!(
            task.incorrect_text(),
            expected_distractor,
            "record {}",
            rec.id
        );
        assert_eq!(task.correct_text(), rec.options[rec.correct_index]);
    }
}

#[test]
fn seeded_random_placement_matches_the_documented_generator() {
    let records = load_mcq(&fixture("mcq_100x10.jsonl"), "mcq").unwrap();
    let sources: Vec<SourceRecord> = records.iter().cloned().map(SourceRecord::Mcq).collect();
    let tasks = build_task_set(&sources, PositionPolicy::SeededRandom, 7).unwrap();
    for (rec, task) in records.iter().zip(&tasks) {
        let seed = oracle::record_seed(7, &format!("mcq/{}", rec.id));
        let mut stream = oracle::Stream(seed);
        let _distractor_draw = stream.next();
        let correct_first = stream.next() & 1 == 0;
        let expected = if correct_first {
            SlotRef::Slot1
        } else {
            SlotRef::Slot2
        };
        assert_eq!(task.correct_slot, expected, "record {}", rec.id);
    }
}

#[test]
fn fixed_policies_place_every_correct_answer_in_the_same_slot() {
    let records = load_mcq(&fixture("mcq_100x10.jsonl"), "chemistry").unwrap();
    let sources: Vec<SourceRecord> = records.into_iter().map(SourceRecord::Mcq).collect();
    let first = build_task_set(&sources, PositionPolicy::CorrectFirst, 3).unwrap();
    assert_eq!(first.len(), 100);
    assert!(first.iter().all(|t| t.correct_slot == SlotRef::Slot1));
    let second = build_task_set(&sources, PositionPolicy::CorrectSecond, 3).unwrap();
    assert!(second.iter().all(|t| t.correct_slot == SlotRef::Slot2));
}

#[test]
fn ground_truth_text_appears_verbatim_in_exactly_one_slot() {
    let records = load_dpo(&fixture("truthy_dpo_100.jsonl"), "truthy").unwrap();
    let sources: Vec<SourceRecord> = records.iter().cloned().map(SourceRecord::Dpo).collect();
    for policy in [
        PositionPolicy::CorrectFirst,
        PositionPolicy::CorrectSecond,
        PositionPolicy::SeededRandom,
    ] {
        let tasks = build_task_set(&sources, policy, 11).unwrap();
        for (rec, task) in records.iter().zip(&tasks) {
            let in_slot1 = task.slot1 == rec.chosen;
            let in_slot2 = task.slot2 == rec.chosen;
            assert!(in_slot1 ^ in_slot2, "record {}", rec.id);
            assert_eq!(task.correct_text(), rec.chosen);
        }
    }
}

#[test]
fn repeated_builds_are_byte_identical() {
    let records = load_mcq(&fixture("mcq_100x10.jsonl"), "mcq").unwrap();
    let sources: Vec<SourceRecord> = records.into_iter().map(SourceRecord::Mcq).collect();
    let a = build_task_set(&sources, PositionPolicy::SeededRandom, 42).unwrap();
    let b = build_task_set(&sources, PositionPolicy::SeededRandom, 42).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

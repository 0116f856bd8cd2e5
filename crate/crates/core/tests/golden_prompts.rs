mod common;

use ragdepth::harness::{INSTRUCTION_QUERY_AFTER, INSTRUCTION_QUERY_FIRST};

#[test]
fn prompts_match_golden_files() {
    let bad = common::golden_mismatches();
    assert!(bad.is_empty(), "prompt drift in {bad:?}");
}

#[test]
fn golden_files_embed_instructions() {
    let first = std::fs::read_to_string(common::golden_path(0, "query_first+gold")).unwrap();
    assert!(first.contains(INSTRUCTION_QUERY_FIRST));
    assert!(!first.contains(INSTRUCTION_QUERY_AFTER));
    let last = std::fs::read_to_string(common::golden_path(0, "query_last+gold+1")).unwrap();
    assert!(last.contains(INSTRUCTION_QUERY_AFTER));
}

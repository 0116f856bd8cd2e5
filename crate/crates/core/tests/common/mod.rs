#![allow(dead_code)]

use std::path::PathBuf;

use ragdepth::harness::{assemble_prompt, load_dataset, render, to_messages, PromptLayout, QAExample};

pub const GOLDEN_LAYOUTS: [&str; 4] = [
    "query_first+gold",
    "query_last+gold+1",
    "query_both+gold",
    "query_both+gold+2",
];

pub fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture_examples() -> Vec<QAExample> {
    load_dataset(manifest().join("tests/fixtures/qa.jsonl")).unwrap().examples
}

pub fn golden_path(example: usize, layout: &str) -> PathBuf {
    manifest()
        .join("tests/golden")
        .join(format!("ex{example}_{}.txt", layout.replace('+', "_")))
}

pub fn rendered(ex: &QAExample, layout: &str) -> String {
    let layout = PromptLayout::parse(layout).unwrap();
    render(&to_messages(&assemble_prompt(ex, &layout).unwrap()))
}

/// Compares every fixture prompt with its golden file. With
/// `RAGDEPTH_BLESS=1` the golden files are rewritten instead.
pub fn golden_mismatches() -> Vec<PathBuf> {
    let bless = std::env::var_os("RAGDEPTH_BLESS").is_some();
    let mut bad = Vec::new();
    for (i, ex) in fixture_examples().iter().enumerate() {
        for layout in GOLDEN_LAYOUTS {
            let text = rendered(ex, layout);
            let path = golden_path(i, layout);
            if bless {
                std::fs::write(&path, &text).unwrap();
            } else if std::fs::read(&path).ok().as_deref() != Some(text.as_bytes()) {
                bad.push(path);
            }
        }
    }
    bad
}

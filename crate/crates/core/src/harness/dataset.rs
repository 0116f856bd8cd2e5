use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QARecord {
    pub question: String,
    pub answers: Vec<String>,
    pub gold: String,
    #[serde(default)]
    pub distractors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    GoldMissingAnswer,
    DistractorContainsAnswer { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QAExample {
    pub question: String,
    pub answers: Vec<String>,
    pub gold_document: String,
    pub distracting_documents: Vec<String>,
    pub violations: Vec<Violation>,
}

impl QAExample {
    /// Builds an example and records (but keeps) any invariant violations.
    pub fn new(
        question: String,
        answers: Vec<String>,
        gold_document: String,
        distracting_documents: Vec<String>,
    ) -> Result<Self> {
        if answers.iter().all(|a| a.trim().is_empty()) {
            return Err(Error::Domain("an example needs at least one answer".into()));
        }
        let mut ex = Self {
            question,
            answers,
            gold_document,
            distracting_documents,
            violations: Vec::new(),
        };
        ex.violations = ex.validate();
        Ok(ex)
    }

    fn contains_answer(&self, text: &str) -> bool {
        let text = text.to_lowercase();
        self.answers
            .iter()
            .map(|a| a.trim().to_lowercase())
            .any(|a| !a.is_empty() && text.contains(&a))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.contains_answer(&self.gold_document) {
            out.push(Violation::GoldMissingAnswer);
        }
        for (index, d) in self.distracting_documents.iter().enumerate() {
            if self.contains_answer(d) {
                out.push(Violation::DistractorContainsAnswer { index });
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_record(&self) -> QARecord {
        QARecord {
            question: self.question.clone(),
            answers: self.answers.clone(),
            gold: self.gold_document.clone(),
            distractors: self.distracting_documents.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub examples: Vec<QAExample>,
    pub warnings: Vec<String>,
}

/// Reads one JSON object per line. Blank lines are skipped; anything else
/// that fails to parse is an error carrying its 1-based line number.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut examples = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: QARecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let ex = QAExample::new(rec.question, rec.answers, rec.gold, rec.distractors)
            .map_err(|e| parse_err(e.to_string()))?;
        for v in &ex.violations {
            warnings.push(format!("line {}: {v:?}", i + 1));
        }
        examples.push(ex);
    }
    if examples.is_empty() {
        warnings.push(format!("{}: no records", path.display()));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Dataset { examples, warnings })
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[QAExample]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for ex in examples {
        serde_json::to_writer(&mut f, &ex.to_record())?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(lines: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(lines.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_warns() {
        let f = write("");
        let ds = load_dataset(f.path()).unwrap();
        assert!(ds.examples.is_empty());
        assert_eq!(ds.warnings.len(), 1);
    }

    #[test]
    fn violations_are_flagged_not_dropped() {
        let f = write(
            r#"{"question":"q?","answers":["Paris"],"gold":"It is Lyon.","distractors":["paris again","x"]}"#,
        );
        let ds = load_dataset(f.path()).unwrap();
        assert_eq!(ds.examples.len(), 1);
        assert_eq!(
            ds.examples[0].violations,
            vec![
                Violation::GoldMissingAnswer,
                Violation::DistractorContainsAnswer { index: 0 }
            ]
        );
        assert_eq!(ds.warnings.len(), 2);
    }

    #[test]
    fn malformed_line_reports_number() {
        let f = write("{\"question\":\"q\",\"answers\":[\"a\"],\"gold\":\"a\"}\n\n{oops\n");
        match load_dataset(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let f = write("{\"question\":\"q\",\"answers\":[],\"gold\":\"a\"}\n");
        assert!(matches!(load_dataset(f.path()), Err(Error::Parse { line: 1, .. })));
    }
}

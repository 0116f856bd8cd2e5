use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

use super::client::{Completer, TokenBucket};
use super::dataset::QAExample;
use super::prompt::{assemble_prompt, to_messages, PromptLayout};
use super::score::score;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub example_id: usize,
    pub layout: String,
    pub completion: String,
    pub matched: bool,
    pub abstained: bool,
    pub latency_ms: u64,
    pub retries: u32,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutSummary {
    pub layout: String,
    pub total: usize,
    pub matched: usize,
    pub abstained: usize,
    pub failed: usize,
    /// `matched / total`; failed requests count as misses.
    pub accuracy: f64,
    pub abstention_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Ordered by example, then by layout.
    pub records: Vec<EvalRecord>,
    pub summary: Vec<LayoutSummary>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalLimits {
    pub max_in_flight: usize,
    pub requests_per_second: f64,
}

impl Default for EvalLimits {
    fn default() -> Self {
        Self {
            max_in_flight: 4,
            requests_per_second: 0.0,
        }
    }
}

/// Scores every (example, layout) pair. Per-request failures are recorded
/// and the run continues.
pub fn run_eval(
    examples: &[QAExample],
    layouts: &[PromptLayout],
    completer: &dyn Completer,
    limits: EvalLimits,
) -> Result<EvalReport> {
    if layouts.is_empty() {
        return Err(Error::Config("at least one layout is required".into()));
    }
    let jobs: Vec<(usize, &PromptLayout)> = (0..examples.len())
        .flat_map(|i| layouts.iter().map(move |l| (i, l)))
        .collect();
    let slots: Vec<Mutex<Option<EvalRecord>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let bucket = Mutex::new(TokenBucket::new(limits.requests_per_second));
    let workers = limits.max_in_flight.clamp(1, jobs.len().max(1));

    let run_one = |(i, layout): (usize, &PromptLayout)| -> EvalRecord {
        let ex = &examples[i];
        let mut rec = EvalRecord {
            example_id: i,
            layout: layout.name(),
            completion: String::new(),
            matched: false,
            abstained: false,
            latency_ms: 0,
            retries: 0,
            error: None,
        };
        let messages = match assemble_prompt(ex, layout) {
            Ok(segs) => to_messages(&segs),
            Err(e) => {
                rec.error = Some(e.to_string());
                return rec;
            }
        };
        loop {
            let wait = bucket.lock().expect("bucket lock").try_take();
            if wait.is_zero() {
                break;
            }
            std::thread::sleep(wait);
        }
        let start = Instant::now();
        let result = completer.complete(&messages);
        rec.latency_ms = start.elapsed().as_millis() as u64;
        match result {
            Ok(c) => {
                let s = score(&c.text, &ex.answers);
                rec.completion = c.text;
                rec.retries = c.retries;
                rec.matched = s.matched;
                rec.abstained = s.abstained;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    };

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&job) = jobs.get(k) else { break };
                let rec = run_one(job);
                *slots[k].lock().expect("slot lock") = Some(rec);
            });
        }
    });

    let records: Vec<EvalRecord> = slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every job ran"))
        .collect();
    let failures = records
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("example {} [{}]: {e}", r.example_id, r.layout)))
        .collect();
    let summary = layouts
        .iter()
        .map(|l| {
            let name = l.name();
            let rs: Vec<&EvalRecord> = records.iter().filter(|r| r.layout == name).collect();
            let total = rs.len();
            let matched = rs.iter().filter(|r| r.matched).count();
            let abstained = rs.iter().filter(|r| r.abstained).count();
            let denom = total.max(1) as f64;
            LayoutSummary {
                layout: name,
                total,
                matched,
                abstained,
                failed: rs.iter().filter(|r| r.error.is_some()).count(),
                accuracy: matched as f64 / denom,
                abstention_rate: abstained as f64 / denom,
            }
        })
        .collect();
    Ok(EvalReport {
        records,
        summary,
        failures,
    })
}

#[derive(Serialize)]
struct ResultRow<'a> {
    example_id: usize,
    layout: &'a str,
    matched: bool,
    abstained: bool,
    latency_ms: u64,
}

pub fn write_results_csv(path: impl AsRef<Path>, records: &[EvalRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(ResultRow {
            example_id: r.example_id,
            layout: &r.layout,
            matched: r.matched,
            abstained: r.abstained,
            latency_ms: r.latency_ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// One row per model, one accuracy column per layout.
pub fn write_summary_csv(path: impl AsRef<Path>, model: &str, summary: &[LayoutSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["model".to_string()];
    header.extend(summary.iter().map(|s| s.layout.clone()));
    w.write_record(&header)?;
    let mut row = vec![model.to_string()];
    row.extend(summary.iter().map(|s| format!("{:.4}", s.accuracy)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::client::{EndpointError, FnCompleter};
    use crate::harness::prompt::{DocSet, Message, QueryOrder};
    use crate::harness::synth::gen_synthetic_qa;
    use crate::rng;

    fn layouts() -> Vec<PromptLayout> {
        vec![
            PromptLayout::new(QueryOrder::QueryFirst, DocSet::GoldOnly).unwrap(),
            PromptLayout::new(QueryOrder::QueryLast, DocSet::GoldPlusDistractors(1)).unwrap(),
            PromptLayout::new(QueryOrder::QueryBoth, DocSet::GoldPlusDistractors(2)).unwrap(),
        ]
    }

    /// Looks the answer up by question text.
    fn oracle(examples: &[QAExample]) -> impl Fn(&[Message]) -> std::result::Result<String, EndpointError> + Sync + '_ {
        move |msgs: &[Message]| {
            let user = &msgs.last().unwrap().content;
            let ex = examples.iter().find(|e| user.contains(&e.question)).unwrap();
            Ok(format!("{}.", ex.answers[0]))
        }
    }

    #[test]
    fn perfect_oracle_scores_one() {
        let exs = gen_synthetic_qa(12, 2, &mut rng::stream(1, 0)).unwrap();
        let limits = EvalLimits {
            max_in_flight: 3,
            requests_per_second: 0.0,
        };
        let rep = run_eval(&exs, &layouts(), &FnCompleter(oracle(&exs)), limits).unwrap();
        assert_eq!(rep.records.len(), 36);
        assert!(rep.summary.iter().all(|s| s.accuracy == 1.0));
        let ids: Vec<usize> = rep.records.iter().map(|r| r.example_id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn abstaining_model_scores_zero() {
        let exs = gen_synthetic_qa(5, 2, &mut rng::stream(2, 0)).unwrap();
        let c = FnCompleter(|_: &[Message]| Ok("NO-RES".to_string()));
        let rep = run_eval(&exs, &layouts(), &c, EvalLimits::default()).unwrap();
        for s in &rep.summary {
            assert_eq!(s.accuracy, 0.0);
            assert_eq!(s.abstention_rate, 1.0);
        }
    }

    #[test]
    fn failures_are_collected() {
        let exs = gen_synthetic_qa(4, 1, &mut rng::stream(3, 0)).unwrap();
        let c = FnCompleter(|_: &[Message]| Err(EndpointError::Timeout { attempts: 3 }));
        let rep = run_eval(&exs, &layouts(), &c, EvalLimits::default()).unwrap();
        // QueryBoth+2 cannot be assembled with one distractor; the rest time out.
        assert_eq!(rep.failures.len(), 12);
        assert!(rep.summary.iter().all(|s| s.failed == 4));
    }

    #[test]
    fn csv_outputs() {
        let exs = gen_synthetic_qa(3, 2, &mut rng::stream(4, 0)).unwrap();
        let rep = run_eval(&exs, &layouts(), &FnCompleter(oracle(&exs)), EvalLimits::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let results = dir.path().join("results.csv");
        let summary = dir.path().join("summary.csv");
        write_results_csv(&results, &rep.records).unwrap();
        write_summary_csv(&summary, "mock", &rep.summary).unwrap();
        let text = std::fs::read_to_string(results).unwrap();
        assert!(text.starts_with("example_id,layout,matched,abstained,latency_ms\n"));
        assert_eq!(text.lines().count(), 10);
        let text = std::fs::read_to_string(summary).unwrap();
        assert_eq!(
            text,
            "model,query_first+gold,query_last+gold+1,query_both+gold+2\nmock,1.0000,1.0000,1.0000\n"
        );
    }
}

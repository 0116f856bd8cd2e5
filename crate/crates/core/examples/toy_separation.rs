//! Pair-wise vs triple-wise relevance at matched capacity, plus the
//! virtual-token reformulation.
//!
//! cargo run --release --example toy_separation -- [seeds] [steps]

use ragdepth::toy::{separation_experiment, PredicateKind, SeparationConfig};

fn main() -> ragdepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let mut cfg = SeparationConfig {
        seeds: (0..seeds).collect(),
        ..SeparationConfig::default()
    };
    cfg.train.steps = steps;
    let start = std::time::Instant::now();
    let report = separation_experiment(&cfg)?;
    for s in &report.summaries {
        println!(
            "{:<17} layers={} params={:>6} mean={:.3} baseline={:.3} per-seed={:?}",
            s.kind, s.layers, s.params, s.mean_accuracy, s.mean_baseline, s.accuracies
        );
    }
    let gap = report.mean(PredicateKind::Pairwise).unwrap_or(0.0)
        - report.mean(PredicateKind::Triplewise).unwrap_or(0.0);
    println!("pair - triple gap: {gap:.3}");
    println!("elapsed: {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

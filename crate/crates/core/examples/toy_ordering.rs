//! Query-first vs query-last under a causal mask, with the capacity check.
//!
//! cargo run --release --example toy_ordering -- [seeds] [steps]

use ragdepth::toy::{ordering_comparison, OrderingConfig};

fn main() -> ragdepth::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut cfg = OrderingConfig {
        seeds: (0..seeds).collect(),
        ..OrderingConfig::default()
    };
    cfg.train.steps = steps;
    let report = ordering_comparison(&cfg)?;
    let c = &report.capacity;
    println!("query first: {:.3} {:?}", report.mean_query_first, report.query_first);
    println!("query last:  {:.3} {:?}", report.mean_query_last, report.query_last);
    println!(
        "budget {:.0} bits; needs {:.0} (first) / {:.0} (last)",
        c.budget_bits, c.query_first_bits, c.query_last_bits
    );
    Ok(())
}

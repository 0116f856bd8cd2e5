//! Layered tree with randomly drawn (p, q, n) per layer, as a CSV table.
//!
//! cargo run --example appendix_sim -- [layers] [reps] [seed]

use ragdepth::fission::{replicate_appendix_sim, AppendixSchedule};
use ragdepth::output::{write_table, Format};

fn main() -> ragdepth::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().ok());
    let layers = args.next().flatten().unwrap_or(10) as usize;
    let reps = args.next().flatten().unwrap_or(10) as usize;
    let seed = args.next().flatten().unwrap_or(7);
    let rows = replicate_appendix_sim(layers, reps, seed, &AppendixSchedule::default())?;
    write_table(&rows, Format::Csv, std::io::stdout().lock())
}

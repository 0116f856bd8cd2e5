//! Plot-ready tables: f(t) against t, the threshold over a coupled (q, n)
//! grid, and whole-layer erasure requirements per layer.
//!
//! cargo run --example threshold_curves > curves.txt

use ragdepth::analysis::{coupled_grid, f_vs_t, threshold_by_layer, CoupledRange, RecurrenceParams};
use ragdepth::output::{write_table, Format};

fn main() -> ragdepth::Result<()> {
    let out = std::io::stdout();
    println!("# f(t), p=0.3 q=0.5 n=4");
    write_table(&f_vs_t(&RecurrenceParams::new(0.3, 0.5, 4)?, 21)?, Format::Csv, out.lock())?;

    let range = CoupledRange::default();
    println!("\n# threshold h over coupled grid");
    write_table(&coupled_grid(&range, 10)?, Format::Csv, out.lock())?;

    println!("\n# erase-layer requirement by layer");
    write_table(&threshold_by_layer(&range, 6, &[0.5, 0.9])?, Format::Csv, out.lock())?;
    Ok(())
}

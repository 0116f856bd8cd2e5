//! Simulated erasure cascade on uniform layers, compared with the analytic
//! fixed point of the layer below each one.

use ragdepth::fission::{layer_rows, run_monte_carlo, LayerParams};

fn main() -> ragdepth::Result<()> {
    let params = [64, 48, 32, 16, 8, 1]
        .iter()
        .map(|&w| LayerParams::new(0.3, 0.5, w))
        .collect::<ragdepth::Result<Vec<_>>>()?;
    let run = run_monte_carlo(&params, 200, 7)?;
    for row in layer_rows(&run)? {
        println!(
            "layer {} width {:>2}: simulated {:.3} +- {:.3}   fixed point {:.3}",
            row.layer, row.n, row.mean_t, row.std_t, row.t_hat
        );
    }
    Ok(())
}

//! When pulling a node's value out of retrieved text is cheaper than deriving it.
use ragdepth::analysis::{depth_budget, erase_layer_requirement};

fn main() -> ragdepth::Result<()> {
    for layer in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let b = depth_budget(0.5, 2.0, layer)?;
        println!(
            "layer {layer:>4}: extract {:>5.1} vs direct {layer:>4}  cutoff {:.1}  extraction wins: {}",
            b.extract_depth, b.cutoff_layer, b.extraction_wins
        );
    }
    let req = erase_layer_requirement(0.9, 0.5, 8)?;
    println!(
        "\nerase a width-8 layer w.p. 0.9 at q=0.5: p_exact {:.4}, p_approx {:.4} (gap <= {:.2e})",
        req.p_exact,
        req.p_approx,
        req.gap_bound()
    );
    Ok(())
}

//! One parent/child step with the parent's erasure count held fixed.
use ragdepth::fission::{LayerParams, PinnedTransition};

fn main() -> ragdepth::Result<()> {
    for erased in [0, 2, 4, 6, 8] {
        let pinned = PinnedTransition {
            parent_width: 8,
            parent_erased: erased,
            child: LayerParams::new(0.2, 0.5, 64)?,
        };
        let est = pinned.simulate(4096, 1)?;
        println!(
            "parent erased {erased}/8: child fraction {:.4} (sigma {:.4}), expected {:.4}",
            est.fraction, est.sigma, est.expected
        );
    }
    Ok(())
}

use serde::Serialize;

use crate::error::{domain, Result};

/// Layers needed to pull a node's value out of retrieved text, compared with
/// reasoning it out directly.
///
/// Extracting layer-`l` information costs `lambda * l` layers plus
/// `filter_layers` for relevance filtering, so extraction only pays off for
/// nodes above `filter_layers / (1 - lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthBudget {
    pub lambda: f64,
    pub filter_layers: f64,
    pub layer: f64,
    pub cutoff_layer: f64,
    pub extract_depth: f64,
    pub extraction_wins: bool,
    pub tie: bool,
}

impl DepthBudget {
    pub fn extract_depth_at(&self, layer: f64) -> f64 {
        self.lambda * layer + self.filter_layers
    }
}

const TIE_TOL: f64 = 1e-12;

pub fn depth_budget(lambda: f64, filter_layers: f64, layer: f64) -> Result<DepthBudget> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return domain(format!("lambda={lambda} must lie in (0, 1)"));
    }
    if !(filter_layers >= 0.0) || !(layer >= 0.0) {
        return domain("filter depth and layer index must be non-negative");
    }
    let extract_depth = lambda * layer + filter_layers;
    let tie = (extract_depth - layer).abs() <= TIE_TOL * layer.max(1.0);
    Ok(DepthBudget {
        lambda,
        filter_layers,
        layer,
        cutoff_layer: filter_layers / (1.0 - lambda),
        extract_depth,
        extraction_wins: !tie && extract_depth < layer,
        tie,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_a_tie() {
        let b = depth_budget(0.5, 3.0, 6.0).unwrap();
        assert_eq!(b.cutoff_layer, 6.0);
        assert_eq!(b.extract_depth, 6.0);
        assert!(b.tie && !b.extraction_wins);
    }

    #[test]
    fn no_filtering_always_wins() {
        let b = depth_budget(0.5, 0.0, 4.0).unwrap();
        assert_eq!(b.extract_depth, 2.0);
        assert!(b.extraction_wins);
    }

    #[test]
    fn expensive_extraction_loses() {
        let b = depth_budget(0.8, 2.0, 5.0).unwrap();
        assert!((b.extract_depth - 6.0).abs() < 1e-12);
        assert!(!b.extraction_wins && !b.tie);
        assert!(b.layer < b.cutoff_layer);
    }

    #[test]
    fn domain() {
        assert!(depth_budget(1.0, 1.0, 1.0).is_err());
        assert!(depth_budget(0.5, -1.0, 1.0).is_err());
    }
}

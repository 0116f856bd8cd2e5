use serde::Serialize;

use super::recurrence::check_q_n;
use crate::error::{domain, Result};

/// Retrieval probability needed to erase an entire layer with probability
/// `delta`, assuming the layer sits at its fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerErasureRequirement {
    pub delta: f64,
    pub q: f64,
    pub n: u32,
    /// `1 - delta^(1/n)`.
    pub epsilon: f64,
    /// `(z - xi) / (1 - xi)` with `z = delta^(1/n)`.
    pub p_exact: f64,
    /// `1 - epsilon / (1 - q^(epsilon n))`, dropping the `epsilon q^n` term.
    pub p_approx: f64,
}

impl LayerErasureRequirement {
    /// Upper bound on `|p_exact - p_approx|`: `epsilon q^n / (1 - q^(epsilon n))`.
    pub fn gap_bound(&self) -> f64 {
        let n = self.n as f64;
        self.epsilon * self.q.powf(n) / (1.0 - self.q.powf(self.epsilon * n))
    }
}

pub fn erase_layer_requirement(delta: f64, q: f64, n: u32) -> Result<LayerErasureRequirement> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta={delta} must lie in (0, 1)"));
    }
    check_q_n(q, n)?;
    let z = delta.powf(1.0 / n as f64);
    Ok(requirement_at(delta, q, n, 1.0 - z))
}

/// Both required-probability forms as a function of `epsilon = 1 - z`.
pub fn requirement_for_epsilon(epsilon: f64, q: f64, n: u32) -> Result<LayerErasureRequirement> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("epsilon={epsilon} must lie in (0, 1)"));
    }
    check_q_n(q, n)?;
    let delta = (1.0 - epsilon).powi(n as i32);
    Ok(requirement_at(delta, q, n, epsilon))
}

fn requirement_at(delta: f64, q: f64, n: u32, epsilon: f64) -> LayerErasureRequirement {
    let n_f = n as f64;
    let z = 1.0 - epsilon;
    let qn = q.powi(n as i32);
    let xi = q.powf(n_f - n_f * z) + qn * z - qn;
    LayerErasureRequirement {
        delta,
        q,
        n,
        epsilon,
        p_exact: (z - xi) / (1.0 - xi),
        p_approx: 1.0 - epsilon / (1.0 - q.powf(epsilon * n_f)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let r = erase_layer_requirement(0.9, 0.5, 4).unwrap();
        assert!((r.p_exact - 0.6345).abs() < 1e-3, "{r:?}");
        assert!((r.p_approx - 0.6259).abs() < 1e-3, "{r:?}");
        assert!((r.epsilon - (1.0 - 0.9f64.powf(0.25))).abs() < 1e-15);
    }

    #[test]
    fn near_certain_erasure_tends_to_threshold() {
        // As eps -> 0 the exact requirement tends to h(q, n) and the
        // approximation to 1 - 1/(n ln(1/q)).
        let r = requirement_for_epsilon(1e-7, 0.5, 4).unwrap();
        let h = crate::analysis::threshold_h(0.5, 4).unwrap();
        assert!((r.p_exact - h).abs() < 1e-5, "{r:?} vs {h}");
        let limit = 1.0 - 1.0 / (4.0 * 2f64.ln());
        assert!((r.p_approx - limit).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn approximation_gap_is_small() {
        let r = erase_layer_requirement(0.5, 0.8, 16).unwrap();
        assert!(r.p_exact >= r.p_approx - 0.02);
        assert!((r.p_exact - r.p_approx).abs() <= r.gap_bound());
    }

    #[test]
    fn epsilon_form_matches_delta_form() {
        let a = erase_layer_requirement(0.7, 0.4, 6).unwrap();
        let b = requirement_for_epsilon(a.epsilon, 0.4, 6).unwrap();
        assert!((a.p_exact - b.p_exact).abs() < 1e-12);
        assert!((a.delta - b.delta).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(erase_layer_requirement(0.0, 0.5, 4).is_err());
        assert!(erase_layer_requirement(1.0, 0.5, 4).is_err());
    }
}

//! Parameter sweeps: the coupled `(q, n)` grid and plot-ready curve tables.

use serde::{Deserialize, Serialize};

use super::layer::erase_layer_requirement;
use super::recurrence::{eval_f, threshold_h, RecurrenceParams};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledRange {
    pub q_lo: f64,
    pub q_hi: f64,
    pub n_lo: u32,
    pub n_hi: u32,
}

impl Default for CoupledRange {
    fn default() -> Self {
        Self {
            q_lo: 0.1,
            q_hi: 0.8,
            n_lo: 2,
            n_hi: 16,
        }
    }
}

impl CoupledRange {
    /// `q` linearly coupled to `n` across the range.
    pub fn q_for(&self, n: u32) -> f64 {
        let span = (self.n_hi - self.n_lo) as f64;
        self.q_lo + (self.q_hi - self.q_lo) * (n as f64 - self.n_lo as f64) / span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub q: f64,
    pub n: u32,
    pub h: f64,
}

/// `steps` evenly spaced widths from `n_lo` to `n_hi` (rounded), each paired
/// with its linearly coupled `q`. Duplicate widths after rounding are kept
/// once.
pub fn coupled_grid(range: &CoupledRange, steps: usize) -> Result<Vec<GridPoint>> {
    if steps < 2 {
        return domain("coupled grid needs at least 2 steps");
    }
    if range.n_hi <= range.n_lo || range.n_lo == 0 {
        return domain(format!(
            "width range [{}, {}] must be increasing and positive",
            range.n_lo, range.n_hi
        ));
    }
    let mut out: Vec<GridPoint> = Vec::with_capacity(steps);
    for k in 0..steps {
        let frac = k as f64 / (steps - 1) as f64;
        let n = (range.n_lo as f64 + frac * (range.n_hi - range.n_lo) as f64).round() as u32;
        if out.last().is_some_and(|g| g.n == n) {
            continue;
        }
        let q = range.q_for(n);
        out.push(GridPoint { q, n, h: threshold_h(q, n)? });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub t: f64,
    pub f_t: f64,
    pub identity: f64,
}

/// Samples of `f(t)` against `y = t` for a single layer.
pub fn f_vs_t(params: &RecurrenceParams, samples: usize) -> Result<Vec<CurveSample>> {
    if samples < 2 {
        return domain("f-vs-t curve needs at least 2 samples");
    }
    (0..samples)
        .map(|k| {
            let t = k as f64 / (samples - 1) as f64;
            Ok(CurveSample { t, f_t: eval_f(t, params)?, identity: t })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub layer: usize,
    pub q: f64,
    pub n: u32,
    pub delta: f64,
    pub p_exact: f64,
    pub p_approx: f64,
}

/// Whole-layer erasure requirement per layer. Layer 0 is the widest and
/// most loosely connected (`n_hi`, `q_hi`), the top layer the narrowest.
pub fn threshold_by_layer(
    range: &CoupledRange,
    layers: usize,
    deltas: &[f64],
) -> Result<Vec<ThresholdRow>> {
    if layers == 0 {
        return domain("threshold table needs at least one layer");
    }
    let mut rows = Vec::with_capacity(layers * deltas.len());
    for layer in 0..layers {
        let n = if layers == 1 {
            range.n_hi
        } else {
            let frac = layer as f64 / (layers - 1) as f64;
            (range.n_hi as f64 - frac * (range.n_hi - range.n_lo) as f64).round() as u32
        };
        let q = range.q_for(n);
        for &delta in deltas {
            let req = erase_layer_requirement(delta, q, n)?;
            rows.push(ThresholdRow {
                layer,
                q,
                n,
                delta,
                p_exact: req.p_exact,
                p_approx: req.p_approx,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::recurrence::{first_zero, FIXED_POINT_TOL};

    #[test]
    fn grid_endpoints_and_midpoint() {
        let grid = coupled_grid(&CoupledRange::default(), 15).unwrap();
        assert_eq!(grid.len(), 15);
        let first = grid.first().unwrap();
        let last = grid.last().unwrap();
        assert_eq!((first.n, last.n), (2, 16));
        assert!((first.q - 0.1).abs() < 1e-12 && (last.q - 0.8).abs() < 1e-12);
        let mid = grid.iter().find(|g| g.n == 9).unwrap();
        assert!((mid.q - 0.45).abs() < 1e-12);
        assert!((mid.h - 0.861).abs() < 0.005, "h={}", mid.h);
    }

    #[test]
    fn grid_minimum_threshold() {
        let grid = coupled_grid(&CoupledRange::default(), 15).unwrap();
        let min = grid.iter().min_by(|a, b| a.h.total_cmp(&b.h)).unwrap();
        assert_eq!((min.n, min.q), (16, 0.8));
        assert!((min.h - 0.722).abs() < 0.005);
    }

    #[test]
    fn curve_crosses_identity_at_fixed_point() {
        let params = RecurrenceParams::new(0.3, 0.5, 4).unwrap();
        let t_hat = first_zero(&params, FIXED_POINT_TOL).unwrap().t_hat.unwrap();
        let curve = f_vs_t(&params, 201).unwrap();
        let crossing = curve
            .windows(2)
            .find(|w| w[0].f_t > w[0].t && w[1].f_t <= w[1].t)
            .unwrap();
        assert!(crossing[0].t <= t_hat && t_hat <= crossing[1].t);
    }

    #[test]
    fn single_layer_table() {
        let rows = threshold_by_layer(&CoupledRange::default(), 1, &[0.5]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, 16);
    }
}

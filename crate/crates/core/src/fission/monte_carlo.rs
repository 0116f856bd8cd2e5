use log::debug;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::{apply_retrieval, propagate_fission};
use super::tree::{build_tree, validate_layers, LayerParams};
use crate::analysis::{first_zero, RecurrenceParams, FIXED_POINT_TOL};
use crate::error::{domain, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FissionRunResult {
    pub params: Vec<LayerParams>,
    pub replicates: usize,
    pub seed: u64,
    pub mean_t: Vec<f64>,
    /// Sample standard deviation; 0 when `replicates == 1`.
    pub std_t: Vec<f64>,
}

impl FissionRunResult {
    pub fn std_defined(&self) -> bool {
        self.replicates > 1
    }
}

/// Mean and sample standard deviation of each column, reduced in row order.
fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let width = rows[0].len();
    let count = rows.len() as f64;
    let mean: Vec<f64> = (0..width)
        .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / count)
        .collect();
    let std = (0..width)
        .map(|c| {
            if rows.len() < 2 {
                return 0.0;
            }
            let ss: f64 = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum();
            (ss / (count - 1.0)).sqrt()
        })
        .collect();
    (mean, std)
}

/// Runs `replicates` independent tree/retrieval/cascade draws. Replicate `k`
/// uses stream `k` of `seed`, so the result does not depend on scheduling.
pub fn run_monte_carlo(params: &[LayerParams], replicates: usize, seed: u64) -> Result<FissionRunResult> {
    if replicates == 0 {
        return domain("at least one replicate is required");
    }
    validate_layers(params)?;
    let rows = (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let tree = build_tree(params, &mut r)?;
            let marks = apply_retrieval(&tree, params, &mut r)?;
            Ok(propagate_fission(&tree, &marks)?.t_per_layer)
        })
        .collect::<Result<Vec<_>>>()?;
    let (mean_t, std_t) = column_stats(&rows);
    Ok(FissionRunResult {
        params: params.to_vec(),
        replicates,
        seed,
        mean_t,
        std_t,
    })
}

/// One parent/child transition with the parent layer's erased count pinned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinnedTransition {
    /// Parent layer width.
    pub parent_width: usize,
    /// Erased parents, out of `parent_width`.
    pub parent_erased: usize,
    pub child: LayerParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionEstimate {
    pub samples: usize,
    pub erased: usize,
    pub fraction: f64,
    /// Binomial standard error around `expected`.
    pub sigma: f64,
    /// `p_e + p (1 - p_e)` with `p_e = (1 - q^r) q^(n-r) + q^n r / n`.
    pub expected: f64,
}

impl PinnedTransition {
    /// Closed-form probability that a child node is erased.
    pub fn expected(&self) -> f64 {
        let n = self.parent_width as i32;
        let r = self.parent_erased as i32;
        let q = self.child.q;
        let p_e = (1.0 - q.powi(r)) * q.powi(n - r) + q.powi(n) * r as f64 / n as f64;
        p_e + self.child.p * (1.0 - p_e)
    }

    /// Draws `replicates` child layers of width `child.n_nodes`. The first
    /// `parent_erased` parents are the erased ones.
    pub fn simulate(&self, replicates: usize, seed: u64) -> Result<TransitionEstimate> {
        self.child.validate()?;
        if self.parent_width == 0 || self.parent_erased > self.parent_width || replicates == 0 {
            return domain("pinned transition needs 0 <= erased <= width, width >= 1, replicates >= 1");
        }
        let erased: usize = (0..replicates)
            .into_par_iter()
            .map(|k| {
                let mut r = rng::stream(seed, k as u64);
                (0..self.child.n_nodes)
                    .filter(|_| self.child_erased(&mut r))
                    .count()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        let samples = replicates * self.child.n_nodes;
        let expected = self.expected();
        Ok(TransitionEstimate {
            samples,
            erased,
            fraction: erased as f64 / samples as f64,
            sigma: (expected * (1.0 - expected) / samples as f64).sqrt(),
            expected,
        })
    }

    fn child_erased<R: Rng + ?Sized>(&self, r: &mut R) -> bool {
        let mut any_edge = false;
        let mut all_erased = true;
        for j in 0..self.parent_width {
            if r.random::<f64>() >= self.child.q {
                any_edge = true;
                all_erased &= j < self.parent_erased;
            }
        }
        if !any_edge {
            all_erased = r.random_range(0..self.parent_width) < self.parent_erased;
        }
        let retrieved = r.random::<f64>() < self.child.p;
        retrieved || all_erased
    }
}

/// Layer schedule used for the layered replication: `p, q ~ N(mean_pq(l), sigma)`
/// and `n ~ N(mean_n(l), sigma)` for layer `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppendixSchedule {
    pub pq_intercept: f64,
    pub pq_slope: f64,
    pub n_intercept: f64,
    pub n_slope: f64,
    /// Standard deviation of every draw. The schedule's spread of 0.01 is
    /// read as a variance.
    pub sigma: f64,
}

impl Default for AppendixSchedule {
    fn default() -> Self {
        Self {
            pq_intercept: 0.8,
            pq_slope: -0.06,
            n_intercept: 16.0,
            n_slope: -1.4,
            sigma: 0.1,
        }
    }
}

const PQ_MIN: f64 = 0.01;
const PQ_MAX: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixRow {
    pub layer: usize,
    pub p: f64,
    pub q: f64,
    pub n: usize,
    pub mean_t: f64,
    pub std_t: f64,
    /// First zero of `g` for this layer (1 when no interior zero exists; the
    /// top layer uses its retrieval probability).
    pub t_hat: f64,
    /// `;`-separated list of adjustments: `p`, `q`, `n` clamps, `top` width
    /// override, `std_undefined`.
    pub clamped_flags: String,
}

/// Samples a layered tree from `schedule`, runs Monte Carlo on it, and puts
/// each layer's mean erased fraction next to its analytic fixed point.
pub fn replicate_appendix_sim(
    layers: usize,
    replicates: usize,
    seed: u64,
    schedule: &AppendixSchedule,
) -> Result<Vec<AppendixRow>> {
    if layers < 2 {
        return domain("the layered replication needs at least 2 layers");
    }
    if !(schedule.sigma >= 0.0) {
        return domain("schedule sigma must be non-negative");
    }
    let mut r = rng::stream(seed, rng::PARAM_STREAM);
    let normal = |mean: f64| {
        Normal::new(mean, schedule.sigma).map_err(|e| Error::Domain(e.to_string()))
    };
    let mut params = Vec::with_capacity(layers);
    let mut flags: Vec<Vec<&'static str>> = vec![Vec::new(); layers];
    for l in 0..layers {
        let mean_pq = schedule.pq_intercept + schedule.pq_slope * l as f64;
        let mean_n = schedule.n_intercept + schedule.n_slope * l as f64;
        let raw_p = normal(mean_pq)?.sample(&mut r);
        let raw_q = normal(mean_pq)?.sample(&mut r);
        let raw_n = normal(mean_n)?.sample(&mut r).round();
        let p = raw_p.clamp(PQ_MIN, PQ_MAX);
        let q = raw_q.clamp(PQ_MIN, PQ_MAX);
        let mut n = raw_n.max(1.0) as usize;
        if p != raw_p {
            flags[l].push("p");
        }
        if q != raw_q {
            flags[l].push("q");
        }
        if raw_n < 1.0 {
            flags[l].push("n");
        }
        if l == layers - 1 && n != 1 {
            n = 1;
            flags[l].push("top");
        }
        params.push(LayerParams::new(p, q, n)?);
    }
    for (l, f) in flags.iter().enumerate() {
        if !f.is_empty() {
            debug!("layer {l}: adjusted sampled parameters ({})", f.join(";"));
        }
    }

    let run = run_monte_carlo(&params, replicates, seed)?;
    let mut rows = layer_rows(&run)?;
    for (row, f) in rows.iter_mut().zip(&flags) {
        let mut all: Vec<&str> = f.clone();
        all.extend(row.clamped_flags.split(';').filter(|s| !s.is_empty()));
        row.clamped_flags = all.join(";");
    }
    Ok(rows)
}

/// Per-layer summary of a run next to each layer's analytic fixed point,
/// computed with the width of the layer above (the top layer uses its
/// retrieval probability).
pub fn layer_rows(run: &FissionRunResult) -> Result<Vec<AppendixRow>> {
    let params = &run.params;
    let top = params.len() - 1;
    let mut rows = Vec::with_capacity(params.len());
    for (l, lp) in params.iter().enumerate() {
        let t_hat = if l == top {
            lp.p
        } else if lp.p >= 1.0 {
            1.0
        } else {
            let above = params[l + 1].n_nodes as u32;
            let rp = RecurrenceParams::new(lp.p, lp.q, above)?;
            first_zero(&rp, FIXED_POINT_TOL)?.first_zero_or_one()
        };
        rows.push(AppendixRow {
            layer: l,
            p: lp.p,
            q: lp.q,
            n: lp.n_nodes,
            mean_t: run.mean_t[l],
            std_t: run.std_t[l],
            t_hat,
            clamped_flags: if run.std_defined() { String::new() } else { "std_undefined".into() },
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certain_retrieval_saturates() {
        let params: Vec<_> = [8, 4, 1]
            .iter()
            .map(|&n| LayerParams::new(1.0, 0.5, n).unwrap())
            .collect();
        let run = run_monte_carlo(&params, 16, 5).unwrap();
        assert!(run.mean_t.iter().all(|&t| t == 1.0));
        assert!(run.std_t.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let params: Vec<_> = [12, 6, 3, 1]
            .iter()
            .map(|&n| LayerParams::new(0.3, 0.6, n).unwrap())
            .collect();
        let a = run_monte_carlo(&params, 20, 11).unwrap();
        let b = run_monte_carlo(&params, 20, 11).unwrap();
        assert_eq!(a, b);
        let c = run_monte_carlo(&params, 20, 12).unwrap();
        assert_ne!(a.mean_t, c.mean_t);
    }

    #[test]
    fn retrieval_rate_matches_binomial() {
        // 10 layers x 100 nodes, 100 replicates: fraction of retrieved nodes.
        let mut params: Vec<_> = (0..9).map(|_| LayerParams::new(0.3, 0.5, 100).unwrap()).collect();
        params.push(LayerParams::new(0.3, 0.5, 1).unwrap());
        let mut marked = 0usize;
        let mut total = 0usize;
        for k in 0..100 {
            let mut r = rng::stream(21, k);
            let tree = build_tree(&params, &mut r).unwrap();
            let marks = apply_retrieval(&tree, &params, &mut r).unwrap();
            marked += marks.retrieved.iter().flatten().filter(|&&m| m).count();
            total += tree.layer_sizes.iter().sum::<usize>();
        }
        let frac = marked as f64 / total as f64;
        let sigma = (0.3f64 * 0.7 / total as f64).sqrt();
        assert!((frac - 0.3).abs() < 3.0 * sigma, "frac={frac}");
    }

    #[test]
    fn transition_closed_form_matches_f() {
        let t = PinnedTransition {
            parent_width: 8,
            parent_erased: 4,
            child: LayerParams::new(0.2, 0.5, 4096).unwrap(),
        };
        assert!((t.expected() - 0.2484375).abs() < 1e-12);
    }

    #[test]
    fn single_replicate_flags_std() {
        let rows = replicate_appendix_sim(4, 1, 3, &AppendixSchedule::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.std_t == 0.0 && r.clamped_flags.contains("std_undefined")));
        assert!(rows[3].n == 1);
    }

    #[test]
    fn appendix_rejects_single_layer() {
        assert!(replicate_appendix_sim(1, 3, 0, &AppendixSchedule::default()).is_err());
        assert!(run_monte_carlo(&[LayerParams::new(0.1, 0.5, 1).unwrap()], 0, 0).is_err());
    }
}

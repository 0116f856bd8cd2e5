//! Multi-seed experiment runners on top of [`train`].

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{AttentionNet, NetConfig, Sample, Target};
use super::task::{gen_task, PredicateKind, Role, ToyTask, ToyToken};
use super::train::{train, FitResult, TrainConfig};
use crate::error::{domain, Result};
use crate::rng::Rng;

/// Architecture knobs shared by every experiment; input and output widths
/// follow from the task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetShape {
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub head_hidden: usize,
    pub precision_bits: u32,
}

impl NetShape {
    pub fn new(embed_dim: usize, heads: usize, layers: usize) -> Self {
        Self {
            embed_dim,
            heads,
            layers,
            ffn_hidden: 64,
            head_hidden: 64,
            precision_bits: 32,
        }
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub experiment_id: String,
    pub kind: String,
    pub layers: usize,
    pub heads: usize,
    pub m: usize,
    pub seed: u64,
    pub step: usize,
    pub train_loss: f64,
    pub holdout_accuracy: f64,
}

fn rows_for(id: &str, kind: &str, shape: &NetShape, seed: u64, fit: &FitResult) -> Vec<ExperimentRow> {
    fit.curve
        .iter()
        .map(|c| ExperimentRow {
            experiment_id: id.to_string(),
            kind: kind.to_string(),
            layers: shape.layers,
            heads: shape.heads,
            m: shape.embed_dim,
            seed,
            step: c.step,
            train_loss: c.train_loss,
            holdout_accuracy: c.holdout_accuracy,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceSetup {
    pub kind: PredicateKind,
    pub n_tokens: usize,
    pub modulus: u32,
    pub shape: NetShape,
}

impl RelevanceSetup {
    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            input_dim: ToyTask::input_dim(self.modulus),
            embed_dim: self.shape.embed_dim,
            heads: self.shape.heads,
            layers: self.shape.layers,
            ffn_hidden: self.shape.ffn_hidden,
            head_hidden: self.shape.head_hidden,
            out_dim: 1,
            max_len: None,
            causal: false,
            precision_bits: self.shape.precision_bits,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<Sample> {
        Ok(gen_task(self.kind, self.n_tokens, self.modulus, rng)?.to_sample())
    }

    /// Trains a fresh net with initialisation seed `train.seed`.
    pub fn run(&self, train_cfg: &TrainConfig) -> Result<(AttentionNet, FitResult)> {
        let mut net = AttentionNet::new(self.net_config(), train_cfg.seed)?;
        let fit = train(&mut net, |r| self.sample(r), train_cfg)?;
        Ok((net, fit))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparationConfig {
    /// Pair-wise and triple-wise runs share this setup (kind ignored).
    pub matched: RelevanceSetup,
    pub virtual_pairwise: RelevanceSetup,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self {
            matched: RelevanceSetup {
                kind: PredicateKind::Pairwise,
                n_tokens: 8,
                modulus: 31,
                shape: NetShape::new(32, 2, 1),
            },
            virtual_pairwise: RelevanceSetup {
                kind: PredicateKind::VirtualPairwise,
                n_tokens: 8,
                modulus: 7,
                shape: NetShape::new(32, 2, 2),
            },
            train: TrainConfig::default(),
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindSummary {
    pub kind: String,
    pub layers: usize,
    pub params: usize,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<KindSummary>,
}

impl SeparationReport {
    pub fn mean(&self, kind: PredicateKind) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.kind == kind.name())
            .map(|s| s.mean_accuracy)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Pair-wise vs triple-wise at matched capacity and budget, plus the
/// virtual-token pair-wise reformulation, over every seed.
pub fn separation_experiment(cfg: &SeparationConfig) -> Result<SeparationReport> {
    if cfg.seeds.is_empty() {
        return domain("at least one seed is required");
    }
    let setups = [
        RelevanceSetup {
            kind: PredicateKind::Pairwise,
            ..cfg.matched.clone()
        },
        RelevanceSetup {
            kind: PredicateKind::Triplewise,
            ..cfg.matched.clone()
        },
        cfg.virtual_pairwise.clone(),
    ];
    let jobs: Vec<(usize, u64)> = (0..setups.len())
        .flat_map(|k| cfg.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let fits = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let tc = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            setups[k].run(&tc).map(|(net, fit)| (net.param_count(), fit))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (k, setup) in setups.iter().enumerate() {
        let name = setup.kind.name();
        let mut accs = Vec::new();
        let mut bases = Vec::new();
        let mut params = 0;
        for ((_, seed), (count, fit)) in jobs.iter().zip(&fits).filter(|((kk, _), _)| *kk == k) {
            rows.extend(rows_for(name, name, &setup.shape, *seed, fit));
            accs.push(fit.final_accuracy);
            bases.push(fit.majority_baseline);
            params = *count;
        }
        summaries.push(KindSummary {
            kind: name.to_string(),
            layers: setup.shape.layers,
            params,
            mean_accuracy: mean(&accs),
            mean_baseline: mean(&bases),
            accuracies: accs,
        });
    }
    Ok(SeparationReport { rows, summaries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryLayout {
    QueryFirst,
    QueryLast,
}

impl QueryLayout {
    pub fn name(self) -> &'static str {
        match self {
            QueryLayout::QueryFirst => "query_first",
            QueryLayout::QueryLast => "query_last",
        }
    }
}

/// Pair-wise relevance of each document token against one query token,
/// under a causal mask. Each document's label is read from its own position
/// when the query comes first, and from the final (query) position when the
/// query comes last; both layouts use `n_docs` output slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingTask {
    pub n_docs: usize,
    pub modulus: u32,
}

impl OrderingTask {
    pub fn net_config(&self, shape: &NetShape) -> NetConfig {
        NetConfig {
            input_dim: ToyTask::input_dim(self.modulus),
            embed_dim: shape.embed_dim,
            heads: shape.heads,
            layers: shape.layers,
            ffn_hidden: shape.ffn_hidden,
            head_hidden: shape.head_hidden,
            out_dim: self.n_docs,
            max_len: Some(self.n_docs + 1),
            causal: true,
            precision_bits: shape.precision_bits,
        }
    }

    pub fn sample(&self, layout: QueryLayout, rng: &mut Rng) -> Result<Sample> {
        if self.n_docs == 0 || self.modulus < 3 {
            return domain("ordering task needs n_docs >= 1 and modulus >= 3");
        }
        let token = |w, role| ToyToken {
            s_part: 0,
            w_part: w,
            role,
        };
        let query = token(rng.random_range(1..self.modulus), Role::Query);
        let docs: Vec<ToyToken> = (0..self.n_docs)
            .map(|_| token(rng.random_range(1..self.modulus), Role::Document))
            .collect();
        let labels: Vec<f64> = docs
            .iter()
            .map(|d| f64::from((d.w_part + query.w_part) % self.modulus != 0))
            .collect();
        let (tokens, targets): (Vec<ToyToken>, Vec<Target>) = match layout {
            QueryLayout::QueryFirst => (
                std::iter::once(query).chain(docs).collect(),
                labels
                    .iter()
                    .enumerate()
                    .map(|(j, &label)| Target {
                        pos: 1 + j,
                        slot: j,
                        label,
                    })
                    .collect(),
            ),
            QueryLayout::QueryLast => (
                docs.into_iter().chain(std::iter::once(query)).collect(),
                labels
                    .iter()
                    .enumerate()
                    .map(|(j, &label)| Target {
                        pos: self.n_docs,
                        slot: j,
                        label,
                    })
                    .collect(),
            ),
        };
        let m = self.modulus as usize;
        let mut inputs = ndarray::Array2::zeros((tokens.len(), ToyTask::input_dim(self.modulus)));
        for (i, t) in tokens.iter().enumerate() {
            inputs[[i, t.w_part as usize]] = 1.0;
            inputs[[i, m + t.role.index()]] = 1.0;
        }
        Ok(Sample { inputs, targets })
    }
}

/// Bits the causal model must move for each layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingCapacity {
    pub budget_bits: f64,
    pub query_last_bits: f64,
    pub query_first_bits: f64,
    pub query_last_satisfied: bool,
    pub query_first_satisfied: bool,
}

pub fn ordering_capacity(m: usize, p_bits: u32, n_docs: usize, h_w: f64) -> Result<OrderingCapacity> {
    if !(h_w >= 0.0 && h_w.is_finite()) {
        return domain(format!("H(w)={h_w} must be finite and non-negative"));
    }
    let budget_bits = m as f64 * p_bits as f64;
    let query_last_bits = (n_docs as f64 + 1.0) * h_w;
    let query_first_bits = 2.0 * h_w;
    Ok(OrderingCapacity {
        budget_bits,
        query_last_bits,
        query_first_bits,
        query_last_satisfied: budget_bits >= query_last_bits,
        query_first_satisfied: budget_bits >= query_first_bits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrderingConfig {
    pub task: OrderingTask,
    pub shape: NetShape,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        Self {
            task: OrderingTask {
                n_docs: 8,
                modulus: 5,
            },
            shape: NetShape::new(4, 2, 1),
            train: TrainConfig::default(),
            seeds: (0..5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub rows: Vec<ExperimentRow>,
    pub query_first: Vec<f64>,
    pub query_last: Vec<f64>,
    pub mean_query_first: f64,
    pub mean_query_last: f64,
    pub capacity: OrderingCapacity,
}

/// Trains one net on `layout`.
pub fn ordering_experiment(
    shape: &NetShape,
    layout: QueryLayout,
    task: &OrderingTask,
    train_cfg: &TrainConfig,
) -> Result<FitResult> {
    let mut net = AttentionNet::new(task.net_config(shape), train_cfg.seed)?;
    train(&mut net, |r| task.sample(layout, r), train_cfg)
}

/// Paired runs of both layouts over every seed, with the capacity accounting
/// (using `log2 M` bits per relevance value).
pub fn ordering_comparison(cfg: &OrderingConfig) -> Result<OrderingReport> {
    if cfg.seeds.is_empty() {
        return domain("at least one seed is required");
    }
    let layouts = [QueryLayout::QueryFirst, QueryLayout::QueryLast];
    let jobs: Vec<(QueryLayout, u64)> = layouts
        .iter()
        .flat_map(|&l| cfg.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let fits = jobs
        .par_iter()
        .map(|&(layout, seed)| {
            let tc = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            ordering_experiment(&cfg.shape, layout, &cfg.task, &tc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut query_first = Vec::new();
    let mut query_last = Vec::new();
    for ((layout, seed), fit) in jobs.iter().zip(&fits) {
        let id = format!("ordering_{}", layout.name());
        rows.extend(rows_for(&id, "pairwise", &cfg.shape, *seed, fit));
        match layout {
            QueryLayout::QueryFirst => query_first.push(fit.final_accuracy),
            QueryLayout::QueryLast => query_last.push(fit.final_accuracy),
        }
    }
    let capacity = ordering_capacity(
        cfg.shape.embed_dim,
        cfg.shape.precision_bits,
        cfg.task.n_docs,
        (cfg.task.modulus as f64).log2(),
    )?;
    Ok(OrderingReport {
        rows,
        mean_query_first: mean(&query_first),
        mean_query_last: mean(&query_last),
        query_first,
        query_last,
        capacity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityCheck {
    pub capacity_bits: f64,
    pub threshold_bits: f64,
    /// The one-layer impossibility regime holds (`capacity <= threshold`).
    pub impossible: bool,
    /// `capacity - threshold`; negative inside the regime.
    pub margin: f64,
}

/// One-layer capacity inequality `m p H <= c n H(w) / ln ln n`. `c` has no
/// published value; 1 is the conventional default.
pub fn capacity_check(m: usize, p_bits: u32, heads: usize, n: usize, h_w: f64, c: f64) -> Result<CapacityCheck> {
    if n < 3 {
        return domain(format!("n={n}: ln ln n is only positive for n >= 3"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return domain(format!("c={c} must be positive"));
    }
    if !(h_w >= 0.0 && h_w.is_finite()) {
        return domain(format!("H(w)={h_w} must be finite and non-negative"));
    }
    let capacity_bits = m as f64 * p_bits as f64 * heads as f64;
    let threshold_bits = c * n as f64 * h_w / (n as f64).ln().ln();
    Ok(CapacityCheck {
        capacity_bits,
        threshold_bits,
        impossible: capacity_bits <= threshold_bits && h_w > 0.0,
        margin: capacity_bits - threshold_bits,
    })
}

use serde::{Deserialize, Serialize};

use super::net::{AttentionNet, Sample};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Record a curve point every this many steps (and at the end).
    pub eval_every: usize,
    pub holdout_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.003,
            steps: 3000,
            batch: 32,
            seed: 0,
            optimizer: Optimizer::adam(),
            eval_every: 500,
            holdout_size: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: usize,
    /// Mean loss over the batches since the previous point.
    pub train_loss: f64,
    pub holdout_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub curve: Vec<CurvePoint>,
    pub final_accuracy: f64,
    /// Accuracy of always predicting the held-out majority label.
    pub majority_baseline: f64,
}

/// Fraction of targets whose thresholded probability matches the label.
/// A probability of exactly 0.5 predicts 1.
pub fn accuracy(net: &AttentionNet, samples: &[Sample]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for s in samples {
        let logits = net.logits(s)?;
        for t in &s.targets {
            let predicted = if logits[[t.pos, t.slot]] >= 0.0 { 1.0 } else { 0.0 };
            hits += usize::from(predicted == t.label);
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Shape("no scored targets".into()));
    }
    Ok(hits as f64 / total as f64)
}

fn majority(samples: &[Sample]) -> f64 {
    let labels: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.targets.iter().map(|t| t.label))
        .collect();
    let ones = labels.iter().sum::<f64>() / labels.len().max(1) as f64;
    ones.max(1.0 - ones)
}

/// Trains `net` in place on batches drawn from `source`, evaluating on a
/// held-out set drawn from the same source on a separate stream.
pub fn train<F>(net: &mut AttentionNet, source: F, cfg: &TrainConfig) -> Result<FitResult>
where
    F: Fn(&mut Rng) -> Result<Sample>,
{
    if cfg.steps == 0 || cfg.batch == 0 || cfg.holdout_size == 0 {
        return Err(Error::Config("steps, batch and holdout_size must be positive".into()));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate {} must be positive", cfg.lr)));
    }
    let mut hold_rng = rng::stream(cfg.seed, rng::HOLDOUT_STREAM);
    let holdout = (0..cfg.holdout_size)
        .map(|_| source(&mut hold_rng))
        .collect::<Result<Vec<_>>>()?;
    let mut data_rng = rng::stream(cfg.seed, 0);
    let eval_every = cfg.eval_every.max(1);

    let mut m = vec![0.0; net.params.len()];
    let mut v = vec![0.0; net.params.len()];
    let mut curve = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0usize;
    for step in 1..=cfg.steps {
        let batch = (0..cfg.batch)
            .map(|_| source(&mut data_rng))
            .collect::<Result<Vec<_>>>()?;
        let (loss, grad) = net.backward(&batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step });
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in net.params.iter_mut().zip(&grad) {
                    *p -= cfg.lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(step as i32);
                let c2 = 1.0 - beta2.powi(step as i32);
                for i in 0..grad.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    net.params[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
        window += loss;
        window_len += 1;
        if step % eval_every == 0 || step == cfg.steps {
            curve.push(CurvePoint {
                step,
                train_loss: window / window_len as f64,
                holdout_accuracy: accuracy(net, &holdout)?,
            });
            window = 0.0;
            window_len = 0;
        }
    }
    let final_accuracy = curve.last().map_or(0.0, |c| c.holdout_accuracy);
    Ok(FitResult {
        curve,
        final_accuracy,
        majority_baseline: majority(&holdout),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::net::{NetConfig, Target};
    use ndarray::Array2;
    use rand::Rng as _;

    fn config() -> NetConfig {
        NetConfig {
            input_dim: 2,
            embed_dim: 4,
            heads: 1,
            layers: 1,
            ffn_hidden: 0,
            head_hidden: 4,
            out_dim: 1,
            max_len: None,
            causal: false,
            precision_bits: 32,
        }
    }

    /// Label = sign of the first coordinate of the single token.
    fn source(r: &mut Rng) -> Result<Sample> {
        let x: f64 = r.random_range(-1.0..1.0);
        let y: f64 = r.random_range(-1.0..1.0);
        Ok(Sample {
            inputs: Array2::from_shape_vec((1, 2), vec![x, y]).unwrap(),
            targets: vec![Target {
                pos: 0,
                slot: 0,
                label: f64::from(x > 0.0),
            }],
        })
    }

    fn short(seed: u64) -> TrainConfig {
        TrainConfig {
            steps: 300,
            eval_every: 100,
            holdout_size: 200,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn learns_a_linear_rule_deterministically() {
        let mut a = AttentionNet::new(config(), 1).unwrap();
        let mut b = a.clone();
        let ra = train(&mut a, source, &short(3)).unwrap();
        let rb = train(&mut b, source, &short(3)).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.params, b.params);
        assert_eq!(ra.curve.len(), 3);
        assert!(ra.final_accuracy > 0.9, "{ra:?}");
    }

    #[test]
    fn divergence_reports_step() {
        let mut net = AttentionNet::new(config(), 1).unwrap();
        let cfg = TrainConfig {
            lr: 1e300,
            optimizer: Optimizer::Sgd,
            ..short(0)
        };
        match train(&mut net, source, &cfg) {
            Err(Error::Divergence { step }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_budget() {
        let mut net = AttentionNet::new(config(), 1).unwrap();
        let cfg = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        assert!(train(&mut net, source, &cfg).is_err());
    }
}

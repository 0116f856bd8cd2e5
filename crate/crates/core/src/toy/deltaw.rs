//! Fitting a low-rank score offset so attention drops noise columns.
//!
//! Scores are bilinear, `S = X W X^T`. A finetune adds `O = X dW X^T`. The
//! target row distribution keeps the base softmax restricted to relevant
//! columns and puts zero mass on noise. The fit minimises `sum r^(2k)` over
//! the log-ratios `r` between fitted and target weights on relevant columns;
//! a large `k` tracks the worst-case ratio that defines the error.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaWInstance {
    /// `n_tokens x dim`.
    pub features: Array2<f64>,
    /// `dim x dim`.
    pub base_w: Array2<f64>,
    /// Per column: `true` when the token is relevant.
    pub relevant: Vec<bool>,
}

impl DeltaWInstance {
    pub fn new(features: Array2<f64>, base_w: Array2<f64>, relevant: Vec<bool>) -> Result<Self> {
        let (n, d) = features.dim();
        if base_w.dim() != (d, d) {
            return Err(Error::Shape(format!("W is {:?}, features have width {d}", base_w.dim())));
        }
        if relevant.len() != n {
            return Err(Error::Shape(format!("{} mask entries for {n} tokens", relevant.len())));
        }
        if relevant.iter().filter(|&&r| r).count() < 2 {
            return domain("at least two relevant columns are required");
        }
        Ok(Self {
            features,
            base_w,
            relevant,
        })
    }

    /// Gaussian features and base map; `n_noise` columns chosen at random.
    pub fn random(n_tokens: usize, dim: usize, n_noise: usize, rng: &mut Rng) -> Result<Self> {
        if n_tokens < n_noise + 2 || dim == 0 {
            return domain("need dim >= 1 and at least two relevant tokens");
        }
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
        let features = Array2::from_shape_fn((n_tokens, dim), |_| normal.sample(rng));
        let scale = 1.0 / (dim as f64).sqrt();
        let base_w = Array2::from_shape_fn((dim, dim), |_| normal.sample(rng) * scale);
        let noise = rand::seq::index::sample(rng, n_tokens, n_noise);
        let mut relevant = vec![true; n_tokens];
        for j in noise {
            relevant[j] = false;
        }
        Self::new(features, base_w, relevant)
    }

    pub fn base_scores(&self) -> Array2<f64> {
        self.features.dot(&self.base_w).dot(&self.features.t())
    }

    pub fn offsets(&self, delta_w: &Array2<f64>) -> Array2<f64> {
        self.features.dot(delta_w).dot(&self.features.t())
    }

    /// Base softmax restricted to relevant columns.
    pub fn target(&self) -> Array2<f64> {
        let mut t = self.base_scores();
        for mut row in t.rows_mut() {
            let max = row
                .iter()
                .zip(&self.relevant)
                .filter(|(_, &r)| r)
                .fold(f64::NEG_INFINITY, |m, (&v, _)| m.max(v));
            let mut total = 0.0;
            for (v, &r) in row.iter_mut().zip(&self.relevant) {
                *v = if r { (*v - max).exp() } else { 0.0 };
                total += *v;
            }
            row /= total;
        }
        t
    }
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMode {
    /// Stop once the worst-case ratio error is at most this.
    TargetEpsilon(f64),
    /// Keep the offset spread over relevant pairs at most this, report the
    /// best error reached.
    ConstrainedSpread(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaWOptimizer {
    pub lr: f64,
    pub steps: usize,
    /// `k` in the `sum r^(2k)` objective.
    pub power: u32,
}

impl Default for DeltaWOptimizer {
    fn default() -> Self {
        Self {
            lr: 0.05,
            steps: 1500,
            power: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaWFit {
    #[serde(skip)]
    pub base_scores: Array2<f64>,
    pub mask: Vec<bool>,
    #[serde(skip)]
    pub delta_w: Array2<f64>,
    #[serde(skip)]
    pub fitted_offset: Array2<f64>,
    /// `max |fitted / target - 1|` over every row and relevant column.
    pub achieved_epsilon: f64,
    /// `max - min` of the offset over every row and relevant column.
    pub spread_delta: f64,
    pub allowed_spread: Option<f64>,
    /// `ln 1/(1 - eps)`: the spread scale the error level corresponds to.
    pub implied_spread: f64,
    pub steps_run: usize,
}

struct Eval {
    objective: f64,
    epsilon: f64,
    spread: f64,
    grad: Array2<f64>,
}

fn evaluate(
    inst: &DeltaWInstance,
    base: &Array2<f64>,
    target: &Array2<f64>,
    dw: &Array2<f64>,
    power: u32,
) -> Eval {
    let k = power.max(1) as i32;
    let offset = inst.offsets(dw);
    let fitted = softmax_rows(&(base + &offset));
    let n = base.nrows();
    let mut g = Array2::<f64>::zeros((n, n));
    let mut objective = 0.0;
    let mut epsilon: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut rsum = 0.0;
        for j in 0..n {
            if !inst.relevant[j] {
                continue;
            }
            let r = fitted[[i, j]].ln() - target[[i, j]].ln();
            let dr = 2.0 * k as f64 * r.powi(2 * k - 1);
            objective += r.powi(2 * k);
            rsum += dr;
            g[[i, j]] += dr;
            epsilon = epsilon.max((fitted[[i, j]] / target[[i, j]] - 1.0).abs());
            lo = lo.min(offset[[i, j]]);
            hi = hi.max(offset[[i, j]]);
        }
        for c in 0..n {
            g[[i, c]] -= rsum * fitted[[i, c]];
        }
    }
    let grad = inst.features.t().dot(&g).dot(&inst.features);
    Eval {
        objective,
        epsilon,
        spread: hi - lo,
        grad,
    }
}

/// Fits from `dW = 0`.
pub fn fit_delta_w(inst: &DeltaWInstance, mode: FitMode, opt: &DeltaWOptimizer) -> Result<DeltaWFit> {
    let d = inst.features.ncols();
    fit_from(inst, mode, opt, Array2::zeros((d, d)))
}

fn fit_from(
    inst: &DeltaWInstance,
    mode: FitMode,
    opt: &DeltaWOptimizer,
    init: Array2<f64>,
) -> Result<DeltaWFit> {
    let limit = match mode {
        FitMode::TargetEpsilon(e) if !(e >= 0.0) => return domain("target epsilon must be >= 0"),
        FitMode::ConstrainedSpread(s) if !(s >= 0.0 && s.is_finite()) => {
            return domain("allowed spread must be finite and >= 0")
        }
        FitMode::ConstrainedSpread(s) => Some(s),
        FitMode::TargetEpsilon(_) => None,
    };
    let base = inst.base_scores();
    let target = inst.target();
    let project = |dw: &mut Array2<f64>| {
        if let Some(s) = limit {
            // The spread is positively homogeneous in dW.
            let spread = evaluate(inst, &base, &target, dw, opt.power).spread;
            if spread > s {
                *dw *= if spread > 0.0 { s / spread } else { 0.0 };
            }
        }
    };
    let mut dw = init;
    project(&mut dw);
    let mut m = Array2::<f64>::zeros(dw.dim());
    let mut v = Array2::<f64>::zeros(dw.dim());
    let (b1, b2, eps_adam) = (0.9, 0.999, 1e-8);
    let mut ev = evaluate(inst, &base, &target, &dw, opt.power);
    let mut best = (ev.epsilon, dw.clone());
    let mut steps_run = 0;
    for step in 1..=opt.steps {
        if let FitMode::TargetEpsilon(e) = mode {
            if best.0 <= e {
                break;
            }
        }
        if !ev.objective.is_finite() {
            return Err(Error::Divergence { step });
        }
        m = &m * b1 + &ev.grad * (1.0 - b1);
        v = &v * b2 + &ev.grad.mapv(|g| g * g) * (1.0 - b2);
        let c1 = 1.0 - b1.powi(step as i32);
        let c2 = 1.0 - b2.powi(step as i32);
        let upd = ndarray::Zip::from(&m)
            .and(&v)
            .map_collect(|&mi, &vi| opt.lr * (mi / c1) / ((vi / c2).sqrt() + eps_adam));
        dw -= &upd;
        project(&mut dw);
        ev = evaluate(inst, &base, &target, &dw, opt.power);
        steps_run = step;
        if ev.epsilon < best.0 {
            best = (ev.epsilon, dw.clone());
        }
    }
    let (achieved_epsilon, delta_w) = best;
    let final_eval = evaluate(inst, &base, &target, &delta_w, opt.power);
    if !final_eval.objective.is_finite() {
        return Err(Error::Divergence { step: steps_run });
    }
    let implied_spread = if achieved_epsilon < 1.0 {
        (1.0 / (1.0 - achieved_epsilon)).ln()
    } else {
        f64::INFINITY
    };
    Ok(DeltaWFit {
        fitted_offset: inst.offsets(&delta_w),
        base_scores: base,
        mask: inst.relevant.clone(),
        delta_w,
        achieved_epsilon,
        spread_delta: final_eval.spread,
        allowed_spread: limit,
        implied_spread,
        steps_run,
    })
}

/// Constrained fits over non-decreasing spread budgets. Each budget starts
/// from the previous budget's best (still feasible) solution, so the error
/// reported is the best found over a growing feasible set.
pub fn spread_sweep(inst: &DeltaWInstance, spreads: &[f64], opt: &DeltaWOptimizer) -> Result<Vec<DeltaWFit>> {
    if spreads.windows(2).any(|w| w[1] < w[0]) {
        return domain("spread budgets must be non-decreasing");
    }
    let d = inst.features.ncols();
    let mut init = Array2::zeros((d, d));
    let mut fits = Vec::with_capacity(spreads.len());
    for &s in spreads {
        let fit = fit_from(inst, FitMode::ConstrainedSpread(s), opt, init)?;
        init = fit.delta_w.clone();
        fits.push(fit);
    }
    Ok(fits)
}

/// One row of the fit CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaWRow {
    pub instance_id: usize,
    pub allowed_spread: f64,
    pub measured_spread: f64,
    pub achieved_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
/// Multi-instance budget sweep.
pub struct DeltaWConfig {
    pub instances: usize,
    pub n_tokens: usize,
    pub dim: usize,
    pub n_noise: usize,
    pub spreads: Vec<f64>,
    pub optimizer: DeltaWOptimizer,
}

impl Default for DeltaWConfig {
    fn default() -> Self {
        Self {
            instances: 10,
            n_tokens: 10,
            dim: 4,
            n_noise: 3,
            spreads: vec![0.0, 0.1, 0.3, 0.7],
            optimizer: DeltaWOptimizer::default(),
        }
    }
}

/// Fits `instances` random problems over the configured budgets. Instance
/// `i` draws from stream `i` of `seed`.
pub fn deltaw_experiment(cfg: &DeltaWConfig, seed: u64) -> Result<Vec<DeltaWRow>> {
    let mut spreads = cfg.spreads.clone();
    spreads.sort_by(f64::total_cmp);
    let per: Vec<Vec<DeltaWRow>> = (0..cfg.instances)
        .into_par_iter()
        .map(|id| {
            let mut r = crate::rng::stream(seed, id as u64);
            let inst = DeltaWInstance::random(cfg.n_tokens, cfg.dim, cfg.n_noise, &mut r)?;
            let fits = spread_sweep(&inst, &spreads, &cfg.optimizer)?;
            Ok(fits
                .iter()
                .zip(&spreads)
                .map(|(f, &s)| DeltaWRow {
                    instance_id: id,
                    allowed_spread: s,
                    measured_spread: f.spread_delta,
                    achieved_epsilon: f.achieved_epsilon,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Row-wise fitted attention; used for reporting.
pub fn fitted_attention(fit: &DeltaWFit) -> Array2<f64> {
    softmax_rows(&(&fit.base_scores + &fit.fitted_offset))
}

/// Mass the fitted attention still puts on noise columns, per row.
pub fn noise_mass(fit: &DeltaWFit) -> Array1<f64> {
    let att = fitted_attention(fit);
    let mut mass = Array1::zeros(att.nrows());
    for (i, row) in att.axis_iter(Axis(0)).enumerate() {
        mass[i] = row.iter().zip(&fit.mask).filter(|(_, &r)| !r).map(|(&v, _)| v).sum();
    }
    mass
}

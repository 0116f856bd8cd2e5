//! A tiny multi-head attention network with hand-written gradients.
//!
//! Parameters live in one flat vector; [`Layout`] records where each matrix
//! sits. Every matrix is stored row-major as `rows x cols` and used as
//! `x . W` (inputs on the left).

use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One encoded sequence plus the logits it is scored on.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `n_tokens x input_dim`.
    pub inputs: Array2<f64>,
    pub targets: Vec<Target>,
}

/// Reads logit `slot` at token `pos` and scores it against `label`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub pos: usize,
    pub slot: usize,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub input_dim: usize,
    /// `m`.
    pub embed_dim: usize,
    pub heads: usize,
    pub layers: usize,
    /// Width of the per-layer feed-forward block; 0 disables it.
    pub ffn_hidden: usize,
    pub head_hidden: usize,
    pub out_dim: usize,
    /// Learned positional embeddings for up to this many positions.
    pub max_len: Option<usize>,
    pub causal: bool,
    /// Bits per coordinate, used only for capacity accounting.
    pub precision_bits: u32,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Shape(m));
        if self.input_dim == 0 || self.out_dim == 0 || self.head_hidden == 0 {
            return bad("input, output and head widths must be positive".into());
        }
        if !(1..=2).contains(&self.layers) {
            return bad(format!("{} layers; only 1 or 2 are supported", self.layers));
        }
        if self.heads == 0 || self.embed_dim == 0 || self.embed_dim % self.heads != 0 {
            return bad(format!(
                "embed_dim {} must be a positive multiple of heads {}",
                self.embed_dim, self.heads
            ));
        }
        if self.max_len == Some(0) {
            return bad("max_len must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Slot {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSlots {
    pub wq: Slot,
    pub wk: Slot,
    pub wv: Slot,
    pub ffn: Option<[Slot; 4]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embed_w: Slot,
    pub embed_b: Slot,
    pub pos: Option<Slot>,
    pub layers: Vec<LayerSlots>,
    pub head1_w: Slot,
    pub head1_b: Slot,
    pub head2_w: Slot,
    pub head2_b: Slot,
    pub total: usize,
}

impl Layout {
    fn new(c: &NetConfig) -> Self {
        let mut total = 0;
        let mut take = |rows, cols| {
            let slot = Slot {
                offset: total,
                rows,
                cols,
            };
            total += rows * cols;
            slot
        };
        let m = c.embed_dim;
        let embed_w = take(c.input_dim, m);
        let embed_b = take(1, m);
        let pos = c.max_len.map(|n| take(n, m));
        let layers = (0..c.layers)
            .map(|_| LayerSlots {
                wq: take(m, m),
                wk: take(m, m),
                wv: take(m, m),
                ffn: (c.ffn_hidden > 0).then(|| {
                    [
                        take(m, c.ffn_hidden),
                        take(1, c.ffn_hidden),
                        take(c.ffn_hidden, m),
                        take(1, m),
                    ]
                }),
            })
            .collect();
        let head1_w = take(m, c.head_hidden);
        let head1_b = take(1, c.head_hidden);
        let head2_w = take(c.head_hidden, c.out_dim);
        let head2_b = take(1, c.out_dim);
        Self {
            embed_w,
            embed_b,
            pos,
            layers,
            head1_w,
            head1_b,
            head2_w,
            head2_b,
            total,
        }
    }

    /// Weight matrices (initialised with fan-in scaling) as opposed to
    /// biases (initialised to zero).
    fn weights(&self) -> Vec<Slot> {
        let mut out = vec![self.embed_w];
        for l in &self.layers {
            out.extend([l.wq, l.wk, l.wv]);
            if let Some([w1, _, w2, _]) = l.ffn {
                out.extend([w1, w2]);
            }
        }
        out.extend([self.head1_w, self.head2_w]);
        out
    }
}

fn view(data: &[f64], s: Slot) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((s.rows, s.cols), &data[s.offset..s.offset + s.len()])
        .expect("slot inside parameter vector")
}

fn view_mut(data: &mut [f64], s: Slot) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((s.rows, s.cols), &mut data[s.offset..s.offset + s.len()])
        .expect("slot inside parameter vector")
}

fn bias(data: &[f64], s: Slot) -> ArrayView2<'_, f64> {
    view(data, s)
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

fn relu_mask(pre: &Array2<f64>, grad: Array2<f64>) -> Array2<f64> {
    let mut g = grad;
    g.zip_mut_with(pre, |g, &p| {
        if p <= 0.0 {
            *g = 0.0
        }
    });
    g
}

fn sum_rows(x: &Array2<f64>) -> Array2<f64> {
    x.sum_axis(Axis(0)).insert_axis(Axis(0))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit.
fn bce(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

struct LayerCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights, one `n x n` matrix per head.
    attn: Vec<Array2<f64>>,
    /// Residual stream after attention.
    mid: Array2<f64>,
    ffn_pre: Option<Array2<f64>>,
}

struct Cache {
    layers: Vec<LayerCache>,
    top: Array2<f64>,
    head_pre: Array2<f64>,
    head_act: Array2<f64>,
    logits: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionNet {
    pub config: NetConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl AttentionNet {
    /// All-zero parameters.
    pub fn zeros(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let params = vec![0.0; layout.total];
        Ok(Self {
            config,
            layout,
            params,
        })
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero, positional
    /// embeddings `N(0, 0.01)`.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let mut r = rng::stream(seed, rng::PARAM_STREAM);
        for slot in net.layout.weights() {
            let normal = Normal::new(0.0, 1.0 / (slot.rows as f64).sqrt())
                .map_err(|e| Error::Numeric(e.to_string()))?;
            view_mut(&mut net.params, slot).mapv_inplace(|_| normal.sample(&mut r));
        }
        if let Some(slot) = net.layout.pos {
            let normal = Normal::new(0.0, 0.1).map_err(|e| Error::Numeric(e.to_string()))?;
            view_mut(&mut net.params, slot).mapv_inplace(|_| normal.sample(&mut r));
        }
        Ok(net)
    }

    /// Every coordinate drawn from `N(0, scale^2)`; used by gradient checks.
    pub fn randomized<R: Rng + ?Sized>(config: NetConfig, scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let normal = Normal::new(0.0, scale).map_err(|e| Error::Numeric(e.to_string()))?;
        net.params.iter_mut().for_each(|p| *p = normal.sample(rng));
        Ok(net)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check(&self, sample: &Sample) -> Result<()> {
        let (n, d) = sample.inputs.dim();
        if d != self.config.input_dim {
            return Err(Error::Shape(format!(
                "input width {d}, net expects {}",
                self.config.input_dim
            )));
        }
        if n == 0 {
            return Err(Error::Shape("empty sequence".into()));
        }
        if let Some(max) = self.config.max_len {
            if n > max {
                return Err(Error::Shape(format!("{n} tokens exceed max_len {max}")));
            }
        }
        if let Some(t) = sample
            .targets
            .iter()
            .find(|t| t.pos >= n || t.slot >= self.config.out_dim)
        {
            return Err(Error::Shape(format!(
                "target ({}, {}) outside {n} x {}",
                t.pos, t.slot, self.config.out_dim
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Array2<f64>) -> Cache {
        let c = &self.config;
        let p = &self.params;
        let n = x.nrows();
        let dh = c.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut h = x.dot(&view(p, self.layout.embed_w)) + bias(p, self.layout.embed_b);
        if let Some(slot) = self.layout.pos {
            h += &view(p, slot).slice(s![..n, ..]);
        }
        let mut layers = Vec::with_capacity(c.layers);
        for ls in &self.layout.layers {
            let q = h.dot(&view(p, ls.wq));
            let k = h.dot(&view(p, ls.wk));
            let v = h.dot(&view(p, ls.wv));
            let mut mid = h.clone();
            let mut attn = Vec::with_capacity(c.heads);
            for head in 0..c.heads {
                let cols = s![.., head * dh..(head + 1) * dh];
                let mut a = q.slice(cols).dot(&k.slice(cols).t()) * scale;
                for (i, mut row) in a.rows_mut().into_iter().enumerate() {
                    let limit = if c.causal { i + 1 } else { n };
                    let max = row
                        .iter()
                        .take(limit)
                        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    let mut total = 0.0;
                    for (j, e) in row.iter_mut().enumerate() {
                        *e = if j < limit { (*e - max).exp() } else { 0.0 };
                        total += *e;
                    }
                    row /= total;
                }
                let out = a.dot(&v.slice(cols));
                let mut target = mid.slice_mut(cols);
                target += &out;
                attn.push(a);
            }
            let (next, ffn_pre) = match ls.ffn {
                Some([w1, b1, w2, b2]) => {
                    let pre = mid.dot(&view(p, w1)) + bias(p, b1);
                    let next = &mid + &(relu(&pre).dot(&view(p, w2)) + bias(p, b2));
                    (next, Some(pre))
                }
                None => (mid.clone(), None),
            };
            layers.push(LayerCache {
                input: h,
                q,
                k,
                v,
                attn,
                mid,
                ffn_pre,
            });
            h = next;
        }
        let head_pre = h.dot(&view(p, self.layout.head1_w)) + bias(p, self.layout.head1_b);
        let head_act = relu(&head_pre);
        let logits = head_act.dot(&view(p, self.layout.head2_w)) + bias(p, self.layout.head2_b);
        Cache {
            layers,
            top: h,
            head_pre,
            head_act,
            logits,
        }
    }

    /// Logits, `n_tokens x out_dim`.
    pub fn logits(&self, sample: &Sample) -> Result<Array2<f64>> {
        self.check(sample)?;
        Ok(self.run(&sample.inputs).logits)
    }

    /// Per-token relevance probabilities, `n_tokens x out_dim`.
    pub fn forward(&self, sample: &Sample) -> Result<Array2<f64>> {
        Ok(self.logits(sample)?.mapv(sigmoid))
    }

    /// Attention weights indexed `[layer][head]`.
    pub fn attention(&self, sample: &Sample) -> Result<Vec<Vec<Array2<f64>>>> {
        self.check(sample)?;
        Ok(self
            .run(&sample.inputs)
            .layers
            .into_iter()
            .map(|l| l.attn)
            .collect())
    }

    /// Mean cross-entropy over every target in the batch.
    pub fn loss(&self, batch: &[Sample]) -> Result<f64> {
        let count = target_count(batch)?;
        let mut total = 0.0;
        for sample in batch {
            let logits = self.logits(sample)?;
            total += sample
                .targets
                .iter()
                .map(|t| bce(logits[[t.pos, t.slot]], t.label))
                .sum::<f64>();
        }
        Ok(total / count as f64)
    }

    /// Mean loss and its exact gradient with respect to [`Self::params`].
    pub fn backward(&self, batch: &[Sample]) -> Result<(f64, Vec<f64>)> {
        let count = target_count(batch)? as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for sample in batch {
            self.check(sample)?;
            let cache = self.run(&sample.inputs);
            let mut dlogits = Array2::zeros(cache.logits.dim());
            for t in &sample.targets {
                let z = cache.logits[[t.pos, t.slot]];
                total += bce(z, t.label);
                dlogits[[t.pos, t.slot]] += (sigmoid(z) - t.label) / count;
            }
            self.accumulate(&sample.inputs, &cache, dlogits, &mut grad);
        }
        Ok((total / count, grad))
    }

    fn accumulate(&self, x: &Array2<f64>, cache: &Cache, dlogits: Array2<f64>, grad: &mut [f64]) {
        let c = &self.config;
        let p = &self.params;
        let lay = &self.layout;
        let n = x.nrows();
        let dh = c.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let add = |grad: &mut [f64], slot: Slot, g: &Array2<f64>| {
            view_mut(grad, slot).zip_mut_with(g, |a, &b| *a += b);
        };

        add(grad, lay.head2_w, &cache.head_act.t().dot(&dlogits));
        add(grad, lay.head2_b, &sum_rows(&dlogits));
        let dact = dlogits.dot(&view(p, lay.head2_w).t());
        let dpre = relu_mask(&cache.head_pre, dact);
        add(grad, lay.head1_w, &cache.top.t().dot(&dpre));
        add(grad, lay.head1_b, &sum_rows(&dpre));
        let mut dh_out = dpre.dot(&view(p, lay.head1_w).t());

        for (ls, lc) in lay.layers.iter().zip(&cache.layers).rev() {
            let dmid = match (ls.ffn, &lc.ffn_pre) {
                (Some([w1, b1, w2, b2]), Some(pre)) => {
                    add(grad, w2, &relu(pre).t().dot(&dh_out));
                    add(grad, b2, &sum_rows(&dh_out));
                    let dpre = relu_mask(pre, dh_out.dot(&view(p, w2).t()));
                    add(grad, w1, &lc.mid.t().dot(&dpre));
                    add(grad, b1, &sum_rows(&dpre));
                    &dh_out + &dpre.dot(&view(p, w1).t())
                }
                _ => dh_out,
            };
            let mut dq = Array2::zeros((n, c.embed_dim));
            let mut dk = Array2::zeros((n, c.embed_dim));
            let mut dv = Array2::zeros((n, c.embed_dim));
            for (head, a) in lc.attn.iter().enumerate() {
                let cols = s![.., head * dh..(head + 1) * dh];
                let dout = dmid.slice(cols);
                let da = dout.dot(&lc.v.slice(cols).t());
                dv.slice_mut(cols).assign(&a.t().dot(&dout));
                let inner: Array1<f64> = (&da * a).sum_axis(Axis(1));
                // dS = A * (dA - rowsum(dA * A)); masked entries have A = 0.
                let mut ds = da;
                for ((mut row, arow), &dot) in ds.rows_mut().into_iter().zip(a.rows()).zip(&inner) {
                    row.zip_mut_with(&arow, |d, &w| *d = w * (*d - dot));
                }
                ds *= scale;
                dq.slice_mut(cols).assign(&ds.dot(&lc.k.slice(cols)));
                dk.slice_mut(cols).assign(&ds.t().dot(&lc.q.slice(cols)));
            }
            add(grad, ls.wq, &lc.input.t().dot(&dq));
            add(grad, ls.wk, &lc.input.t().dot(&dk));
            add(grad, ls.wv, &lc.input.t().dot(&dv));
            dh_out = dmid
                + dq.dot(&view(p, ls.wq).t())
                + dk.dot(&view(p, ls.wk).t())
                + dv.dot(&view(p, ls.wv).t());
        }

        add(grad, lay.embed_w, &x.t().dot(&dh_out));
        add(grad, lay.embed_b, &sum_rows(&dh_out));
        if let Some(slot) = lay.pos {
            view_mut(grad, slot)
                .slice_mut(s![..n, ..])
                .zip_mut_with(&dh_out, |a, &b| *a += b);
        }
    }
}

fn target_count(batch: &[Sample]) -> Result<usize> {
    let count: usize = batch.iter().map(|s| s.targets.len()).sum();
    if count == 0 {
        return Err(Error::Shape("batch has no scored targets".into()));
    }
    Ok(count)
}

/// Central-difference check of [`AttentionNet::backward`]. Returns the worst
/// relative error, measured against `max(|analytic|, |numeric|, floor)`.
pub fn gradient_check(net: &AttentionNet, batch: &[Sample], h: f64, floor: f64) -> Result<f64> {
    let (_, analytic) = net.backward(batch)?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let up = probe.loss(batch)?;
        probe.params[i] = orig - h;
        let down = probe.loss(batch)?;
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// One entry of a finite-difference sweep over random small nets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub net: usize,
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    pub tokens: usize,
    pub causal: bool,
    pub positional: bool,
    pub ffn_hidden: usize,
    pub params: usize,
    pub max_rel_error: f64,
}

/// Step and absolute floor used by [`random_gradcheck`].
pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Checks net `index` of a seeded family of random architectures
/// (`m <= 16`, at most 12 tokens, 1 or 2 layers, optional mask, positions
/// and feed-forward blocks) on a batch of two random sequences.
pub fn random_gradcheck(seed: u64, index: usize) -> Result<GradcheckRow> {
    let mut r = rng::stream(seed, index as u64);
    let heads = r.random_range(1..=2);
    let embed_dim = heads * r.random_range(1..=16 / heads);
    let tokens = r.random_range(2..=12);
    let config = NetConfig {
        input_dim: r.random_range(2..=6),
        embed_dim,
        heads,
        layers: r.random_range(1..=2),
        ffn_hidden: if r.random_bool(0.5) { r.random_range(1..=6) } else { 0 },
        head_hidden: r.random_range(1..=6),
        out_dim: r.random_range(1..=3),
        max_len: r.random_bool(0.5).then_some(12),
        causal: r.random_bool(0.5),
        precision_bits: 32,
    };
    let net = AttentionNet::randomized(config.clone(), 0.5, &mut r)?;
    let mut batch = Vec::with_capacity(2);
    for _ in 0..2 {
        let inputs = Array2::from_shape_fn((tokens, config.input_dim), |_| r.random_range(-1.0..1.0));
        let mut targets = Vec::new();
        for pos in 0..tokens {
            for slot in 0..config.out_dim {
                if r.random_bool(0.7) {
                    let label = f64::from(u8::from(r.random_bool(0.5)));
                    targets.push(Target { pos, slot, label });
                }
            }
        }
        if targets.is_empty() {
            targets.push(Target {
                pos: 0,
                slot: 0,
                label: 1.0,
            });
        }
        batch.push(Sample { inputs, targets });
    }
    let max_rel_error = gradient_check(&net, &batch, GRADCHECK_STEP, GRADCHECK_FLOOR)?;
    Ok(GradcheckRow {
        net: index,
        layers: config.layers,
        heads,
        embed_dim,
        tokens,
        causal: config.causal,
        positional: config.max_len.is_some(),
        ffn_hidden: config.ffn_hidden,
        params: net.param_count(),
        max_rel_error,
    })
}

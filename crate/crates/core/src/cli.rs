//! Command-line front end.
//!
//! Settings resolve as built-in defaults, then the `--config` TOML file, then
//! flags. The resolved configuration is echoed to `<out>/config.toml` and the
//! seed to stderr. Tables go to stdout and to `<out>`; everything else goes
//! to stderr.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure,
//! 3 endpoint failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::analysis::{
    coupled_grid, depth_budget, erase_layer_requirement, f_vs_t, first_zero, threshold_by_layer,
    RecurrenceParams, FIXED_POINT_TOL,
};
use crate::bounds::{
    distraction_fraction, evaluate_row, fano_error_lower, lora_noise_gap, lora_spread_budget, mlp_failure_bound,
    noise_impact_bound, sweep_delta_iwz,
};
use crate::config::RunConfig;
use crate::error::Error;
use crate::fission::{layer_rows, replicate_appendix_sim, run_monte_carlo, LayerParams, PinnedTransition};
use crate::harness::{
    assemble_prompt, gen_synthetic_qa, load_dataset, run_eval, to_messages, write_dataset, write_summary_csv,
    ChatClient, Completer, EndpointError, EvalLimits, FnCompleter, Message, PromptLayout, QAExample,
};
use crate::output::{Format, Sink};
use crate::rng;
use crate::toy::{
    capacity_check, deltaw_experiment, ordering_comparison, random_gradcheck, separation_experiment,
};

#[derive(Debug, Parser)]
#[command(name = "ragdepth", version, about = "Reasoning-depth experiments for retrieval-augmented transformers")]
pub struct Cli {
    /// TOML file with [simulate], [analyze], [bounds], [toy] and [harness] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to ./out/<timestamp>.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo runs of the erasure cascade.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Closed-form recurrence, threshold and depth-budget calculations.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Information-theoretic bound calculators.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Toy attention-network experiments.
    #[command(subcommand)]
    Toy(ToyCmd),
    /// Question-answering prompt harness.
    #[command(subcommand)]
    Harness(HarnessCmd),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Uniform layers of the given widths.
    MonteCarlo {
        /// Layer widths, bottom first.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Randomly scheduled layered tree against per-layer fixed points.
    Appendix {
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// One parent/child transition with a pinned parent erasure count.
    Transition {
        #[arg(long)]
        parent_width: Option<usize>,
        #[arg(long)]
        parent_erased: Option<usize>,
        #[arg(long)]
        child_width: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RecurrenceArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    FixedPoint {
        #[command(flatten)]
        rec: RecurrenceArgs,
    },
    /// f(t) against the identity on a uniform grid.
    Curve {
        #[command(flatten)]
        rec: RecurrenceArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Threshold h over the coupled (q, n) grid.
    Grid {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        q_lo: Option<f64>,
        #[arg(long)]
        q_hi: Option<f64>,
        #[arg(long)]
        n_lo: Option<u32>,
        #[arg(long)]
        n_hi: Option<u32>,
    },
    /// Retrieval probability needed to erase a whole layer.
    Erase {
        #[arg(long, value_delimiter = ',')]
        delta: Option<Vec<f64>>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Extraction depth against direct reasoning depth.
    Budget {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        filter_layers: Option<f64>,
        #[arg(long)]
        layer: Option<f64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub h_w: Option<f64>,
    #[arg(long)]
    pub i_wz: Option<f64>,
    #[arg(long)]
    pub h_zr: Option<f64>,
    #[arg(long)]
    pub h_v: Option<f64>,
    #[arg(long)]
    pub i_sv: Option<f64>,
    #[arg(long)]
    pub h_what: Option<f64>,
    #[arg(long)]
    pub i_what_v: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub fano_c: Option<f64>,
    #[arg(long)]
    pub t_base: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub n_tokens: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCmd {
    /// Error lower bound from H(w) and I(w;z).
    Fano(BoundArgs),
    /// Fraction of distracted heads.
    Alpha(BoundArgs),
    /// Noise-impact bound.
    Noise(BoundArgs),
    /// Spread needed for a given noise mass.
    Spread(BoundArgs),
    /// Noise mass gap for a given spread.
    Gap(BoundArgs),
    /// Feed-forward failure bound.
    Mlp(BoundArgs),
    /// Grid over delta and I(w;z).
    Sweep(BoundArgs),
}

#[derive(Debug, Subcommand)]
pub enum ToyCmd {
    /// Pair-wise vs triple-wise relevance with matched nets.
    Separation {
        /// Number of seeds, offset from --seed.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Query-first vs query-last under a causal mask.
    Ordering {
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Low-rank score correction fits over spread budgets.
    Deltaw {
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        n_noise: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        spreads: Option<Vec<f64>>,
    },
    /// Representation capacity against the filtering requirement.
    Capacity {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        p_bits: Option<u32>,
        #[arg(long)]
        heads: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        h_w: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Finite-difference check of the hand-written gradients.
    Gradcheck {
        #[arg(long)]
        nets: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mock {
    /// Answers with the first gold answer.
    Oracle,
    /// Always abstains.
    Abstain,
}

#[derive(Debug, Clone, Args)]
pub struct HarnessArgs {
    /// JSONL dataset; synthetic examples are used when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Layout names such as query_first+gold+2; repeatable.
    #[arg(long = "layout")]
    pub layouts: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum HarnessCmd {
    /// Renders every (example, layout) prompt.
    Prompts(HarnessArgs),
    /// Writes a synthetic dataset as JSONL.
    Synth {
        #[arg(long)]
        examples: Option<usize>,
        #[arg(long)]
        distractors: Option<usize>,
    },
    /// Sends prompts to the endpoint (or a mock) and scores the answers.
    Eval {
        #[command(flatten)]
        data: HarnessArgs,
        #[arg(long, value_enum)]
        mock: Option<Mock>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        base_url: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
    Endpoint(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Usage(m),
            Error::Endpoint(e) => Failure::Endpoint(e.to_string()),
            other => Failure::Run(other),
        }
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(_) => 2,
            Failure::Endpoint(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "configuration error: {m}"),
            Failure::Run(e) => write!(f, "{e}"),
            Failure::Endpoint(m) => write!(f, "endpoint failure: {m}"),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.code()
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.format, cli.format);
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    apply_overrides(&cli.command, &mut cfg);

    let dir = match &cfg.out {
        Some(d) => d.clone(),
        None => timestamped_dir(Path::new("out")),
    };
    let sink = Sink::new(&dir, cfg.format)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?).map_err(Error::from)?;
    eprintln!("seed: {}", cfg.seed);
    info!("output directory {}", dir.display());

    match cfg.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            pool.install(|| execute(&cli.command, &cfg, &sink))
        }
        None => execute(&cli.command, &cfg, &sink),
    }
}

fn timestamped_dir(root: &Path) -> PathBuf {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S").to_string();
    let mut dir = root.join(&stamp);
    let mut k = 1;
    while dir.exists() {
        dir = root.join(format!("{stamp}-{k}"));
        k += 1;
    }
    dir
}

fn apply_overrides(cmd: &Command, cfg: &mut RunConfig) {
    match cmd {
        Command::Simulate(sub) => {
            let s = &mut cfg.simulate;
            match sub {
                SimulateCmd::MonteCarlo { widths, p, q, reps } => {
                    set(&mut s.widths, widths.clone());
                    set(&mut s.p, *p);
                    set(&mut s.q, *q);
                    set(&mut s.reps, *reps);
                }
                SimulateCmd::Appendix { layers, reps } => {
                    set(&mut s.layers, *layers);
                    set(&mut s.reps, *reps);
                }
                SimulateCmd::Transition {
                    parent_width,
                    parent_erased,
                    child_width,
                    p,
                    q,
                    replicates,
                } => {
                    let t = &mut s.transition;
                    set(&mut t.parent_width, *parent_width);
                    set(&mut t.parent_erased, *parent_erased);
                    set(&mut t.child_width, *child_width);
                    set(&mut t.p, *p);
                    set(&mut t.q, *q);
                    set(&mut t.replicates, *replicates);
                }
            }
        }
        Command::Analyze(sub) => {
            let a = &mut cfg.analyze;
            let mut rec = |r: &RecurrenceArgs| {
                set(&mut a.p, r.p);
                set(&mut a.q, r.q);
                set(&mut a.n, r.n);
            };
            match sub {
                AnalyzeCmd::FixedPoint { rec: r } => rec(r),
                AnalyzeCmd::Curve { rec: r, samples } => {
                    rec(r);
                    set(&mut a.samples, *samples);
                }
                AnalyzeCmd::Grid {
                    steps,
                    q_lo,
                    q_hi,
                    n_lo,
                    n_hi,
                } => {
                    set(&mut a.grid_steps, *steps);
                    set(&mut a.range.q_lo, *q_lo);
                    set(&mut a.range.q_hi, *q_hi);
                    set(&mut a.range.n_lo, *n_lo);
                    set(&mut a.range.n_hi, *n_hi);
                }
                AnalyzeCmd::Erase { delta, q, n, layers } => {
                    set(&mut a.deltas, delta.clone());
                    set(&mut a.q, *q);
                    set(&mut a.n, *n);
                    set(&mut a.layers, *layers);
                }
                AnalyzeCmd::Budget {
                    lambda,
                    filter_layers,
                    layer,
                } => {
                    set(&mut a.lambda, *lambda);
                    set(&mut a.filter_layers, *filter_layers);
                    set(&mut a.layer, *layer);
                }
            }
        }
        Command::Bounds(sub) => {
            let a = match sub {
                BoundsCmd::Fano(a)
                | BoundsCmd::Alpha(a)
                | BoundsCmd::Noise(a)
                | BoundsCmd::Spread(a)
                | BoundsCmd::Gap(a)
                | BoundsCmd::Mlp(a)
                | BoundsCmd::Sweep(a) => a,
            };
            let b = &mut cfg.bounds;
            let i = &mut b.inputs;
            set(&mut i.h_w, a.h_w);
            set(&mut i.i_wz, a.i_wz);
            set(&mut i.h_zr, a.h_zr);
            set(&mut i.h_v, a.h_v);
            set(&mut i.i_sv, a.i_sv);
            set(&mut i.h_what, a.h_what);
            set(&mut i.i_what_v, a.i_what_v);
            set(&mut i.delta, a.delta);
            set(&mut i.c1, a.c1);
            set(&mut i.c2, a.c2);
            set(&mut i.fano_c, a.fano_c);
            set(&mut b.t_base, a.t_base);
            set(&mut b.epsilon, a.epsilon);
            set(&mut b.spread, a.spread);
            set(&mut b.n_tokens, a.n_tokens);
            set(&mut b.steps, a.steps);
        }
        Command::Toy(sub) => {
            let t = &mut cfg.toy;
            match sub {
                ToyCmd::Separation { seeds, steps } => {
                    set(&mut t.separation.seeds, seeds.map(|k| (0..k).collect()));
                    set(&mut t.separation.train.steps, *steps);
                }
                ToyCmd::Ordering { seeds, steps } => {
                    set(&mut t.ordering.seeds, seeds.map(|k| (0..k).collect()));
                    set(&mut t.ordering.train.steps, *steps);
                }
                ToyCmd::Deltaw {
                    instances,
                    n_noise,
                    spreads,
                } => {
                    set(&mut t.deltaw.instances, *instances);
                    set(&mut t.deltaw.n_noise, *n_noise);
                    set(&mut t.deltaw.spreads, spreads.clone());
                }
                ToyCmd::Capacity {
                    m,
                    p_bits,
                    heads,
                    n,
                    h_w,
                    c,
                } => {
                    let c0 = &mut t.capacity;
                    set(&mut c0.m, *m);
                    set(&mut c0.p_bits, *p_bits);
                    set(&mut c0.heads, *heads);
                    set(&mut c0.n, *n);
                    set(&mut c0.h_w, *h_w);
                    set(&mut c0.c, *c);
                }
                ToyCmd::Gradcheck { nets } => set(&mut t.gradcheck_nets, *nets),
            }
        }
        Command::Harness(sub) => {
            let h = &mut cfg.harness;
            let mut data = |d: &HarnessArgs| {
                if d.dataset.is_some() {
                    h.dataset = d.dataset.clone();
                }
                if !d.layouts.is_empty() {
                    h.layouts = d.layouts.clone();
                }
            };
            match sub {
                HarnessCmd::Prompts(d) => data(d),
                HarnessCmd::Synth { examples, distractors } => {
                    set(&mut h.synth_examples, *examples);
                    set(&mut h.synth_distractors, *distractors);
                }
                HarnessCmd::Eval {
                    data: d,
                    model,
                    base_url,
                    ..
                } => {
                    data(d);
                    set(&mut h.endpoint.model, model.clone());
                    set(&mut h.endpoint.base_url, base_url.clone());
                }
            }
        }
    }
}

fn execute(cmd: &Command, cfg: &RunConfig, sink: &Sink) -> Outcome {
    match cmd {
        Command::Simulate(sub) => simulate(sub, cfg, sink),
        Command::Analyze(sub) => analyze(sub, cfg, sink),
        Command::Bounds(sub) => bounds(sub, cfg, sink),
        Command::Toy(sub) => toy(sub, cfg, sink),
        Command::Harness(sub) => harness(sub, cfg, sink),
    }
}

fn simulate(cmd: &SimulateCmd, cfg: &RunConfig, sink: &Sink) -> Outcome {
    let s = &cfg.simulate;
    match cmd {
        SimulateCmd::MonteCarlo { .. } => {
            let params = s
                .widths
                .iter()
                .map(|&w| LayerParams::new(s.p, s.q, w))
                .collect::<crate::Result<Vec<_>>>()?;
            let run = run_monte_carlo(&params, s.reps, cfg.seed)?;
            sink.emit("monte_carlo", &layer_rows(&run)?, true)?;
        }
        SimulateCmd::Appendix { .. } => {
            let rows = replicate_appendix_sim(s.layers, s.reps, cfg.seed, &s.schedule)?;
            sink.emit("appendix", &rows, true)?;
        }
        SimulateCmd::Transition { .. } => {
            let t = &s.transition;
            let pinned = PinnedTransition {
                parent_width: t.parent_width,
                parent_erased: t.parent_erased,
                child: LayerParams::new(t.p, t.q, t.child_width)?,
            };
            let est = pinned.simulate(t.replicates, cfg.seed)?;
            sink.emit("transition", &[est], true)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FixedPointRow {
    p: f64,
    q: f64,
    n: u32,
    h: f64,
    critical_t: Option<f64>,
    t_hat: Option<f64>,
    residual: Option<f64>,
}

fn analyze(cmd: &AnalyzeCmd, cfg: &RunConfig, sink: &Sink) -> Outcome {
    let a = &cfg.analyze;
    match cmd {
        AnalyzeCmd::FixedPoint { .. } => {
            let params = RecurrenceParams::new(a.p, a.q, a.n)?;
            let r = first_zero(&params, FIXED_POINT_TOL)?;
            let row = FixedPointRow {
                p: a.p,
                q: a.q,
                n: a.n,
                h: r.threshold_h,
                critical_t: r.critical_t,
                t_hat: r.t_hat,
                residual: r.residual,
            };
            sink.emit("fixed_point", &[row], true)?;
        }
        AnalyzeCmd::Curve { .. } => {
            let params = RecurrenceParams::new(a.p, a.q, a.n)?;
            sink.emit("f_vs_t", &f_vs_t(&params, a.samples)?, true)?;
        }
        AnalyzeCmd::Grid { .. } => {
            sink.emit("threshold_grid", &coupled_grid(&a.range, a.grid_steps)?, true)?;
        }
        AnalyzeCmd::Erase { .. } => {
            let rows = a
                .deltas
                .iter()
                .map(|&d| erase_layer_requirement(d, a.q, a.n))
                .collect::<crate::Result<Vec<_>>>()?;
            sink.emit("erase_layer", &rows, true)?;
            sink.emit("threshold_by_layer", &threshold_by_layer(&a.range, a.layers, &a.deltas)?, false)?;
        }
        AnalyzeCmd::Budget { .. } => {
            sink.emit("depth_budget", &[depth_budget(a.lambda, a.filter_layers, a.layer)?], true)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct FanoRow {
    h_w: f64,
    i_wz: f64,
    raw: f64,
    p_e: f64,
    vacuous: bool,
}

#[derive(Serialize)]
struct AlphaRow {
    delta: f64,
    h_w: f64,
    i_wz: f64,
    p_e: f64,
    alpha: f64,
}

#[derive(Serialize)]
struct ValueRow {
    quantity: &'static str,
    epsilon: f64,
    spread: f64,
    n_tokens: u64,
    value: f64,
}

#[derive(Serialize)]
struct MlpRow {
    t_base: f64,
    raw: f64,
    probability: f64,
    vacuous: bool,
    t_prime: f64,
}

fn bounds(cmd: &BoundsCmd, cfg: &RunConfig, sink: &Sink) -> Outcome {
    let b = &cfg.bounds;
    let i = &b.inputs;
    match cmd {
        BoundsCmd::Fano(_) => {
            let f = fano_error_lower(i.h_w, i.i_wz)?;
            let row = FanoRow {
                h_w: i.h_w,
                i_wz: i.i_wz,
                raw: f.raw,
                p_e: f.value,
                vacuous: f.vacuous,
            };
            sink.emit("fano", &[row], true)?;
        }
        BoundsCmd::Alpha(_) => {
            let p_e = fano_error_lower(i.h_w, i.i_wz)?.value;
            let row = AlphaRow {
                delta: i.delta,
                h_w: i.h_w,
                i_wz: i.i_wz,
                p_e,
                alpha: distraction_fraction(i.delta, p_e)?,
            };
            sink.emit("alpha", &[row], true)?;
        }
        BoundsCmd::Noise(_) => {
            noise_impact_bound(i)?;
            sink.emit("noise", &[evaluate_row(i, b.t_base)?], true)?;
        }
        BoundsCmd::Spread(_) => {
            let row = ValueRow {
                quantity: "spread_budget",
                epsilon: b.epsilon,
                spread: lora_spread_budget(b.epsilon)?,
                n_tokens: b.n_tokens,
                value: lora_spread_budget(b.epsilon)?,
            };
            sink.emit("spread", &[row], true)?;
        }
        BoundsCmd::Gap(_) => {
            let row = ValueRow {
                quantity: "noise_gap",
                epsilon: b.epsilon,
                spread: b.spread,
                n_tokens: b.n_tokens,
                value: lora_noise_gap(b.spread, b.epsilon, b.n_tokens)?,
            };
            sink.emit("gap", &[row], true)?;
        }
        BoundsCmd::Mlp(_) => {
            let m = mlp_failure_bound(i, b.t_base)?;
            let row = MlpRow {
                t_base: b.t_base,
                raw: m.probability.raw,
                probability: m.probability.value,
                vacuous: m.probability.vacuous,
                t_prime: m.t_prime,
            };
            sink.emit("mlp", &[row], true)?;
        }
        BoundsCmd::Sweep(_) => {
            sink.emit("bounds_sweep", &sweep_delta_iwz(i, b.steps, b.t_base)?, true)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    kind: String,
    layers: usize,
    params: usize,
    seeds: usize,
    mean_accuracy: f64,
    mean_baseline: f64,
}

#[derive(Serialize)]
struct OrderingSummaryRow {
    layout: &'static str,
    seeds: usize,
    mean_accuracy: f64,
    budget_bits: f64,
    required_bits: f64,
    capacity_satisfied: bool,
}

fn toy(cmd: &ToyCmd, cfg: &RunConfig, sink: &Sink) -> Outcome {
    let t = &cfg.toy;
    match cmd {
        ToyCmd::Separation { .. } => {
            let mut sep = t.separation.clone();
            sep.seeds = sep.seeds.iter().map(|s| cfg.seed.wrapping_add(*s)).collect();
            let report = separation_experiment(&sep)?;
            sink.emit("separation_curves", &report.rows, false)?;
            let rows: Vec<SummaryRow> = report
                .summaries
                .iter()
                .map(|s| SummaryRow {
                    kind: s.kind.clone(),
                    layers: s.layers,
                    params: s.params,
                    seeds: s.accuracies.len(),
                    mean_accuracy: s.mean_accuracy,
                    mean_baseline: s.mean_baseline,
                })
                .collect();
            sink.emit("separation", &rows, true)?;
        }
        ToyCmd::Ordering { .. } => {
            let mut ord = t.ordering.clone();
            ord.seeds = ord.seeds.iter().map(|s| cfg.seed.wrapping_add(*s)).collect();
            let report = ordering_comparison(&ord)?;
            sink.emit("ordering_curves", &report.rows, false)?;
            let c = &report.capacity;
            let rows = [
                OrderingSummaryRow {
                    layout: "query_first",
                    seeds: report.query_first.len(),
                    mean_accuracy: report.mean_query_first,
                    budget_bits: c.budget_bits,
                    required_bits: c.query_first_bits,
                    capacity_satisfied: c.query_first_satisfied,
                },
                OrderingSummaryRow {
                    layout: "query_last",
                    seeds: report.query_last.len(),
                    mean_accuracy: report.mean_query_last,
                    budget_bits: c.budget_bits,
                    required_bits: c.query_last_bits,
                    capacity_satisfied: c.query_last_satisfied,
                },
            ];
            sink.emit("ordering", &rows, true)?;
        }
        ToyCmd::Deltaw { .. } => {
            sink.emit("deltaw", &deltaw_experiment(&t.deltaw, cfg.seed)?, true)?;
        }
        ToyCmd::Capacity { .. } => {
            let c = &t.capacity;
            sink.emit("capacity", &[capacity_check(c.m, c.p_bits, c.heads, c.n, c.h_w, c.c)?], true)?;
        }
        ToyCmd::Gradcheck { .. } => {
            use rayon::prelude::*;
            let rows = (0..t.gradcheck_nets)
                .into_par_iter()
                .map(|k| random_gradcheck(cfg.seed, k))
                .collect::<crate::Result<Vec<_>>>()?;
            sink.emit("gradcheck", &rows, true)?;
            let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
            if worst >= 1e-4 {
                return Err(Error::Numeric(format!("gradient check failed: max relative error {worst:.3e}")).into());
            }
        }
    }
    Ok(())
}

fn harness_examples(cfg: &RunConfig) -> std::result::Result<Vec<QAExample>, Failure> {
    let h = &cfg.harness;
    let examples = match &h.dataset {
        Some(path) => {
            let ds = load_dataset(path)?;
            for w in &ds.warnings {
                warn!("{w}");
            }
            ds.examples
        }
        None => {
            let mut r = rng::stream(cfg.seed, 0);
            gen_synthetic_qa(h.synth_examples, h.synth_distractors, &mut r)?
        }
    };
    let total = examples.len();
    let valid: Vec<QAExample> = examples.into_iter().filter(QAExample::is_valid).collect();
    if valid.len() < total {
        warn!("dropped {} example(s) with answer-containment violations", total - valid.len());
    }
    Ok(valid)
}

fn harness_layouts(cfg: &RunConfig) -> std::result::Result<Vec<PromptLayout>, Failure> {
    Ok(cfg
        .harness
        .layouts
        .iter()
        .map(|s| PromptLayout::parse(s))
        .collect::<crate::Result<Vec<_>>>()?)
}

#[derive(Serialize)]
struct PromptRow {
    example_id: usize,
    layout: String,
    role: String,
    content: String,
}

fn question_of(messages: &[Message]) -> Option<&str> {
    messages
        .iter()
        .flat_map(|m| m.content.split("\n\n"))
        .find_map(|seg| seg.strip_prefix("Question: "))
}

fn harness(cmd: &HarnessCmd, cfg: &RunConfig, sink: &Sink) -> Outcome {
    let h = &cfg.harness;
    match cmd {
        HarnessCmd::Prompts(_) => {
            let examples = harness_examples(cfg)?;
            let layouts = harness_layouts(cfg)?;
            let mut rows = Vec::new();
            for (id, ex) in examples.iter().enumerate() {
                for layout in &layouts {
                    for m in to_messages(&assemble_prompt(ex, layout)?) {
                        rows.push(PromptRow {
                            example_id: id,
                            layout: layout.name(),
                            role: m.role,
                            content: m.content,
                        });
                    }
                }
            }
            sink.emit("prompts", &rows, true)?;
        }
        HarnessCmd::Synth { .. } => {
            let mut r = rng::stream(cfg.seed, 0);
            let examples = gen_synthetic_qa(h.synth_examples, h.synth_distractors, &mut r)?;
            let path = sink.dir.join("synth.jsonl");
            write_dataset(&path, &examples)?;
            info!("wrote {} examples to {}", examples.len(), path.display());
        }
        HarnessCmd::Eval { mock, .. } => {
            let examples = harness_examples(cfg)?;
            let layouts = harness_layouts(cfg)?;
            let mut limits = EvalLimits {
                max_in_flight: h.endpoint.max_in_flight,
                requests_per_second: h.endpoint.requests_per_second,
            };
            if let Some(j) = cfg.jobs {
                limits.max_in_flight = limits.max_in_flight.min(j);
            }
            let answers: HashMap<&str, &str> = examples
                .iter()
                .map(|e| (e.question.as_str(), e.answers[0].as_str()))
                .collect();
            let model;
            let report = match mock {
                Some(kind) => {
                    model = format!("mock-{}", kind.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default());
                    let kind = *kind;
                    let answers = &answers;
                    let completer = FnCompleter(move |messages: &[Message]| {
                        let text = match kind {
                            Mock::Abstain => "NO-RES".to_owned(),
                            Mock::Oracle => question_of(messages)
                                .and_then(|q| answers.get(q))
                                .map_or_else(|| "NO-RES".to_owned(), |a| (*a).to_owned()),
                        };
                        Ok::<_, EndpointError>(text)
                    });
                    run_eval(&examples, &layouts, &completer as &dyn Completer, limits)?
                }
                None => {
                    model = h.endpoint.model.clone();
                    let client = ChatClient::from_env(h.endpoint.clone()).map_err(Error::from)?;
                    run_eval(&examples, &layouts, &client, limits)?
                }
            };
            sink.emit("results", &report.records, false)?;
            write_summary_csv(sink.dir.join("summary_table1.csv"), &model, &report.summary)?;
            sink.emit("summary", &report.summary, true)?;
            for f in &report.failures {
                warn!("{f}");
            }
            if !report.records.is_empty() && report.failures.len() == report.records.len() {
                return Err(Failure::Endpoint(format!(
                    "all {} requests failed; first: {}",
                    report.records.len(),
                    report.failures[0]
                )));
            }
        }
    }
    Ok(())
}

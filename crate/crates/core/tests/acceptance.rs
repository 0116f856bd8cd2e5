//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Criterion 12 needs a live endpoint and a
//! dataset (RALM_API_KEY plus RAGDEPTH_QA_DATASET) and is skipped otherwise.

mod common;

use std::time::{Duration, Instant};

use rand::Rng as _;
use ragdepth::analysis::{
    coupled_grid, erase_layer_requirement, eval_f, eval_g, eval_g_prime, first_zero, requirement_for_epsilon,
    threshold_by_layer, threshold_h, CoupledRange, RecurrenceParams, FIXED_POINT_TOL,
};
use ragdepth::bounds::{fano_error_lower, mlp_failure_bound, noise_impact_bound, BoundInputs};
use ragdepth::fission::{replicate_appendix_sim, AppendixSchedule, LayerParams, PinnedTransition};
use ragdepth::harness::{load_dataset, run_eval, ChatClient, EndpointConfig, EvalLimits, PromptLayout};
use ragdepth::rng;
use ragdepth::toy::{
    deltaw_experiment, ordering_comparison, random_gradcheck, separation_experiment, DeltaWConfig, OrderingConfig,
    PredicateKind, SeparationConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(id: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = body();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = o.pass && in_time;
    let timing = if in_time {
        format!("{:.2}s", took.as_secs_f64())
    } else {
        format!("{:.2}s over the {:.0}s limit", took.as_secs_f64(), limit.as_secs_f64())
    };
    println!("criterion {id}: {} {} [{timing}]", if pass { "PASS" } else { "FAIL" }, o.detail);
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn c1_identities() -> Outcome {
    let mut r = rng::stream(101, 0);
    let mut worst_ends: f64 = 0.0;
    let mut worst_deriv: f64 = 0.0;
    for _ in 0..1000 {
        let p = r.random_range(0.0..1.0);
        let q = r.random_range(0.05..0.95);
        let n = r.random_range(1..=16);
        let params = RecurrenceParams::new(p, q, n).unwrap();
        worst_ends = worst_ends
            .max((eval_f(0.0, &params).unwrap() - p).abs())
            .max((eval_f(1.0, &params).unwrap() - 1.0).abs());
        let t = r.random_range(0.01..0.99);
        let h = 1e-6;
        let numeric = (eval_g(t + h, &params).unwrap() - eval_g(t - h, &params).unwrap()) / (2.0 * h);
        let analytic = eval_g_prime(t, &params).unwrap();
        worst_deriv = worst_deriv.max((analytic - numeric).abs() / analytic.abs().max(1.0));
    }
    outcome(
        worst_ends <= 1e-12 && worst_deriv <= 1e-6,
        format!("max |f(0)-p|,|f(1)-1| = {worst_ends:.1e}; max g' rel err = {worst_deriv:.1e}"),
    )
}

fn c2_dichotomy() -> Outcome {
    let mut r = rng::stream(102, 0);
    let mut below_ok = 0;
    let mut above_ok = 0;
    let mut worst_residual: f64 = 0.0;
    for _ in 0..500 {
        let q = r.random_range(0.05..0.95);
        let n = r.random_range(1..=16);
        let h = threshold_h(q, n).unwrap();
        let p = h * r.random_range(0.001..0.999);
        let params = RecurrenceParams::new(p, q, n).unwrap();
        let rep = first_zero(&params, FIXED_POINT_TOL).unwrap();
        let Some(t_hat) = rep.t_hat else { continue };
        let residual = eval_g(t_hat, &params).unwrap().abs();
        worst_residual = worst_residual.max(residual);
        let negative = (1..=100).all(|k| {
            let t = t_hat + (1.0 - t_hat) * k as f64 / 101.0;
            eval_g(t, &params).unwrap() < 0.0
        });
        if t_hat > 0.0 && t_hat < 1.0 && residual <= 1e-10 && negative {
            below_ok += 1;
        }
    }
    for _ in 0..500 {
        let q = r.random_range(0.05..0.95);
        let n = r.random_range(1..=16);
        let h = threshold_h(q, n).unwrap();
        let p = h + (1.0 - h) * r.random_range(0.0..1.0);
        let params = RecurrenceParams::new(p, q, n).unwrap();
        if (0..=100).all(|k| eval_g(k as f64 / 100.0, &params).unwrap() >= -1e-9) {
            above_ok += 1;
        }
    }
    outcome(
        below_ok == 500 && above_ok == 500,
        format!("p<h: {below_ok}/500 (max |g(t_hat)| {worst_residual:.1e}); p>=h: {above_ok}/500"),
    )
}

fn c3_threshold_floor() -> Outcome {
    let grid = coupled_grid(&CoupledRange::default(), 15).unwrap();
    let min = grid.iter().min_by(|a, b| a.h.total_cmp(&b.h)).unwrap();
    outcome(
        min.h >= 0.7 && (min.h - 0.722).abs() <= 0.005,
        format!("min h = {:.4} at q={:.2}, n={}", min.h, min.q, min.n),
    )
}

fn c4_transition() -> Outcome {
    let pinned = PinnedTransition {
        parent_width: 8,
        parent_erased: 4,
        child: LayerParams::new(0.2, 0.5, 4096).unwrap(),
    };
    let est = pinned.simulate(64, 7).unwrap();
    let oracle = 0.2484375;
    let sigma = (oracle * (1.0 - oracle) / est.samples as f64).sqrt();
    let z = (est.fraction - oracle) / sigma;
    outcome(
        est.samples >= 1 << 18 && z.abs() <= 3.0,
        format!("fraction {:.5} vs {oracle} over {} samples (z = {z:.2})", est.fraction, est.samples),
    )
}

fn appendix_check(seed: u64) -> (bool, f64, f64, f64) {
    let rows = replicate_appendix_sim(10, 10, seed, &AppendixSchedule::default()).unwrap();
    let max_dev = rows[..5]
        .iter()
        .map(|r| (r.mean_t - r.t_hat).abs())
        .fold(0.0, f64::max);
    let top = rows[7..].iter().map(|r| r.std_t).sum::<f64>() / 3.0;
    let bottom = rows[..3].iter().map(|r| r.std_t).sum::<f64>() / 3.0;
    (max_dev <= 0.1 && top > bottom, max_dev, top, bottom)
}

fn c5_appendix() -> Outcome {
    let (pass, dev, top, bottom) = appendix_check(7);
    let other = (0..10).filter(|&s| appendix_check(s).0).count();
    outcome(
        pass,
        format!(
            "seed 7: max bottom-5 |mean_t - t_hat| = {dev:.3}, std top3 {top:.3} vs bottom3 {bottom:.3}; \
             seeds 0..10 passing: {other}/10"
        ),
    )
}

fn c6_layer_erasure() -> Outcome {
    let req = erase_layer_requirement(0.9, 0.5, 4).unwrap();
    let spot = (req.p_exact - 0.6345).abs() <= 1e-3 && (req.p_approx - 0.6259).abs() <= 1e-3;
    let mut decreasing = true;
    for &(q, n) in &[(0.5, 4), (0.2, 2), (0.8, 16), (0.5, 10), (0.9, 3)] {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 1..100 {
            let r = requirement_for_epsilon(k as f64 / 100.0, q, n).unwrap();
            decreasing &= r.p_exact < prev.0 && r.p_approx < prev.1;
            prev = (r.p_exact, r.p_approx);
        }
    }
    let table = threshold_by_layer(&CoupledRange::default(), 10, &[0.1, 0.5, 0.9]).unwrap();
    let table_ok = table.len() == 30 && table.iter().all(|r| r.p_exact > 0.0 && r.p_exact <= 1.0);
    outcome(
        spot && decreasing && table_ok,
        format!(
            "p_exact {:.4}, p_approx {:.4}; decreasing in eps: {decreasing}; table rows {}",
            req.p_exact,
            req.p_approx,
            table.len()
        ),
    )
}

fn c7_bounds() -> Outcome {
    let fano = fano_error_lower(8.0, 5.0).unwrap().value;
    let eq1_inputs = BoundInputs {
        delta: 0.5,
        h_w: 7.0,
        i_wz: 3.0,
        h_zr: 10.0,
        c1: 1.0,
        c2: 0.0,
        ..BoundInputs::default()
    };
    let eq1 = noise_impact_bound(&eq1_inputs).unwrap();
    let eq2_inputs = BoundInputs {
        h_v: 6.0,
        delta: 0.8,
        i_what_v: 7.0,
        h_what: 8.0,
        i_sv: 4.0,
        fano_c: 8.0,
        ..BoundInputs::default()
    };
    let eq2 = mlp_failure_bound(&eq2_inputs, 0.0).unwrap().probability.raw;
    let spots = (fano - 0.25).abs() <= 1e-4 && (eq1 - 3.1623).abs() <= 1e-4 && (eq2 - 0.35).abs() <= 1e-4;

    let base = BoundInputs::default();
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for k in 1..=20 {
        let b = noise_impact_bound(&BoundInputs {
            delta: k as f64 / 20.0,
            ..base
        })
        .unwrap();
        monotone &= b <= prev;
        prev = b;
    }
    prev = f64::INFINITY;
    for k in 0..=16 {
        let b = noise_impact_bound(&BoundInputs {
            i_wz: base.h_w * k as f64 / 16.0,
            ..base
        })
        .unwrap();
        monotone &= b <= prev;
        prev = b;
    }
    outcome(
        spots && monotone,
        format!("fano {fano:.4}, noise bound {eq1:.4}, ffn raw {eq2:.4}; monotone in delta and I(w;z): {monotone}"),
    )
}

fn c8_gradients() -> Outcome {
    let worst = (0..20)
        .map(|k| random_gradcheck(2024, k).unwrap().max_rel_error)
        .fold(0.0, f64::max);
    outcome(worst < 1e-4, format!("max relative error over 20 nets = {worst:.2e}"))
}

fn c9_separation() -> Outcome {
    let sep = separation_experiment(&SeparationConfig::default()).unwrap();
    let mean = |k| sep.mean(k).unwrap_or(f64::NAN);
    let (pair, triple, virt) = (
        mean(PredicateKind::Pairwise),
        mean(PredicateKind::Triplewise),
        mean(PredicateKind::VirtualPairwise),
    );
    let seeds = SeparationConfig::default().seeds.len();
    let ord = ordering_comparison(&OrderingConfig::default()).unwrap();
    outcome(
        seeds >= 5 && pair >= 0.95 && triple <= 0.75 && virt >= 0.95 && ord.mean_query_first >= ord.mean_query_last,
        format!(
            "{seeds} seeds: pairwise {pair:.3}, triplewise {triple:.3}, virtual 2-layer {virt:.3}; \
             query first {:.3} vs last {:.3}",
            ord.mean_query_first, ord.mean_query_last
        ),
    )
}

fn c10_deltaw() -> Outcome {
    let cfg = DeltaWConfig::default();
    let rows = deltaw_experiment(&cfg, 7).unwrap();
    let mut bad = Vec::new();
    for id in 0..cfg.instances {
        let eps: Vec<f64> = rows
            .iter()
            .filter(|r| r.instance_id == id)
            .map(|r| r.achieved_epsilon)
            .collect();
        if eps.windows(2).any(|w| w[1] > w[0]) {
            bad.push(id);
        }
    }
    let drop: f64 = (0..cfg.instances)
        .map(|id| {
            let e: Vec<f64> = rows.iter().filter(|r| r.instance_id == id).map(|r| r.achieved_epsilon).collect();
            e[0] - e[e.len() - 1]
        })
        .sum::<f64>()
        / cfg.instances as f64;
    outcome(
        bad.is_empty() && cfg.instances == 10,
        format!(
            "{} instances, spreads {:?}; non-monotone: {bad:?}; mean eps drop {drop:.4}",
            cfg.instances, cfg.spreads
        ),
    )
}

fn c11_prompts() -> Outcome {
    let bad = common::golden_mismatches();
    let twice = common::fixture_examples().iter().all(|ex| {
        let text = common::rendered(ex, "query_both+gold+2");
        text.matches(&format!("Question: {}", ex.question)).count() == 2
    });
    outcome(
        bad.is_empty() && twice,
        format!("golden mismatches: {}; query_both repeats the question twice: {twice}", bad.len()),
    )
}

fn c12_live() -> Option<Outcome> {
    let dataset = std::env::var_os("RAGDEPTH_QA_DATASET")?;
    let client = ChatClient::from_env(EndpointConfig::default()).ok()?;
    let examples = load_dataset(dataset).ok()?.examples;
    let layouts: Vec<PromptLayout> = ["query_first+gold", "query_first+gold+1", "query_both+gold+1"]
        .iter()
        .map(|s| PromptLayout::parse(s).unwrap())
        .collect();
    let report = run_eval(&examples, &layouts, &client, EvalLimits::default()).ok()?;
    let detail = report
        .summary
        .iter()
        .map(|s| format!("{} {:.3}", s.layout, s.accuracy))
        .collect::<Vec<_>>()
        .join(", ");
    Some(outcome(true, detail))
}

fn main() {
    let mut all = true;
    all &= run("1", secs(1), c1_identities);
    all &= run("2", secs(5), c2_dichotomy);
    all &= run("3", secs(1), c3_threshold_floor);
    all &= run("4", secs(10), c4_transition);
    all &= run("5", secs(30), c5_appendix);
    all &= run("6", secs(1), c6_layer_erasure);
    all &= run("7", secs(1), c7_bounds);
    all &= run("8", secs(30), c8_gradients);
    all &= run("9", secs(600), c9_separation);
    all &= run("10", secs(120), c10_deltaw);
    all &= run("11", secs(1), c11_prompts);
    match c12_live() {
        Some(o) => println!("criterion 12: PASS {} (directional only)", o.detail),
        None => println!("criterion 12: SKIP needs RALM_API_KEY and RAGDEPTH_QA_DATASET"),
    }
    if !all {
        std::process::exit(1);
    }
}

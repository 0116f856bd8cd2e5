//! Fitting a low-rank correction to attention scores so noise tokens lose
//! their mass, first unconstrained and then under growing spread budgets.
use ragdepth::rng;
use ragdepth::toy::{fit_delta_w, noise_mass, spread_sweep, DeltaWInstance, DeltaWOptimizer, FitMode};

fn main() -> ragdepth::Result<()> {
    let inst = DeltaWInstance::random(10, 4, 3, &mut rng::stream(1, 0))?;
    let opt = DeltaWOptimizer::default();

    let free = fit_delta_w(&inst, FitMode::TargetEpsilon(0.05), &opt)?;
    println!(
        "target eps 0.05: achieved {:.4}, spread {:.3} (needed at least {:.3}), max noise mass {:.4}",
        free.achieved_epsilon,
        free.spread_delta,
        free.implied_spread,
        noise_mass(&free).iter().cloned().fold(0.0, f64::max)
    );

    for fit in spread_sweep(&inst, &[0.0, 0.25, 0.5, 1.0, 2.0], &opt)? {
        println!(
            "budget {:>4.2}: spread {:.3}, eps {:.4}",
            fit.allowed_spread.unwrap_or(f64::NAN),
            fit.spread_delta,
            fit.achieved_epsilon
        );
    }
    Ok(())
}

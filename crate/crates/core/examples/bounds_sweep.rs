//! Bound calculators on one input set, then a small sweep over delta and I(w;z).
use ragdepth::bounds::{
    distraction_fraction, fano_error_lower, lora_noise_gap, lora_spread_budget, mlp_failure_bound,
    noise_impact_bound, sweep_delta_iwz, BoundInputs,
};

fn main() -> ragdepth::Result<()> {
    let inputs = BoundInputs::default();
    let fano = fano_error_lower(inputs.h_w, inputs.i_wz)?;
    println!("error lower bound   {:.4} (raw {:.4}, vacuous {})", fano.value, fano.raw, fano.vacuous);
    println!("distracted fraction {:.4}", distraction_fraction(inputs.delta, fano.value)?);
    println!("noise impact        {:.4}", noise_impact_bound(&inputs)?);
    let mlp = mlp_failure_bound(&inputs, 0.0)?;
    println!("mlp failure         {:.4} at t' = {:.3}", mlp.probability.value, mlp.t_prime);
    println!("spread for eps=0.1  {:.4}", lora_spread_budget(0.1)?);
    println!("gap at spread 0.1   {:.4}", lora_noise_gap(0.1, 0.1, 10)?);

    println!("\ndelta  I(w;z)  P_e    alpha  noise");
    for r in sweep_delta_iwz(&inputs, 3, 0.0)? {
        println!("{:.2}   {:>5.2}  {:.3}  {:.3}  {:.3}", r.delta, r.i_wz, r.fano_p_e, r.alpha, r.noise_bound);
    }
    Ok(())
}

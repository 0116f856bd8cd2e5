//! Erasure recurrence: threshold, critical point and the first fixed point
//! for a few (p, q, n) settings.

use ragdepth::analysis::{first_zero, RecurrenceParams, FIXED_POINT_TOL};

fn main() -> ragdepth::Result<()> {
    println!("{:>5} {:>5} {:>3} {:>8} {:>8} {:>8}", "p", "q", "n", "h", "t*", "t_hat");
    for &(p, q, n) in &[(0.3, 0.5, 4), (0.1, 0.5, 4), (0.7, 0.5, 4), (0.3, 0.9, 8), (0.05, 0.2, 2)] {
        let r = first_zero(&RecurrenceParams::new(p, q, n)?, FIXED_POINT_TOL)?;
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{p:>5} {q:>5} {n:>3} {:>8.4} {:>8} {:>8}   erased everywhere: {}",
            r.threshold_h,
            show(r.critical_t),
            show(r.t_hat),
            r.first_zero_or_one() >= 1.0
        );
    }
    Ok(())
}

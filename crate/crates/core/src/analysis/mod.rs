//! Closed-form analysis of the erasure cascade.

mod budget;
mod layer;
mod recurrence;
mod sweep;

pub use budget::{depth_budget, DepthBudget};
pub use layer::{erase_layer_requirement, requirement_for_epsilon, LayerErasureRequirement};
pub use recurrence::{
    critical_point, critical_point_raw, eval_f, eval_g, eval_g_prime, first_zero, threshold_h,
    FixedPointReport, RecurrenceParams, FIXED_POINT_TOL, MAX_BISECTION_ITERS,
};
pub use sweep::{
    coupled_grid, f_vs_t, threshold_by_layer, CoupledRange, CurveSample, GridPoint, ThresholdRow,
};

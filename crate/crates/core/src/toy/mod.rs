//! Synthetic relevance-filtering tasks and a tiny attention network.

mod deltaw;
mod experiments;
mod net;
mod task;
mod train;

pub use deltaw::{
    deltaw_experiment, fit_delta_w, fitted_attention, noise_mass, spread_sweep, DeltaWConfig, DeltaWFit, DeltaWInstance, DeltaWOptimizer,
    DeltaWRow, FitMode,
};
pub use experiments::{
    capacity_check, ordering_capacity, ordering_comparison, ordering_experiment, separation_experiment,
    CapacityCheck, ExperimentRow, KindSummary, NetShape, OrderingCapacity, OrderingConfig, OrderingReport,
    OrderingTask, QueryLayout, RelevanceSetup, SeparationConfig, SeparationReport,
};
pub use net::{
    gradient_check, random_gradcheck, AttentionNet, GradcheckRow, Layout, NetConfig, Sample, Slot, Target, GRADCHECK_FLOOR,
    GRADCHECK_STEP,
};
pub use task::{
    brute_force_labels, counting_labels, disjointness_task, gen_task, virtual_signature, PredicateKind, Role,
    ToyTask, ToyToken,
};
pub use train::{accuracy, train, CurvePoint, FitResult, Optimizer, TrainConfig};

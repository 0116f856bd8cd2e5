//! Random reasoning trees and the retrieval-driven erasure cascade.
//!
//! Layers are indexed bottom-up: layer 0 holds the most basic reasoning
//! steps and the last layer is the single answer node.

mod cascade;
mod monte_carlo;
mod tree;

pub use cascade::{apply_retrieval, propagate_fission, ErasureCause, ErasureState, RetrievalMark};
pub use monte_carlo::{
    layer_rows, replicate_appendix_sim, run_monte_carlo, AppendixRow, AppendixSchedule, FissionRunResult,
    PinnedTransition, TransitionEstimate,
};
pub use tree::{build_tree, validate_layers, LayerParams, TreeTopology};

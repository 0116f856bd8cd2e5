//! Desk-scale laboratory for how retrieval changes the reasoning depth a
//! fixed-depth transformer needs.
//!
//! The crate is organised by experiment family:
//!
//! - [`fission`]: random layered reasoning trees, retrieval marks and the
//!   top-down erasure cascade, with seeded Monte Carlo estimates.
//! - [`analysis`]: closed forms for the erasure recurrence, its fixed point,
//!   the fission threshold, whole-layer erasure requirements and depth budgets.
//! - [`bounds`]: calculators for the noise-impact, filtering and feed-forward
//!   failure bounds.
//! - [`toy`]: synthetic pair-wise / triple-wise relevance tasks and a small
//!   attention network with hand-written gradients.
//! - [`harness`]: QA ingestion, prompt layouts, an OpenAI-compatible client
//!   and exact-match scoring.
//!
//! [`cli`] wires all of them into the `ragdepth` binary.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod fission;
pub mod harness;
pub mod output;
pub mod rng;
pub mod toy;

pub use error::{Error, Result};

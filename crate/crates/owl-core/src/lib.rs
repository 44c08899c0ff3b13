//! Core algorithms for incremental open-world learning experiments.
//!
//! The crate is split along the lifecycle of an experiment:
//!
//! * [`dataset`] — samples, manifests, increment plans, and feature stores.
//! * [`planner`] — unified labeling across dataset releases and generation of
//!   incremental experiment plans with stratified, seeded splits.
//! * [`confusion`] / [`measures`] — confusion-matrix construction, the
//!   classification/detection/recognition reductions, and derived measures
//!   (accuracy, multiclass MCC, arithmetic-mean NMI, novelty reaction time).
//! * [`predictor`], [`ann`], [`gmm_finch`] — the predictor contract and the
//!   two baselines: a threshold-calibrated softmax classifier and a
//!   GMM-over-FINCH-clusters recognizer.
//! * [`evaluator`] — the per-increment pre-feedback / feedback / post-feedback
//!   loop and its bookkeeping.
//! * [`synth`] — deterministic Gaussian-blob benchmarks and feature-space
//!   perturbations for tolerance studies.
//!
//! Everything here is deterministic given the configured seeds and is kept
//! `no_std` (with `alloc`) so the algorithms stay free of IO concerns; file
//! formats and the CLI live in the companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ann;
pub mod confusion;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod finch;
pub mod gaussian;
pub mod gmm_finch;
pub mod measures;
pub mod planner;
pub mod predictor;
pub mod rng;
pub mod synth;

pub use error::Error;

/// Catch-all label for samples the predictor deems outside its known classes.
pub const UNKNOWN_LABEL: &str = "unknown";

/// Prefix for recognized-unknown cluster labels (`unknown_1`, `unknown_2`, ...).
pub const UNKNOWN_CLUSTER_PREFIX: &str = "unknown_";

/// Label that detection reductions fold all known classes into.
pub const KNOWN_LABEL: &str = "known";

/// True for labels in the reserved unknown namespace.
///
/// Input manifests must not use these; predictors and reductions own them.
pub fn is_reserved_label(label: &str) -> bool {
    label == UNKNOWN_LABEL || label.starts_with(UNKNOWN_CLUSTER_PREFIX)
}

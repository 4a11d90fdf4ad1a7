//! Correction of biases in non-representative social-media polls.
//!
//! The pipeline normalizes multi-option poll outcomes to a head-to-head
//! share, regresses outcomes on the stratum marginals of each poll's proxy
//! voters, and poststratifies the fitted model against reference population
//! distributions. A statistics kernel (OLS with inference, Pearson
//! correlation, inter-rater agreement, seeded bootstrap) and a synthetic
//! corpus generator with known ground truth support the estimation and its
//! verification.

pub mod attrs;
pub mod core_model;
pub mod ingest;
pub mod normalize;
pub mod poststrat;
pub mod stats;
pub mod synth;

pub use core_model::{
    DimensionRegistry, Election, FittedModel, PollRecord, ReferenceDistribution, StratumMarginals,
};
pub use normalize::NormalizedOutcome;
pub use poststrat::{BootstrapConfig, EstimateReport};
pub use stats::BootstrapSummary;

//! Self-contained statistics kernel: OLS with inference, Pearson correlation,
//! inter-rater agreement, and seeded bootstrap resampling.

pub mod agreement;
pub mod bootstrap;
pub mod correlation;
pub mod ols;
pub mod special;

pub use agreement::{cohens_kappa, fleiss_kappa};
pub use bootstrap::{bootstrap, bootstrap_multi, derive_seed, percentile, BootstrapSummary};
pub use correlation::pearson;
pub use ols::{ols_fit, DesignMatrix};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("design matrix is rank deficient; dependent columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },
    #[error("{n_obs} observations cannot identify {n_params} parameters")]
    InsufficientObservations { n_obs: usize, n_params: usize },
    #[error("need at least 3 pairs, got {pairs}")]
    TooFewPairs { pairs: usize },
    #[error("a coordinate has zero variance")]
    ZeroVariance,
    #[error("label lists differ in length ({left} vs {right}) or are empty")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 items, got {items}")]
    TooFewItems { items: usize },
    #[error("need at least 2 raters, got {raters}")]
    TooFewRaters { raters: usize },
    #[error("item {item} is missing a rating")]
    MissingCell { item: usize },
    #[error("bootstrap attempt budget exhausted while redrawing failed replicates")]
    BootstrapExhausted,
}

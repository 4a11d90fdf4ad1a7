//! Design assembly, poststratification, error metrics, and the vote-threshold
//! sweep.
//!
//! The overall estimate is the weighted sum of fitted coefficients over the
//! reference population's marginals; conditional estimates pin one dimension
//! to a stratum via an indicator and weight the others by conditionals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{
    DimensionRegistry, FittedModel, ReferenceDistribution, StratumMarginals,
};
use crate::normalize::NormalizedOutcome;
use crate::stats::{bootstrap_multi, ols_fit, BootstrapSummary, DesignMatrix, StatsError};

#[derive(Debug, Error, PartialEq)]
pub enum PoststratError {
    #[error("no polls remain after applying the vote threshold {min_votes}")]
    NoPollsAfterFilter { min_votes: u64 },
    #[error("dimension {0:?} is observed in zero retained polls")]
    AllMissingDimension(String),
    #[error("reference distribution lacks marginal for ({dimension:?}, {stratum:?})")]
    MissingMarginal { dimension: String, stratum: String },
    #[error("reference distribution lacks conditionals for ({dimension:?}, {stratum:?}) over {target:?}")]
    MissingConditional {
        dimension: String,
        stratum: String,
        target: String,
    },
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Bootstrap configuration for estimate reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            seed: 0,
        }
    }
}

/// Overall and per-stratum debiased estimates with bootstrap intervals and
/// error metrics against ground truth where available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub election: crate::core_model::Election,
    pub min_votes: u64,
    pub n_polls_used: usize,
    pub overall: BootstrapSummary,
    /// dimension -> stratum -> conditional estimate.
    pub per_stratum: BTreeMap<String, BTreeMap<String, BootstrapSummary>>,
    /// |y_e - estimate|, present iff the reference carries an overall outcome.
    pub abs_error: Option<f64>,
    pub mean_stratum_abs_error: Option<f64>,
    /// Strata lacking ground truth, excluded from the stratum error mean.
    pub strata_without_truth: usize,
    /// Flags estimates escaping [0, 1]; the linear model is not clamped.
    pub out_of_range: bool,
}

/// Builds the regression design from normalized outcomes and per-poll
/// marginals. Polls below the vote threshold are dropped; dimensions missing
/// for a poll are imputed with the column mean over observed rows.
pub fn assemble_design(
    polls: &[(NormalizedOutcome, StratumMarginals)],
    registry: &DimensionRegistry,
    dimension_set: &[String],
    min_votes: u64,
) -> Result<DesignMatrix, PoststratError> {
    let retained: Vec<&(NormalizedOutcome, StratumMarginals)> = polls
        .iter()
        .filter(|(o, _)| o.effective_votes >= min_votes)
        .collect();
    if retained.is_empty() {
        return Err(PoststratError::NoPollsAfterFilter { min_votes });
    }

    // Column layout: per dimension in dimension_set order, the non-reference
    // strata in registry order.
    let mut keys: Vec<(String, String)> = Vec::new();
    for dim_id in dimension_set {
        let dim = registry
            .dimension(dim_id)
            .ok_or_else(|| PoststratError::UnknownDimension(dim_id.clone()))?;
        for stratum in dim.non_reference_strata() {
            keys.push((dim_id.clone(), stratum.to_string()));
        }
    }

    let rows = retained.len();
    let cols = keys.len() + 1;
    let mut values = vec![f64::NAN; rows * cols];
    for (r, (_, marginals)) in retained.iter().enumerate() {
        values[r * cols] = 1.0;
        for (c, (dim, stratum)) in keys.iter().enumerate() {
            if marginals.is_observed(dim) {
                values[r * cols + c + 1] = marginals.fraction(dim, stratum).unwrap_or(0.0);
            }
        }
    }

    // Column-mean imputation over observed rows.
    let mut imputation_means: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (c, (dim, stratum)) in keys.iter().enumerate() {
        let observed: Vec<f64> = (0..rows)
            .map(|r| values[r * cols + c + 1])
            .filter(|v| !v.is_nan())
            .collect();
        if observed.is_empty() {
            return Err(PoststratError::AllMissingDimension(dim.clone()));
        }
        let mean = observed.iter().sum::<f64>() / observed.len() as f64;
        imputation_means
            .entry(dim.clone())
            .or_default()
            .insert(stratum.clone(), mean);
        for r in 0..rows {
            let v = &mut values[r * cols + c + 1];
            if v.is_nan() {
                *v = mean;
            }
        }
    }

    Ok(DesignMatrix {
        rows,
        cols,
        values,
        column_keys: keys,
        response: retained.iter().map(|(o, _)| o.share_focal).collect(),
        imputation_means,
        min_votes,
        dimension_set: dimension_set.to_vec(),
    })
}

/// Overall poststratified estimate: intercept plus coefficient-weighted
/// population marginals.
pub fn poststratify(
    model: &FittedModel,
    reference: &ReferenceDistribution,
) -> Result<f64, PoststratError> {
    let mut estimate = model.intercept;
    for entry in &model.coefficients {
        let p = reference
            .marginal(&entry.dimension, &entry.stratum)
            .ok_or_else(|| PoststratError::MissingMarginal {
                dimension: entry.dimension.clone(),
                stratum: entry.stratum.clone(),
            })?;
        estimate += entry.coef * p;
    }
    Ok(estimate)
}

/// Estimate conditioned on a stratum: the condition's own dimension uses an
/// indicator, every other dimension uses conditionals given the stratum.
pub fn poststratify_conditional(
    model: &FittedModel,
    reference: &ReferenceDistribution,
    cond_dimension: &str,
    cond_stratum: &str,
) -> Result<f64, PoststratError> {
    let mut estimate = model.intercept;
    for entry in &model.coefficients {
        let weight = if entry.dimension == cond_dimension {
            // Indicator: 1 at the conditioned stratum. A reference-stratum
            // condition contributes nothing since references carry no
            // coefficient.
            if entry.stratum == cond_stratum {
                1.0
            } else {
                0.0
            }
        } else {
            reference
                .conditional(cond_dimension, cond_stratum, &entry.dimension, &entry.stratum)
                .ok_or_else(|| PoststratError::MissingConditional {
                    dimension: cond_dimension.to_string(),
                    stratum: cond_stratum.to_string(),
                    target: entry.dimension.clone(),
                })?
        };
        estimate += entry.coef * weight;
    }
    Ok(estimate)
}

/// Absolute error of the overall estimate and the nested mean (over
/// dimensions, then strata) of per-stratum absolute errors. Strata without
/// ground truth are excluded and counted.
pub fn error_metrics(
    overall_estimate: f64,
    per_stratum_estimates: &BTreeMap<String, BTreeMap<String, f64>>,
    outcomes: &crate::core_model::ReferenceOutcomes,
) -> (Option<f64>, Option<f64>, usize) {
    let abs_error = outcomes.overall.map(|y| (y - overall_estimate).abs());

    let mut dim_means = Vec::new();
    let mut missing = 0;
    for (dim, strata) in per_stratum_estimates {
        let truth = outcomes.per_stratum.get(dim);
        let mut errors = Vec::new();
        for (stratum, est) in strata {
            match truth.and_then(|t| t.get(stratum)) {
                Some(y) => errors.push((y - est).abs()),
                None => missing += 1,
            }
        }
        if !errors.is_empty() {
            dim_means.push(errors.iter().sum::<f64>() / errors.len() as f64);
        }
    }
    let mean_stratum = if dim_means.is_empty() {
        None
    } else {
        Some(dim_means.iter().sum::<f64>() / dim_means.len() as f64)
    };
    (abs_error, mean_stratum, missing)
}

/// Whether the reference carries conditionals for (dimension, stratum) over
/// every other model dimension; strata without them are skipped in reports.
fn has_conditionals(
    reference: &ReferenceDistribution,
    model: &FittedModel,
    dim: &str,
    stratum: &str,
) -> bool {
    model
        .coefficients
        .iter()
        .filter(|c| c.dimension != dim)
        .all(|c| {
            reference
                .conditional(dim, stratum, &c.dimension, &c.stratum)
                .is_some()
        })
}

/// Runs the full estimation for one vote threshold: assemble, fit,
/// poststratify overall and per stratum, and bootstrap over polls.
pub fn estimate(
    polls: &[(NormalizedOutcome, StratumMarginals)],
    registry: &DimensionRegistry,
    dimension_set: &[String],
    min_votes: u64,
    reference: &ReferenceDistribution,
    bootstrap: BootstrapConfig,
) -> Result<EstimateReport, PoststratError> {
    let design = assemble_design(polls, registry, dimension_set, min_votes)?;
    let model = ols_fit(&design)?;

    // Strata reported conditionally: all strata of model dimensions for which
    // the reference provides complete conditionals.
    let mut stratum_keys: Vec<(String, String)> = Vec::new();
    for dim_id in dimension_set {
        let dim = registry
            .dimension(dim_id)
            .ok_or_else(|| PoststratError::UnknownDimension(dim_id.clone()))?;
        for stratum in &dim.strata {
            if has_conditionals(reference, &model, dim_id, stratum) {
                stratum_keys.push((dim_id.clone(), stratum.clone()));
            }
        }
    }

    let retained: Vec<&(NormalizedOutcome, StratumMarginals)> = polls
        .iter()
        .filter(|(o, _)| o.effective_votes >= min_votes)
        .collect();
    let n = retained.len();

    // One replicate statistic: refit on the resampled polls and evaluate all
    // estimates, rejecting rank-deficient resamples.
    let statistic = |indices: &[usize]| -> Option<Vec<f64>> {
        let resampled: Vec<(NormalizedOutcome, StratumMarginals)> = indices
            .iter()
            .map(|&i| retained[i].clone())
            .collect();
        let design = assemble_design(&resampled, registry, dimension_set, 0).ok()?;
        let model = ols_fit(&design).ok()?;
        let mut values = Vec::with_capacity(1 + stratum_keys.len());
        values.push(poststratify(&model, reference).ok()?);
        for (dim, stratum) in &stratum_keys {
            values.push(poststratify_conditional(&model, reference, dim, stratum).ok()?);
        }
        Some(values)
    };
    let summaries = bootstrap_multi(statistic, n, bootstrap.replicates, bootstrap.seed)?;

    let overall = summaries[0].clone();
    let mut per_stratum: BTreeMap<String, BTreeMap<String, BootstrapSummary>> = BTreeMap::new();
    for ((dim, stratum), summary) in stratum_keys.iter().zip(summaries.into_iter().skip(1)) {
        per_stratum
            .entry(dim.clone())
            .or_default()
            .insert(stratum.clone(), summary);
    }

    let point_estimates: BTreeMap<String, BTreeMap<String, f64>> = per_stratum
        .iter()
        .map(|(d, m)| {
            (
                d.clone(),
                m.iter().map(|(g, s)| (g.clone(), s.point)).collect(),
            )
        })
        .collect();
    let (abs_error, mean_stratum_abs_error, strata_without_truth) = match &reference.outcomes {
        Some(outcomes) => error_metrics(overall.point, &point_estimates, outcomes),
        None => (None, None, 0),
    };

    let out_of_range = !(0.0..=1.0).contains(&overall.point)
        || point_estimates
            .values()
            .flat_map(|m| m.values())
            .any(|v| !(0.0..=1.0).contains(v));

    Ok(EstimateReport {
        election: reference.election,
        min_votes,
        n_polls_used: n,
        overall,
        per_stratum,
        abs_error,
        mean_stratum_abs_error,
        strata_without_truth,
        out_of_range,
    })
}

/// One row of the threshold sweep; per-threshold failures are data, not
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub min_votes: u64,
    pub n_polls: usize,
    pub report: Option<EstimateReport>,
    pub error: Option<String>,
}

/// Default threshold grid for the sweep.
pub fn default_threshold_grid() -> Vec<u64> {
    vec![0, 10, 25, 50, 100, 200, 300, 500, 750, 1000]
}

/// Re-runs the full estimation for each vote threshold.
pub fn threshold_sweep(
    polls: &[(NormalizedOutcome, StratumMarginals)],
    registry: &DimensionRegistry,
    dimension_set: &[String],
    thresholds: &[u64],
    reference: &ReferenceDistribution,
    bootstrap: BootstrapConfig,
) -> Vec<SweepRow> {
    thresholds
        .iter()
        .map(|&min_votes| {
            let n_polls = polls
                .iter()
                .filter(|(o, _)| o.effective_votes >= min_votes)
                .count();
            match estimate(polls, registry, dimension_set, min_votes, reference, bootstrap) {
                Ok(report) => SweepRow {
                    min_votes,
                    n_polls,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepRow {
                    min_votes,
                    n_polls,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

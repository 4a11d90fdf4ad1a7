//! Stratum registry and shared domain types.
//!
//! The registry is data, not code: dimension and stratum ids are lowercase
//! snake-case strings loaded from a JSON file, so alternative stratifications
//! can be configured without touching the library.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Election season covered by the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Election {
    #[serde(rename = "2016")]
    Y2016,
    #[serde(rename = "2020")]
    Y2020,
}

impl Election {
    /// Election day (UTC date). Polls timestamped after 23:59:59 UTC of this
    /// date are rejected at ingestion.
    pub fn election_day(self) -> NaiveDate {
        match self {
            Election::Y2016 => NaiveDate::from_ymd_opt(2016, 11, 8).unwrap(),
            Election::Y2020 => NaiveDate::from_ymd_opt(2020, 11, 3).unwrap(),
        }
    }

    /// Last instant at which a poll may have been posted.
    pub fn cutoff(self) -> DateTime<Utc> {
        let day = self.election_day();
        Utc.from_utc_datetime(&day.and_hms_opt(23, 59, 59).unwrap())
    }

    /// Canonical label of the Democratic focal candidate for this season.
    pub fn democrat_label(self) -> &'static str {
        match self {
            Election::Y2016 => "clinton",
            Election::Y2020 => "biden",
        }
    }
}

impl fmt::Display for Election {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Election::Y2016 => write!(f, "2016"),
            Election::Y2020 => write!(f, "2020"),
        }
    }
}

impl std::str::FromStr for Election {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "2016" => Ok(Election::Y2016),
            "2020" => Ok(Election::Y2020),
            other => Err(format!("unknown election season: {other:?}")),
        }
    }
}

/// One attribute dimension with its ordered strata and reference stratum.
///
/// The reference stratum is excluded from regression columns to avoid the
/// collinearity arising from per-dimension probability normalization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub id: String,
    pub strata: Vec<String>,
    pub reference: String,
}

impl Dimension {
    pub fn non_reference_strata(&self) -> impl Iterator<Item = &str> {
        self.strata
            .iter()
            .filter(move |s| **s != self.reference)
            .map(|s| s.as_str())
    }
}

/// Ordered set of dimensions used for regression and poststratification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionRegistry {
    pub dimensions: Vec<Dimension>,
}

/// A single registry violation; violations are data, not exceptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegistryViolation {
    DuplicateDimensionId(String),
    DuplicateStratumId { dimension: String, stratum: String },
    ReferenceNotInDimension { dimension: String, reference: String },
    TooFewStrata { dimension: String, count: usize },
}

impl fmt::Display for RegistryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistryViolation::DuplicateDimensionId(d) => {
                write!(f, "duplicate dimension id {d:?}")
            }
            RegistryViolation::DuplicateStratumId { dimension, stratum } => {
                write!(f, "duplicate stratum id {stratum:?} in dimension {dimension:?}")
            }
            RegistryViolation::ReferenceNotInDimension { dimension, reference } => {
                write!(f, "reference {reference:?} not in dimension {dimension:?}")
            }
            RegistryViolation::TooFewStrata { dimension, count } => {
                write!(f, "dimension {dimension:?} has {count} strata, need at least 2")
            }
        }
    }
}

impl DimensionRegistry {
    /// Default stratification: gender, age, ideology, location, bot and
    /// first-listed-option, with the references used throughout the library.
    pub fn default_registry() -> Self {
        fn dim(id: &str, strata: &[&str], reference: &str) -> Dimension {
            Dimension {
                id: id.to_string(),
                strata: strata.iter().map(|s| s.to_string()).collect(),
                reference: reference.to_string(),
            }
        }
        DimensionRegistry {
            dimensions: vec![
                dim("gender", &["male", "female"], "female"),
                dim("age", &["under30", "30to39", "40plus"], "under30"),
                dim("ideology", &["dem", "moderate", "rep"], "moderate"),
                dim(
                    "location",
                    &["blue_state", "red_state", "swing_state"],
                    "swing_state",
                ),
                dim("bot", &["bot", "not_bot"], "not_bot"),
                dim("first_option", &["trump", "not_trump"], "not_trump"),
            ],
        }
    }

    /// Dimensions used for poststratification by default: only those whose
    /// coefficients are significant in the diagnostic regression.
    pub fn default_poststrat_dimensions() -> Vec<String> {
        ["gender", "age", "ideology", "location"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    pub fn dimension(&self, id: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    pub fn validate(&self) -> Vec<RegistryViolation> {
        let mut violations = Vec::new();
        let mut seen_dims = BTreeSet::new();
        for dim in &self.dimensions {
            if !seen_dims.insert(dim.id.clone()) {
                violations.push(RegistryViolation::DuplicateDimensionId(dim.id.clone()));
            }
            if dim.strata.len() < 2 {
                violations.push(RegistryViolation::TooFewStrata {
                    dimension: dim.id.clone(),
                    count: dim.strata.len(),
                });
            }
            let mut seen_strata = BTreeSet::new();
            for s in &dim.strata {
                if !seen_strata.insert(s.clone()) {
                    violations.push(RegistryViolation::DuplicateStratumId {
                        dimension: dim.id.clone(),
                        stratum: s.clone(),
                    });
                }
            }
            if !dim.strata.contains(&dim.reference) {
                violations.push(RegistryViolation::ReferenceNotInDimension {
                    dimension: dim.id.clone(),
                    reference: dim.reference.clone(),
                });
            }
        }
        violations
    }
}

/// Returns `Ok(())` or the list of violations found.
pub fn validate_registry(registry: &DimensionRegistry) -> Result<(), Vec<RegistryViolation>> {
    let violations = registry.validate();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// One option of a poll in on-screen display order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollOption {
    pub label: String,
    pub votes: u64,
}

/// One social poll. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollRecord {
    pub poll_id: String,
    pub author_id: String,
    pub created_at: DateTime<Utc>,
    pub election: Election,
    /// 2 to 4 options; position 1 is the topmost on screen.
    pub options: Vec<PollOption>,
    pub retweets: u64,
    pub favorites: u64,
}

impl PollRecord {
    pub fn total_votes(&self) -> u64 {
        self.options.iter().map(|o| o.votes).sum()
    }
}

/// Whether a dimension was observed for a poll's proxy voters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    Observed,
    Missing,
}

/// Per-poll distribution of potential voters over the strata of each
/// attribute dimension. Observed dimensions sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumMarginals {
    pub poll_id: String,
    /// dimension id -> stratum id -> fraction in [0, 1].
    pub entries: BTreeMap<String, BTreeMap<String, f64>>,
    pub coverage: BTreeMap<String, Coverage>,
}

impl StratumMarginals {
    pub fn is_observed(&self, dimension: &str) -> bool {
        matches!(self.coverage.get(dimension), Some(Coverage::Observed))
    }

    pub fn fraction(&self, dimension: &str, stratum: &str) -> Option<f64> {
        self.entries.get(dimension)?.get(stratum).copied()
    }

    /// Checks the sum-to-one invariant on every observed dimension.
    pub fn check_sums(&self) -> Result<(), String> {
        for (dim, cov) in &self.coverage {
            if *cov == Coverage::Missing {
                continue;
            }
            let sum: f64 = self
                .entries
                .get(dim)
                .map(|m| m.values().sum())
                .unwrap_or(0.0);
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("dimension {dim:?} marginals sum to {sum}, expected 1"));
            }
        }
        Ok(())
    }
}

/// One fitted regression coefficient with its inference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefEntry {
    pub dimension: String,
    pub stratum: String,
    pub coef: f64,
    pub std_err: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

/// OLS fit of normalized poll outcomes on stratum marginals, with the
/// metadata needed to reuse the fit for poststratification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub intercept: f64,
    pub intercept_std_err: f64,
    pub intercept_t_stat: f64,
    pub intercept_p_value: f64,
    /// Non-reference strata only, in design-column order.
    pub coefficients: Vec<CoefEntry>,
    pub adj_r2: f64,
    pub n_obs: usize,
    /// Column means used to impute missing dimensions, keyed like coefficients.
    pub imputation_means: BTreeMap<String, BTreeMap<String, f64>>,
    /// Minimum effective votes required for a poll to enter the fit.
    pub min_votes: u64,
    /// Subset of registry dimensions used as predictors.
    pub dimension_set: Vec<String>,
}

impl FittedModel {
    pub fn coefficient(&self, dimension: &str, stratum: &str) -> Option<&CoefEntry> {
        self.coefficients
            .iter()
            .find(|c| c.dimension == dimension && c.stratum == stratum)
    }

    /// Checks the structural invariants against a registry: every coefficient
    /// key resolves, none is a reference stratum, and n_obs is large enough.
    pub fn check_against(&self, registry: &DimensionRegistry) -> Result<(), String> {
        for entry in &self.coefficients {
            let dim = registry
                .dimension(&entry.dimension)
                .ok_or_else(|| format!("unknown dimension {:?}", entry.dimension))?;
            if !dim.strata.contains(&entry.stratum) {
                return Err(format!(
                    "unknown stratum {:?} in dimension {:?}",
                    entry.stratum, entry.dimension
                ));
            }
            if entry.stratum == dim.reference {
                return Err(format!(
                    "coefficient keyed by reference stratum {:?} of dimension {:?}",
                    entry.stratum, entry.dimension
                ));
            }
        }
        if self.n_obs < self.coefficients.len() + 1 {
            return Err(format!(
                "n_obs = {} is below the {} parameters of the model",
                self.n_obs,
                self.coefficients.len() + 1
            ));
        }
        Ok(())
    }
}

/// Significance stars at the conventional levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Ground-truth outcomes attached to a reference distribution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceOutcomes {
    /// Observed overall fraction for the focal candidate.
    pub overall: Option<f64>,
    /// dimension -> stratum -> observed fraction for the focal candidate.
    #[serde(default)]
    pub per_stratum: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Representative population distribution: per-dimension marginals plus
/// cross-dimension conditional tables, with optional observed outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDistribution {
    pub election: Election,
    /// dimension -> stratum -> population fraction.
    pub marginals: BTreeMap<String, BTreeMap<String, f64>>,
    /// condition dimension -> condition stratum -> target dimension
    /// -> target stratum -> conditional fraction.
    #[serde(default)]
    pub conditionals: BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<ReferenceOutcomes>,
}

impl ReferenceDistribution {
    pub fn marginal(&self, dimension: &str, stratum: &str) -> Option<f64> {
        self.marginals.get(dimension)?.get(stratum).copied()
    }

    pub fn conditional(
        &self,
        cond_dimension: &str,
        cond_stratum: &str,
        dimension: &str,
        stratum: &str,
    ) -> Option<f64> {
        self.conditionals
            .get(cond_dimension)?
            .get(cond_stratum)?
            .get(dimension)?
            .get(stratum)
            .copied()
    }

    /// Validates sum-to-one on marginals and conditionals, and marginal
    /// consistency of conditionals where both are given.
    pub fn check(&self) -> Result<(), String> {
        for (dim, m) in &self.marginals {
            let sum: f64 = m.values().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(format!("marginals of {dim:?} sum to {sum}, expected 1"));
            }
        }
        for (cond_dim, by_stratum) in &self.conditionals {
            for (cond_stratum, targets) in by_stratum {
                for (target_dim, dist) in targets {
                    let sum: f64 = dist.values().sum();
                    if (sum - 1.0).abs() > 1e-9 {
                        return Err(format!(
                            "conditionals of {target_dim:?} given ({cond_dim:?}, {cond_stratum:?}) sum to {sum}, expected 1"
                        ));
                    }
                }
            }
        }
        // Sum over condition strata must reproduce the target marginal.
        for (cond_dim, by_stratum) in &self.conditionals {
            let Some(cond_marginal) = self.marginals.get(cond_dim) else {
                continue;
            };
            let mut reconstructed: BTreeMap<(&str, &str), f64> = BTreeMap::new();
            for (cond_stratum, targets) in by_stratum {
                let w = cond_marginal.get(cond_stratum).copied().unwrap_or(0.0);
                for (target_dim, dist) in targets {
                    for (g, p) in dist {
                        *reconstructed
                            .entry((target_dim.as_str(), g.as_str()))
                            .or_insert(0.0) += w * p;
                    }
                }
            }
            for ((target_dim, g), p) in reconstructed {
                if let Some(expected) = self.marginal(target_dim, g) {
                    if (p - expected).abs() > 1e-6 {
                        return Err(format!(
                            "conditionals of {target_dim:?} given {cond_dim:?} are inconsistent with the {target_dim:?} marginal at stratum {g:?} ({p} vs {expected})"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

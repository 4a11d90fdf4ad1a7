//! Conversion of inferred user-attribute scores into registry strata.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::{Coverage, DimensionRegistry, StratumMarginals};
use crate::normalize::NormalizedOutcome;

/// The 2016/2020 swing states, by USPS code.
pub const SWING_STATES: [&str; 13] = [
    "WI", "PA", "NH", "MN", "AZ", "GA", "VA", "FL", "MI", "NV", "CO", "NC", "ME",
];

/// Accounts more organization-like than this are dropped entirely.
pub const DEFAULT_ORG_CUTOFF: f64 = 0.90;

#[derive(Debug, Error, PartialEq)]
pub enum AttrsError {
    #[error("ideology score {0} outside [-3, 3]")]
    OutOfRange(f64),
    #[error("state {0:?} not present in the color map")]
    UnknownState(String),
}

/// How a user relates to a poll.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserRole {
    Author,
    Retweeter,
    Favoriter,
    Follower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

/// Precomputed attribute scores for one user in the context of one poll.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAttributeRecord {
    pub user_id: String,
    pub role: UserRole,
    pub ideology_score: Option<f64>,
    pub bot_score: Option<f64>,
    pub org_score: Option<f64>,
    pub age_years: Option<u32>,
    pub gender: Option<Gender>,
    /// Two-letter US state code, or a non-US country code.
    pub state: Option<String>,
}

/// Red/blue/swing classification of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateColor {
    Red,
    Blue,
    Swing,
}

impl StateColor {
    pub fn stratum(self) -> &'static str {
        match self {
            StateColor::Red => "red_state",
            StateColor::Blue => "blue_state",
            StateColor::Swing => "swing_state",
        }
    }
}

/// state code -> color; ships with the swing list pre-filled, red/blue
/// assignments come from an election-results input.
pub type StateColorMap = BTreeMap<String, StateColor>;

/// Color map containing only the swing states.
pub fn swing_only_color_map() -> StateColorMap {
    SWING_STATES
        .iter()
        .map(|s| (s.to_string(), StateColor::Swing))
        .collect()
}

/// Three even bins over [-3, 3]; the moderate bin is closed on both ends.
pub fn bin_ideology(score: f64) -> Result<&'static str, AttrsError> {
    if !(-3.0..=3.0).contains(&score) {
        return Err(AttrsError::OutOfRange(score));
    }
    Ok(if score < -1.0 {
        "dem"
    } else if score <= 1.0 {
        "moderate"
    } else {
        "rep"
    })
}

pub fn bin_age(age_years: u32) -> &'static str {
    if age_years < 30 {
        "under30"
    } else if age_years < 40 {
        "30to39"
    } else {
        "40plus"
    }
}

/// Smallest threshold t in {scores} ∪ {1.0} such that the fraction of scores
/// at or above t does not exceed `annotated_bot_fraction`. Downstream
/// classification is bot ⇔ score ≥ threshold.
pub fn calibrate_bot_threshold(scores: &[f64], annotated_bot_fraction: f64) -> f64 {
    assert!(!scores.is_empty(), "calibration needs at least one score");
    assert!((0.0..=1.0).contains(&annotated_bot_fraction));
    let n = scores.len() as f64;
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.push(1.0);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();
    for &t in &candidates {
        let flagged = scores.iter().filter(|&&s| s >= t).count() as f64 / n;
        if flagged <= annotated_bot_fraction {
            return t;
        }
    }
    1.0
}

/// Splits records into (kept, dropped) by the organization-score cutoff;
/// a score strictly above the cutoff drops the record.
pub fn filter_organizations(
    records: Vec<UserAttributeRecord>,
    org_cutoff: f64,
) -> (Vec<UserAttributeRecord>, Vec<UserAttributeRecord>) {
    records
        .into_iter()
        .partition(|r| !matches!(r.org_score, Some(s) if s > org_cutoff))
}

pub fn map_state_color(state: &str, color_map: &StateColorMap) -> Result<&'static str, AttrsError> {
    color_map
        .get(state)
        .map(|c| c.stratum())
        .ok_or_else(|| AttrsError::UnknownState(state.to_string()))
}

/// Configuration for per-poll marginal aggregation.
#[derive(Debug, Clone)]
pub struct MarginalConfig {
    pub bot_threshold: f64,
    pub org_cutoff: f64,
    pub color_map: StateColorMap,
    /// Poll authors are analyzed separately; set true to count them as proxies.
    pub include_authors: bool,
}

impl MarginalConfig {
    pub fn new(color_map: StateColorMap) -> Self {
        MarginalConfig {
            bot_threshold: 0.83,
            org_cutoff: DEFAULT_ORG_CUTOFF,
            color_map,
            include_authors: false,
        }
    }
}

fn is_us_state(code: &str) -> bool {
    code.len() == 2 && code.chars().all(|c| c.is_ascii_uppercase())
}

/// Aggregates one poll's proxy-user records into per-dimension stratum
/// fractions. Proxies are retweeters and favoriters, deduplicated by user id
/// and filtered by organization score. Users missing an attribute are
/// excluded from that dimension's denominator only; dimensions with no
/// observed user are flagged missing. The first-option dimension comes from
/// the poll's normalized outcome, not from users.
pub fn aggregate_marginals(
    records: &[UserAttributeRecord],
    outcome: &NormalizedOutcome,
    registry: &DimensionRegistry,
    config: &MarginalConfig,
) -> StratumMarginals {
    let mut seen = BTreeSet::new();
    let proxies: Vec<&UserAttributeRecord> = records
        .iter()
        .filter(|r| {
            matches!(r.role, UserRole::Retweeter | UserRole::Favoriter)
                || (config.include_authors && r.role == UserRole::Author)
        })
        .filter(|r| !matches!(r.org_score, Some(s) if s > config.org_cutoff))
        .filter(|r| seen.insert(r.user_id.clone()))
        .collect();

    let mut entries: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut coverage: BTreeMap<String, Coverage> = BTreeMap::new();

    for dim in &registry.dimensions {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        match dim.id.as_str() {
            "first_option" => {
                let stratum = if outcome.trump_listed_first_among_focal {
                    "trump"
                } else {
                    "not_trump"
                };
                entries.insert(
                    dim.id.clone(),
                    dim.strata
                        .iter()
                        .map(|s| (s.clone(), if s == stratum { 1.0 } else { 0.0 }))
                        .collect(),
                );
                coverage.insert(dim.id.clone(), Coverage::Observed);
                continue;
            }
            "gender" => {
                for r in &proxies {
                    if let Some(g) = r.gender {
                        let s = match g {
                            Gender::Male => "male",
                            Gender::Female => "female",
                        };
                        *counts.entry(s.to_string()).or_insert(0) += 1;
                    }
                }
            }
            "age" => {
                for r in &proxies {
                    if let Some(a) = r.age_years {
                        *counts.entry(bin_age(a).to_string()).or_insert(0) += 1;
                    }
                }
            }
            "ideology" => {
                for r in &proxies {
                    if let Some(s) = r.ideology_score {
                        if let Ok(bin) = bin_ideology(s) {
                            *counts.entry(bin.to_string()).or_insert(0) += 1;
                        }
                    }
                }
            }
            "location" => {
                // Non-US users are excluded from this dimension only.
                for r in &proxies {
                    if let Some(state) = &r.state {
                        if is_us_state(state) {
                            if let Ok(s) = map_state_color(state, &config.color_map) {
                                *counts.entry(s.to_string()).or_insert(0) += 1;
                            }
                        }
                    }
                }
            }
            "bot" => {
                for r in &proxies {
                    if let Some(score) = r.bot_score {
                        let s = if score >= config.bot_threshold {
                            "bot"
                        } else {
                            "not_bot"
                        };
                        *counts.entry(s.to_string()).or_insert(0) += 1;
                    }
                }
            }
            _ => {}
        }
        let total: u64 = counts.values().sum();
        if total == 0 {
            coverage.insert(dim.id.clone(), Coverage::Missing);
            continue;
        }
        let fractions: BTreeMap<String, f64> = dim
            .strata
            .iter()
            .map(|s| {
                (
                    s.clone(),
                    counts.get(s).copied().unwrap_or(0) as f64 / total as f64,
                )
            })
            .collect();
        entries.insert(dim.id.clone(), fractions);
        coverage.insert(dim.id.clone(), Coverage::Observed);
    }

    StratumMarginals {
        poll_id: outcome.poll_id.clone(),
        entries,
        coverage,
    }
}

//! Synthetic poll corpora with known ground truth, used to verify the whole
//! pipeline end to end.
//!
//! The generator draws proxy users from a configured population, computes each
//! poll's expected outcome from the true coefficients applied to the poll's
//! empirical marginals, and emits files in the exact ingestion schemas, so the
//! unmodified pipeline runs on synthetic data.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{Gender, StateColor, StateColorMap, UserAttributeRecord, UserRole};
use crate::core_model::{
    DimensionRegistry, Election, PollOption, PollRecord, ReferenceDistribution, ReferenceOutcomes,
};
use crate::ingest::LinkedAttributeRecord;
use crate::stats::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("poll {poll}: expected outcome stayed outside [0, 1] after {attempts} redraws")]
    OutcomeOutOfRange { poll: usize, attempts: usize },
    #[error("dimension {0:?} in true_coefficients is missing from the population marginals")]
    UnknownDimension(String),
    #[error("invalid population distribution: {0}")]
    InvalidPopulation(String),
}

/// Full configuration of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_polls: usize,
    /// Total poll votes are drawn log-uniformly within these bounds.
    pub votes_min: u64,
    pub votes_max: u64,
    pub true_intercept: f64,
    /// dimension -> non-reference stratum -> true coefficient.
    pub true_coefficients: BTreeMap<String, BTreeMap<String, f64>>,
    /// Population marginals and consistent conditionals; ground truth is
    /// evaluated against these.
    pub population: ReferenceDistribution,
    /// Per-dimension probability that a poll's users lack the attribute.
    #[serde(default)]
    pub missingness: BTreeMap<String, f64>,
    pub noise_sd: f64,
    /// Mean proxy users per poll (Poisson).
    #[serde(default = "default_proxies_mean")]
    pub proxies_mean: f64,
}

fn default_proxies_mean() -> f64 {
    30.0
}

/// Ground-truth outcomes evaluated directly from the spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub overall: f64,
    /// dimension -> stratum -> conditional outcome.
    pub per_stratum: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Everything the generator produces, in in-memory form.
#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub polls: Vec<PollRecord>,
    pub attributes: Vec<LinkedAttributeRecord>,
    /// Population distribution with ground-truth outcomes attached.
    pub reference: ReferenceDistribution,
    pub ground_truth: GroundTruth,
}

/// State color map used for generated location attributes.
pub fn synthetic_color_map() -> StateColorMap {
    let mut map = crate::attrs::swing_only_color_map();
    for s in ["CA", "NY", "IL", "WA"] {
        map.insert(s.to_string(), StateColor::Blue);
    }
    for s in ["AL", "WY", "TN", "KY"] {
        map.insert(s.to_string(), StateColor::Red);
    }
    map
}

fn state_for(stratum: &str, rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match stratum {
        "blue_state" => &["CA", "NY", "IL", "WA"],
        "red_state" => &["AL", "WY", "TN", "KY"],
        _ => &["WI", "GA", "PA", "AZ"],
    };
    pool[rng.gen_range(0..pool.len())].to_string()
}

fn draw_stratum<'a>(dist: &'a BTreeMap<String, f64>, rng: &mut ChaCha8Rng) -> &'a str {
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    let mut last = "";
    for (stratum, p) in dist {
        acc += p;
        last = stratum;
        if u < acc {
            return stratum;
        }
    }
    last
}

fn poisson(mean: f64, rng: &mut ChaCha8Rng) -> usize {
    // Knuth's method; fine for small means.
    let l = (-mean).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen_range(0.0..1.0f64);
        if p <= l {
            return k;
        }
        k += 1;
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn log_uniform(lo: u64, hi: u64, rng: &mut ChaCha8Rng) -> u64 {
    if lo >= hi {
        return lo;
    }
    let x = rng.gen_range((lo as f64).ln()..(hi as f64).ln());
    (x.exp().round() as u64).clamp(lo, hi)
}

/// Fills one user's attribute fields so the attrs module bins the user into
/// the drawn strata. Values are kept away from bin boundaries.
fn attribute_for(
    dimension: &str,
    stratum: &str,
    user: &mut UserAttributeRecord,
    rng: &mut ChaCha8Rng,
) {
    match dimension {
        "gender" => {
            user.gender = Some(if stratum == "male" {
                Gender::Male
            } else {
                Gender::Female
            });
        }
        "age" => {
            user.age_years = Some(match stratum {
                "under30" => rng.gen_range(18..30),
                "30to39" => rng.gen_range(30..40),
                _ => rng.gen_range(40..80),
            });
        }
        "ideology" => {
            user.ideology_score = Some(match stratum {
                "dem" => rng.gen_range(-2.9..-1.1),
                "rep" => rng.gen_range(1.1..2.9),
                _ => rng.gen_range(-0.9..0.9),
            });
        }
        "location" => {
            user.state = Some(state_for(stratum, rng));
        }
        "bot" => {
            user.bot_score = Some(if stratum == "bot" {
                rng.gen_range(0.85..1.0)
            } else {
                rng.gen_range(0.0..0.8)
            });
        }
        _ => {}
    }
}

const MAX_POLL_REDRAWS: usize = 100;

/// Generates a corpus and its ground truth from a spec.
pub fn generate(
    spec: &SyntheticSpec,
    registry: &DimensionRegistry,
) -> Result<GeneratedCorpus, SynthError> {
    spec.population
        .check()
        .map_err(SynthError::InvalidPopulation)?;
    for dim in spec.true_coefficients.keys() {
        if dim != "first_option" && !spec.population.marginals.contains_key(dim) {
            return Err(SynthError::UnknownDimension(dim.clone()));
        }
    }

    let mut polls = Vec::with_capacity(spec.n_polls);
    let mut attributes = Vec::new();

    for poll_index in 0..spec.n_polls {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, poll_index as u64));
        let poll_id = format!("synth-{poll_index:05}");

        let mut result = None;
        for _ in 0..MAX_POLL_REDRAWS {
            let (users, share, trump_first) = draw_poll(spec, registry, &poll_id, &mut rng);
            if (0.0..=1.0).contains(&share) {
                result = Some((users, share, trump_first));
                break;
            }
        }
        let (mut users, share, trump_first) = result.ok_or(SynthError::OutcomeOutOfRange {
            poll: poll_index,
            attempts: MAX_POLL_REDRAWS,
        })?;

        // Hide whole dimensions per the missingness rates.
        for (dim, rate) in &spec.missingness {
            if rng.gen_range(0.0..1.0f64) < *rate {
                for linked in &mut users {
                    match dim.as_str() {
                        "gender" => linked.record.gender = None,
                        "age" => linked.record.age_years = None,
                        "ideology" => linked.record.ideology_score = None,
                        "location" => linked.record.state = None,
                        "bot" => linked.record.bot_score = None,
                        _ => {}
                    }
                }
            }
        }

        let total = log_uniform(spec.votes_min, spec.votes_max, &mut rng).max(1);
        let trump_votes = (share * total as f64).round() as u64;
        let dem_votes = total - trump_votes;
        let (first, second) = if trump_first {
            (("Trump", trump_votes), ("Biden", dem_votes))
        } else {
            (("Biden", dem_votes), ("Trump", trump_votes))
        };

        polls.push(PollRecord {
            poll_id: poll_id.clone(),
            author_id: format!("author-{poll_index:05}"),
            created_at: Utc.with_ymd_and_hms(2020, 10, 1, 0, 0, 0).unwrap()
                + chrono::Duration::seconds(poll_index as i64),
            election: Election::Y2020,
            options: vec![
                PollOption {
                    label: first.0.to_string(),
                    votes: first.1,
                },
                PollOption {
                    label: second.0.to_string(),
                    votes: second.1,
                },
            ],
            retweets: users.len() as u64,
            favorites: 0,
        });
        attributes.extend(users);
    }

    let ground_truth = evaluate_ground_truth(spec, registry);
    let mut reference = spec.population.clone();
    reference.outcomes = Some(ReferenceOutcomes {
        overall: Some(ground_truth.overall),
        per_stratum: ground_truth.per_stratum.clone(),
    });

    Ok(GeneratedCorpus {
        polls,
        attributes,
        reference,
        ground_truth,
    })
}

/// Draws one poll's users and expected outcome. The outcome is the true
/// linear model applied to the users' empirical stratum fractions, so the
/// regression can recover the coefficients exactly at zero noise.
fn draw_poll(
    spec: &SyntheticSpec,
    registry: &DimensionRegistry,
    poll_id: &str,
    rng: &mut ChaCha8Rng,
) -> (Vec<LinkedAttributeRecord>, f64, bool) {
    let n_users = poisson(spec.proxies_mean, rng).max(1);

    // Draw each user's stratum per dimension, independently by marginals.
    let mut strata_per_dim: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (dim, dist) in &spec.population.marginals {
        if dim == "first_option" {
            continue;
        }
        let draws: Vec<&str> = (0..n_users).map(|_| draw_stratum(dist, rng)).collect();
        strata_per_dim.insert(dim.as_str(), draws);
    }

    let trump_first = match spec.population.marginals.get("first_option") {
        Some(dist) => {
            let p = dist.get("trump").copied().unwrap_or(0.0);
            rng.gen_range(0.0..1.0f64) < p
        }
        None => false,
    };

    // Expected outcome from empirical fractions.
    let mut share = spec.true_intercept;
    for (dim, coefs) in &spec.true_coefficients {
        if dim == "first_option" {
            if trump_first {
                share += coefs.get("trump").copied().unwrap_or(0.0);
            }
            continue;
        }
        let draws = &strata_per_dim[dim.as_str()];
        for (stratum, beta) in coefs {
            let fraction = draws.iter().filter(|s| **s == stratum).count() as f64
                / draws.len() as f64;
            share += beta * fraction;
        }
    }
    if spec.noise_sd > 0.0 {
        share += spec.noise_sd * gaussian(rng);
    }

    let mut users = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let mut record = UserAttributeRecord {
            user_id: format!("{poll_id}-u{u:04}"),
            role: if u % 2 == 0 {
                UserRole::Retweeter
            } else {
                UserRole::Favoriter
            },
            ideology_score: None,
            bot_score: None,
            org_score: None,
            age_years: None,
            gender: None,
            state: None,
        };
        for (dim, draws) in &strata_per_dim {
            attribute_for(dim, draws[u], &mut record, rng);
        }
        users.push(LinkedAttributeRecord {
            poll_id: poll_id.to_string(),
            record,
        });
    }
    let _ = registry;
    (users, share, trump_first)
}

/// Direct evaluation of the true model against the population distribution.
fn evaluate_ground_truth(spec: &SyntheticSpec, registry: &DimensionRegistry) -> GroundTruth {
    let mut overall = spec.true_intercept;
    for (dim, coefs) in &spec.true_coefficients {
        for (stratum, beta) in coefs {
            let p = spec
                .population
                .marginal(dim, stratum)
                .unwrap_or(0.0);
            overall += beta * p;
        }
    }

    let mut per_stratum: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for cond_dim in spec.true_coefficients.keys() {
        let Some(dim) = registry.dimension(cond_dim) else {
            continue;
        };
        for cond_stratum in &dim.strata {
            // Conditional estimates need conditionals for every other
            // dimension; skip strata the population does not describe.
            let complete = spec
                .true_coefficients
                .iter()
                .filter(|(d, _)| *d != cond_dim)
                .all(|(d, coefs)| {
                    coefs.keys().all(|g| {
                        spec.population
                            .conditional(cond_dim, cond_stratum, d, g)
                            .is_some()
                    })
                });
            if !complete {
                continue;
            }
            let mut est = spec.true_intercept;
            for (d, coefs) in &spec.true_coefficients {
                for (g, beta) in coefs {
                    let weight = if d == cond_dim {
                        if g == cond_stratum {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        spec.population
                            .conditional(cond_dim, cond_stratum, d, g)
                            .unwrap()
                    };
                    est += beta * weight;
                }
            }
            per_stratum
                .entry(cond_dim.clone())
                .or_default()
                .insert(cond_stratum.clone(), est);
        }
    }

    GroundTruth {
        overall,
        per_stratum,
    }
}

/// Builds a random reference distribution whose conditionals are derived from
/// a single random joint distribution, so marginals and conditionals are
/// consistent by construction.
pub fn random_consistent_reference(
    registry: &DimensionRegistry,
    dimension_set: &[String],
    seed: u64,
) -> ReferenceDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<&crate::core_model::Dimension> = dimension_set
        .iter()
        .map(|d| registry.dimension(d).expect("dimension in registry"))
        .collect();

    // Random joint over the product grid of strata.
    let sizes: Vec<usize> = dims.iter().map(|d| d.strata.len()).collect();
    let total_cells: usize = sizes.iter().product();
    let mut joint: Vec<f64> = (0..total_cells)
        .map(|_| rng.gen_range(0.05..1.0f64))
        .collect();
    let sum: f64 = joint.iter().sum();
    for p in &mut joint {
        *p /= sum;
    }

    let cell_index = |cell: usize, dim_idx: usize| -> usize {
        let mut rest = cell;
        for (i, &size) in sizes.iter().enumerate().rev() {
            let coord = rest % size;
            rest /= size;
            if i == dim_idx {
                return coord;
            }
        }
        unreachable!()
    };

    let mut marginals: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, dim) in dims.iter().enumerate() {
        let mut m: BTreeMap<String, f64> = dim.strata.iter().map(|s| (s.clone(), 0.0)).collect();
        for (cell, p) in joint.iter().enumerate() {
            *m.get_mut(&dim.strata[cell_index(cell, i)]).unwrap() += p;
        }
        marginals.insert(dim.id.clone(), m);
    }

    let mut conditionals: BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>> =
        BTreeMap::new();
    for (i, cond_dim) in dims.iter().enumerate() {
        let mut by_stratum = BTreeMap::new();
        for (gi, g) in cond_dim.strata.iter().enumerate() {
            let mass: f64 = joint
                .iter()
                .enumerate()
                .filter(|(cell, _)| cell_index(*cell, i) == gi)
                .map(|(_, p)| p)
                .sum();
            let mut targets = BTreeMap::new();
            for (j, target_dim) in dims.iter().enumerate() {
                if j == i {
                    continue;
                }
                let mut dist: BTreeMap<String, f64> = target_dim
                    .strata
                    .iter()
                    .map(|s| (s.clone(), 0.0))
                    .collect();
                for (cell, p) in joint.iter().enumerate() {
                    if cell_index(cell, i) == gi {
                        *dist
                            .get_mut(&target_dim.strata[cell_index(cell, j)])
                            .unwrap() += p / mass;
                    }
                }
                targets.insert(target_dim.id.clone(), dist);
            }
            by_stratum.insert(g.clone(), targets);
        }
        conditionals.insert(cond_dim.id.clone(), by_stratum);
    }

    ReferenceDistribution {
        election: Election::Y2020,
        marginals,
        conditionals,
        outcomes: None,
    }
}

/// Random non-reference coefficients in [-0.3, 0.3] for the given dimensions.
pub fn random_coefficients(
    registry: &DimensionRegistry,
    dimension_set: &[String],
    seed: u64,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dimension_set
        .iter()
        .map(|d| {
            let dim = registry.dimension(d).expect("dimension in registry");
            (
                d.clone(),
                dim.non_reference_strata()
                    .map(|g| (g.to_string(), rng.gen_range(-0.3..0.3)))
                    .collect(),
            )
        })
        .collect()
}

/// Writes the corpus in the exact ingestion file formats plus the spec and
/// ground truth as JSON.
pub fn write_corpus(
    dir: &Path,
    spec: &SyntheticSpec,
    corpus: &GeneratedCorpus,
) -> Result<(), crate::ingest::IngestError> {
    crate::ingest::write_polls(&dir.join("polls.csv"), &corpus.polls)?;
    crate::ingest::write_attributes(&dir.join("attributes.csv"), &corpus.attributes)?;
    crate::ingest::write_reference(&dir.join("reference.json"), &corpus.reference)?;
    let io_err = |e: std::io::Error, name: &str| crate::ingest::IngestError::Unreadable {
        path: dir.join(name).display().to_string(),
        source: e,
    };
    std::fs::write(
        dir.join("spec.json"),
        serde_json::to_string_pretty(spec).expect("spec serializes"),
    )
    .map_err(|e| io_err(e, "spec.json"))?;
    std::fs::write(
        dir.join("ground_truth.json"),
        serde_json::to_string_pretty(&corpus.ground_truth).expect("truth serializes"),
    )
    .map_err(|e| io_err(e, "ground_truth.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_spec(noise_sd: f64) -> SyntheticSpec {
        let registry = DimensionRegistry::default_registry();
        let dims = vec!["gender".to_string(), "ideology".to_string()];
        let population = random_consistent_reference(&registry, &dims, 11);
        SyntheticSpec {
            seed: 1,
            n_polls: 50,
            votes_min: 100,
            votes_max: 5000,
            true_intercept: 0.5,
            true_coefficients: BTreeMap::new(),
            population,
            missingness: BTreeMap::new(),
            noise_sd,
            proxies_mean: 20.0,
        }
    }

    #[test]
    fn constant_model_yields_constant_shares() {
        let registry = DimensionRegistry::default_registry();
        let spec = simple_spec(0.0);
        let corpus = generate(&spec, &registry).unwrap();
        assert_eq!(corpus.polls.len(), 50);
        for poll in &corpus.polls {
            let outcome = crate::normalize::normalize_poll(poll).unwrap();
            let tolerance = 1.0 / (2.0 * outcome.effective_votes as f64) + 1e-12;
            assert!(
                (outcome.share_focal - 0.5).abs() <= tolerance,
                "share {} with {} votes",
                outcome.share_focal,
                outcome.effective_votes
            );
        }
    }

    #[test]
    fn same_seed_is_deterministic() {
        let registry = DimensionRegistry::default_registry();
        let spec = simple_spec(0.1);
        let a = generate(&spec, &registry).unwrap();
        let b = generate(&spec, &registry).unwrap();
        assert_eq!(a.polls, b.polls);
        assert_eq!(a.attributes, b.attributes);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn ground_truth_matches_one_pass_oracle() {
        let registry = DimensionRegistry::default_registry();
        let mut spec = simple_spec(0.0);
        spec.true_coefficients = random_coefficients(
            &registry,
            &["gender".to_string(), "ideology".to_string()],
            3,
        );
        let corpus = generate(&spec, &registry).unwrap();
        // Independent one-pass recomputation.
        let mut expected = spec.true_intercept;
        for (dim, coefs) in &spec.true_coefficients {
            for (g, beta) in coefs {
                expected += beta * spec.population.marginals[dim][g];
            }
        }
        assert!((corpus.ground_truth.overall - expected).abs() < 1e-14);
    }

    #[test]
    fn random_reference_is_consistent() {
        let registry = DimensionRegistry::default_registry();
        for seed in 0..20 {
            let reference = random_consistent_reference(
                &registry,
                &DimensionRegistry::default_poststrat_dimensions(),
                seed,
            );
            reference.check().unwrap();
        }
    }

    #[test]
    fn generated_marginals_match_direct_tabulation() {
        let registry = DimensionRegistry::default_registry();
        let spec = simple_spec(0.0);
        let corpus = generate(&spec, &registry).unwrap();
        let poll = &corpus.polls[0];
        let users: Vec<UserAttributeRecord> = corpus
            .attributes
            .iter()
            .filter(|l| l.poll_id == poll.poll_id)
            .map(|l| l.record.clone())
            .collect();
        let outcome = crate::normalize::normalize_poll(poll).unwrap();
        let config = crate::attrs::MarginalConfig::new(synthetic_color_map());
        let marginals =
            crate::attrs::aggregate_marginals(&users, &outcome, &registry, &config);
        // Direct count of male users.
        let males = users
            .iter()
            .filter(|u| u.gender == Some(Gender::Male))
            .count() as f64;
        let observed = users.iter().filter(|u| u.gender.is_some()).count() as f64;
        assert_eq!(
            marginals.fraction("gender", "male").unwrap(),
            males / observed
        );
    }
}

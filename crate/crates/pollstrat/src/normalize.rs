//! Head-to-head normalization of poll outcomes.
//!
//! Multi-option polls are reduced to the two focal candidates by dropping the
//! remaining options and renormalizing, so that outcomes are comparable across
//! polls, mainstream surveys, and election results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core_model::PollRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("poll {poll_id}: focal option {label:?} is absent or matched more than once")]
    MissingFocalOption { poll_id: String, label: String },
    #[error("poll {poll_id}: both focal candidates received zero votes")]
    ZeroFocalVotes { poll_id: String },
}

/// Normalized head-to-head outcome of a single poll.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedOutcome {
    pub poll_id: String,
    /// Fraction for Trump after dropping non-focal options.
    pub share_focal: f64,
    /// Votes for the two focal candidates only.
    pub effective_votes: u64,
    pub trump_listed_first_among_focal: bool,
    pub option_count: usize,
}

/// Canonicalizes a free-text option label: trim, lowercase, strip leading '@'.
fn canonicalize(label: &str) -> String {
    let trimmed = label.trim().to_lowercase();
    trimmed.strip_prefix('@').unwrap_or(&trimmed).to_string()
}

fn matches_focal(canonical: &str, needle: &str) -> bool {
    canonical.contains(needle)
}

/// Finds the unique option matching `needle`; `None` on absence, `Err` on
/// ambiguity is folded into `None` by returning the count.
fn find_unique(poll: &PollRecord, needle: &str, exclude: Option<usize>) -> (Option<usize>, usize) {
    let mut found = None;
    let mut count = 0;
    for (i, opt) in poll.options.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        if matches_focal(&canonicalize(&opt.label), needle) {
            count += 1;
            found = Some(i);
        }
    }
    (found, count)
}

/// Normalizes a poll to the two focal candidates of its season.
pub fn normalize_poll(poll: &PollRecord) -> Result<NormalizedOutcome, NormalizeError> {
    normalize_poll_with_labels(poll, "trump", poll.election.democrat_label())
}

/// Same as [`normalize_poll`] with explicit focal substrings.
pub fn normalize_poll_with_labels(
    poll: &PollRecord,
    label_trump: &str,
    label_dem: &str,
) -> Result<NormalizedOutcome, NormalizeError> {
    // A label matching both candidates is ambiguous.
    for opt in &poll.options {
        let canonical = canonicalize(&opt.label);
        if matches_focal(&canonical, label_trump) && matches_focal(&canonical, label_dem) {
            return Err(NormalizeError::MissingFocalOption {
                poll_id: poll.poll_id.clone(),
                label: opt.label.clone(),
            });
        }
    }
    let (trump_idx, trump_count) = find_unique(poll, label_trump, None);
    if trump_count != 1 {
        return Err(NormalizeError::MissingFocalOption {
            poll_id: poll.poll_id.clone(),
            label: label_trump.to_string(),
        });
    }
    let (dem_idx, dem_count) = find_unique(poll, label_dem, None);
    if dem_count != 1 {
        return Err(NormalizeError::MissingFocalOption {
            poll_id: poll.poll_id.clone(),
            label: label_dem.to_string(),
        });
    }
    let trump_idx = trump_idx.unwrap();
    let dem_idx = dem_idx.unwrap();

    let votes_trump = poll.options[trump_idx].votes;
    let votes_dem = poll.options[dem_idx].votes;
    let effective = votes_trump + votes_dem;
    if effective == 0 {
        return Err(NormalizeError::ZeroFocalVotes {
            poll_id: poll.poll_id.clone(),
        });
    }
    Ok(NormalizedOutcome {
        poll_id: poll.poll_id.clone(),
        share_focal: votes_trump as f64 / effective as f64,
        effective_votes: effective,
        trump_listed_first_among_focal: trump_idx < dem_idx,
        option_count: poll.options.len(),
    })
}

/// Normalizes an already head-to-head pair of shares that may not sum to 1,
/// as reported by mainstream polls and election results.
pub fn normalize_shares(share_trump: f64, share_dem: f64) -> Option<f64> {
    let total = share_trump + share_dem;
    if total <= 0.0 {
        None
    } else {
        Some(share_trump / total)
    }
}

/// (position, share) pairs for each option of each poll, grouped by the
/// poll's option count; zero-vote polls are skipped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSharePairs {
    /// option count (2..=4) -> list of (1-based position, vote share).
    pub groups: std::collections::BTreeMap<usize, Vec<(usize, f64)>>,
    pub skipped_zero_vote_polls: usize,
}

pub fn position_share_pairs(polls: &[PollRecord]) -> PositionSharePairs {
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    let mut skipped = 0;
    for poll in polls {
        let total = poll.total_votes();
        if total == 0 {
            skipped += 1;
            continue;
        }
        let entry = groups.entry(poll.options.len()).or_default();
        for (i, opt) in poll.options.iter().enumerate() {
            entry.push((i + 1, opt.votes as f64 / total as f64));
        }
    }
    PositionSharePairs {
        groups,
        skipped_zero_vote_polls: skipped,
    }
}

//! Shared ingestion-to-marginals assembly used by the pipeline subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};

use pollstrat::attrs::{aggregate_marginals, MarginalConfig, StateColorMap, UserAttributeRecord};
use pollstrat::core_model::{DimensionRegistry, StratumMarginals};
use pollstrat::normalize::{normalize_poll, NormalizedOutcome};

use crate::ResolvedCommon;

pub struct Prepared {
    pub polls: Vec<(NormalizedOutcome, StratumMarginals)>,
    pub ingest_rejections: usize,
    pub normalize_rejections: usize,
}

impl Prepared {
    /// Prints dropped-row counts to stderr when any input row was rejected.
    pub fn report_drops(&self) {
        if self.ingest_rejections + self.normalize_rejections > 0 {
            eprintln!(
                "note: {} rows rejected at ingest, {} polls without a head-to-head outcome",
                self.ingest_rejections, self.normalize_rejections
            );
        }
    }
}

/// Input files that feed a pipeline run, for the manifest.
pub fn input_paths(common: &ResolvedCommon) -> Vec<&PathBuf> {
    let mut paths = vec![&common.polls, &common.attributes];
    if let Some(c) = &common.config {
        paths.push(c);
    }
    if let Some(r) = &common.registry {
        paths.push(r);
    }
    if let Some(c) = &common.color_map {
        paths.push(c);
    }
    paths
}

/// Loads polls and attributes, normalizes outcomes and aggregates per-poll
/// stratum marginals. Polls that cannot be normalized are dropped and counted.
pub fn prepare(common: &ResolvedCommon, registry: &DimensionRegistry) -> Result<Prepared> {
    let color_map: StateColorMap = match &common.color_map {
        Some(path) => serde_json::from_str(
            &fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?,
        )
        .with_context(|| format!("invalid color map {}", path.display()))?,
        None => pollstrat::synth::synthetic_color_map(),
    };

    let poll_report = pollstrat::ingest::load_polls(&common.polls, common.season)?;
    let known: BTreeSet<String> = poll_report
        .records
        .iter()
        .map(|p| p.poll_id.clone())
        .collect();
    let attr_report = pollstrat::ingest::load_attributes(&common.attributes, Some(&known))?;

    let mut by_poll: BTreeMap<String, Vec<UserAttributeRecord>> = BTreeMap::new();
    for linked in attr_report.records {
        by_poll.entry(linked.poll_id).or_default().push(linked.record);
    }

    let mut config = MarginalConfig::new(color_map);
    config.bot_threshold = common.bot_threshold;

    let mut polls = Vec::new();
    let mut normalize_rejections = 0;
    for poll in &poll_report.records {
        match normalize_poll(poll) {
            Ok(outcome) => {
                let users = by_poll
                    .get(&poll.poll_id)
                    .map(|v| v.as_slice())
                    .unwrap_or(&[]);
                let marginals = aggregate_marginals(users, &outcome, registry, &config);
                polls.push((outcome, marginals));
            }
            Err(_) => normalize_rejections += 1,
        }
    }
    Ok(Prepared {
        polls,
        ingest_rejections: poll_report.rejections.len() + attr_report.rejections.len(),
        normalize_rejections,
    })
}

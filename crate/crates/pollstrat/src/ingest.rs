//! File ingestion and persistence: poll corpora, user-attribute files,
//! reference distributions, and fitted models.
//!
//! Ingestion is total: every input row either becomes a record or appears in
//! the rejection report with a row number and reason.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attrs::{Gender, UserAttributeRecord, UserRole};
use crate::core_model::{
    DimensionRegistry, Election, FittedModel, PollOption, PollRecord, ReferenceDistribution,
};

/// Version tag written into persisted model files.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: header mismatch, expected columns {expected:?}")]
    SchemaMismatch { path: String, expected: Vec<String> },
    #[error("{path}: invalid distribution: {reason}")]
    DistributionInvalid { path: String, reason: String },
    #[error("{path}: unsupported schema version {found} (supported: {supported})")]
    VersionMismatch {
        path: String,
        found: u32,
        supported: u32,
    },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
}

/// One rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRejection {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub reason: String,
}

/// Outcome of ingesting one file: converted records plus rejections; the
/// counts reconcile with the input row count exactly.
#[derive(Debug, Clone)]
pub struct IngestReport<T> {
    pub records: Vec<T>,
    pub rejections: Vec<RowRejection>,
}

impl<T> IngestReport<T> {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.rejections.len()
    }
}

const POLL_COLUMNS: [&str; 14] = [
    "poll_id",
    "author_id",
    "created_at",
    "election",
    "option_1_label",
    "option_2_label",
    "option_3_label",
    "option_4_label",
    "option_1_votes",
    "option_2_votes",
    "option_3_votes",
    "option_4_votes",
    "retweets",
    "favorites",
];

const ATTR_COLUMNS: [&str; 9] = [
    "user_id",
    "role",
    "poll_id",
    "ideology_score",
    "bot_score",
    "org_score",
    "age_years",
    "gender",
    "state",
];

fn check_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(IngestError::SchemaMismatch {
            path: path.display().to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(())
}

fn parse_count(field: &str, name: &str) -> Result<u64, String> {
    field
        .trim()
        .parse::<u64>()
        .map_err(|_| format!("{name} is not a non-negative integer: {field:?}"))
}

fn open_csv(path: &Path) -> Result<csv::Reader<fs::File>, IngestError> {
    let file = fs::File::open(path).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

/// Loads a poll CSV, keeping only rows of the requested season that satisfy
/// the record invariants.
pub fn load_polls(path: &Path, season: Election) -> Result<IngestReport<PollRecord>, IngestError> {
    let mut reader = open_csv(path)?;
    check_header(path, reader.headers().map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?, &POLL_COLUMNS)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let reject = |reason: String| RowRejection {
            row: row_no,
            reason,
        };
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejections.push(reject(format!("unparseable row: {e}")));
                continue;
            }
        };
        match parse_poll_row(&row, season) {
            Ok(Some(poll)) => records.push(poll),
            Ok(None) => rejections.push(reject(format!(
                "election season does not match requested {season}"
            ))),
            Err(reason) => rejections.push(reject(reason)),
        }
    }
    Ok(IngestReport {
        records,
        rejections,
    })
}

fn parse_poll_row(row: &csv::StringRecord, season: Election) -> Result<Option<PollRecord>, String> {
    if row.len() != POLL_COLUMNS.len() {
        return Err(format!("expected {} fields, got {}", POLL_COLUMNS.len(), row.len()));
    }
    let election: Election = row[3]
        .parse()
        .map_err(|e: String| e)?;
    if election != season {
        return Ok(None);
    }
    let created_at = DateTime::parse_from_rfc3339(row[2].trim())
        .map_err(|e| format!("created_at is not ISO-8601: {e}"))?
        .with_timezone(&Utc);
    if created_at > election.cutoff() {
        return Err(format!(
            "post-election: created_at {created_at} is after election day {}",
            election.election_day()
        ));
    }
    let mut options = Vec::new();
    for k in 0..4 {
        let label = row[4 + k].trim();
        let votes = row[8 + k].trim();
        match (label.is_empty(), votes.is_empty()) {
            (true, true) => continue,
            (false, false) => options.push(PollOption {
                label: label.to_string(),
                votes: parse_count(votes, &format!("option_{}_votes", k + 1))?,
            }),
            _ => {
                return Err(format!(
                    "option {} has a label without votes or votes without a label",
                    k + 1
                ))
            }
        }
    }
    if !(2..=4).contains(&options.len()) {
        return Err(format!("option count {} outside 2-4", options.len()));
    }
    Ok(Some(PollRecord {
        poll_id: row[0].trim().to_string(),
        author_id: row[1].trim().to_string(),
        created_at,
        election,
        options,
        retweets: parse_count(&row[12], "retweets")?,
        favorites: parse_count(&row[13], "favorites")?,
    }))
}

/// A user-attribute record together with the poll it is linked to.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedAttributeRecord {
    pub poll_id: String,
    pub record: UserAttributeRecord,
}

/// Loads a user-attribute CSV. If `known_polls` is given, rows referencing
/// unknown poll ids are rejected.
pub fn load_attributes(
    path: &Path,
    known_polls: Option<&BTreeSet<String>>,
) -> Result<IngestReport<LinkedAttributeRecord>, IngestError> {
    let mut reader = open_csv(path)?;
    check_header(path, reader.headers().map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?, &ATTR_COLUMNS)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejections.push(RowRejection {
                    row: row_no,
                    reason: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        match parse_attr_row(&row, known_polls) {
            Ok(rec) => records.push(rec),
            Err(reason) => rejections.push(RowRejection {
                row: row_no,
                reason,
            }),
        }
    }
    Ok(IngestReport {
        records,
        rejections,
    })
}

fn parse_optional_score(field: &str, name: &str, lo: f64, hi: f64) -> Result<Option<f64>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| format!("{name} is not a number: {field:?}"))?;
    if !(lo..=hi).contains(&v) {
        return Err(format!("{name} {v} outside [{lo}, {hi}]"));
    }
    Ok(Some(v))
}

fn parse_attr_row(
    row: &csv::StringRecord,
    known_polls: Option<&BTreeSet<String>>,
) -> Result<LinkedAttributeRecord, String> {
    if row.len() != ATTR_COLUMNS.len() {
        return Err(format!("expected {} fields, got {}", ATTR_COLUMNS.len(), row.len()));
    }
    let role = match row[1].trim() {
        "author" => UserRole::Author,
        "retweeter" => UserRole::Retweeter,
        "favoriter" => UserRole::Favoriter,
        "follower" => UserRole::Follower,
        other => return Err(format!("unknown role {other:?}")),
    };
    let poll_id = row[2].trim().to_string();
    if let Some(known) = known_polls {
        if !known.contains(&poll_id) {
            return Err(format!("references unknown poll {poll_id:?}"));
        }
    }
    let age_years = {
        let f = row[6].trim();
        if f.is_empty() {
            None
        } else {
            Some(
                f.parse::<u32>()
                    .map_err(|_| format!("age_years is not a non-negative integer: {f:?}"))?,
            )
        }
    };
    let gender = match row[7].trim() {
        "" => None,
        "male" => Some(Gender::Male),
        "female" => Some(Gender::Female),
        other => return Err(format!("unknown gender {other:?}")),
    };
    let state = {
        let f = row[8].trim();
        if f.is_empty() {
            None
        } else {
            Some(f.to_string())
        }
    };
    Ok(LinkedAttributeRecord {
        poll_id,
        record: UserAttributeRecord {
            user_id: row[0].trim().to_string(),
            role,
            ideology_score: parse_optional_score(&row[3], "ideology_score", -3.0, 3.0)?,
            bot_score: parse_optional_score(&row[4], "bot_score", 0.0, 1.0)?,
            org_score: parse_optional_score(&row[5], "org_score", 0.0, 1.0)?,
            age_years,
            gender,
            state,
        },
    })
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    let mut buf = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut buf))
        .map_err(|e| IngestError::Unreadable {
            path: path.display().to_string(),
            source: e,
        })?;
    Ok(buf)
}

/// Loads and validates a reference distribution JSON file.
pub fn load_reference(path: &Path) -> Result<ReferenceDistribution, IngestError> {
    let buf = read_to_string(path)?;
    let reference: ReferenceDistribution =
        serde_json::from_str(&buf).map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    reference.check().map_err(|reason| IngestError::DistributionInvalid {
        path: path.display().to_string(),
        reason,
    })?;
    Ok(reference)
}

/// Loads a dimension registry JSON file and validates it.
pub fn load_registry(path: &Path) -> Result<DimensionRegistry, IngestError> {
    let buf = read_to_string(path)?;
    let registry: DimensionRegistry =
        serde_json::from_str(&buf).map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    if let Err(violations) = crate::core_model::validate_registry(&registry) {
        return Err(IngestError::Malformed {
            path: path.display().to_string(),
            reason: violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        });
    }
    Ok(registry)
}

#[derive(Debug, Serialize, Deserialize)]
struct PersistedModel {
    schema_version: u32,
    #[serde(flatten)]
    model: FittedModel,
}

/// Writes a fitted model as versioned JSON.
pub fn save_model(path: &Path, model: &FittedModel) -> Result<(), IngestError> {
    let persisted = PersistedModel {
        schema_version: MODEL_SCHEMA_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&persisted).expect("model serializes");
    fs::write(path, json).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })
}

/// Loads a fitted model, checking the schema version and structural
/// invariants against the registry.
pub fn load_model(path: &Path, registry: &DimensionRegistry) -> Result<FittedModel, IngestError> {
    let buf = read_to_string(path)?;
    let persisted: PersistedModel =
        serde_json::from_str(&buf).map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    if persisted.schema_version != MODEL_SCHEMA_VERSION {
        return Err(IngestError::VersionMismatch {
            path: path.display().to_string(),
            found: persisted.schema_version,
            supported: MODEL_SCHEMA_VERSION,
        });
    }
    persisted
        .model
        .check_against(registry)
        .map_err(|reason| IngestError::Malformed {
            path: path.display().to_string(),
            reason,
        })?;
    Ok(persisted.model)
}

/// Writes polls in the ingestion CSV schema, so emitted corpora re-ingest
/// bit-for-bit.
pub fn write_polls(path: &Path, polls: &[PollRecord]) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    writer
        .write_record(POLL_COLUMNS)
        .map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    for poll in polls {
        let mut fields = vec![
            poll.poll_id.clone(),
            poll.author_id.clone(),
            poll.created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            poll.election.to_string(),
        ];
        for k in 0..4 {
            fields.push(
                poll.options
                    .get(k)
                    .map(|o| o.label.clone())
                    .unwrap_or_default(),
            );
        }
        for k in 0..4 {
            fields.push(
                poll.options
                    .get(k)
                    .map(|o| o.votes.to_string())
                    .unwrap_or_default(),
            );
        }
        fields.push(poll.retweets.to_string());
        fields.push(poll.favorites.to_string());
        writer.write_record(&fields).map_err(|e| IngestError::Malformed {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes user-attribute records in the ingestion CSV schema.
pub fn write_attributes(
    path: &Path,
    records: &[LinkedAttributeRecord],
) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| IngestError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let io_err = |e: csv::Error, path: &Path| IngestError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    };
    writer.write_record(ATTR_COLUMNS).map_err(|e| io_err(e, path))?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for linked in records {
        let r = &linked.record;
        let fields = vec![
            r.user_id.clone(),
            match r.role {
                UserRole::Author => "author",
                UserRole::Retweeter => "retweeter",
                UserRole::Favoriter => "favoriter",
                UserRole::Follower => "follower",
            }
            .to_string(),
            linked.poll_id.clone(),
            fmt(r.ideology_score),
            fmt(r.bot_score),
            fmt(r.org_score),
            r.age_years.map(|a| a.to_string()).unwrap_or_default(),
            match r.gender {
                Some(Gender::Male) => "male".to_string(),
                Some(Gender::Female) => "female".to_string(),
                None => String::new(),
            },
            r.state.clone().unwrap_or_default(),
        ];
        writer.write_record(&fields).map_err(|e| io_err(e, path))?;
    }
    writer.flush().map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes a reference distribution as JSON.
pub fn write_reference(path: &Path, reference: &ReferenceDistribution) -> Result<(), IngestError> {
    let json = serde_json::to_string_pretty(reference).expect("reference serializes");
    fs::write(path, json).map_err(|e| IngestError::Unreadable {
        path: path.display().to_string(),
        source: e,
    })
}

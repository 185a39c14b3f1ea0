//! Index table curation: declarative label cleaning and cross-corpus
//! participant identifiers.
//!
//! Rule sets live in a TOML file, one section per column, and are applied
//! in listed order. A rule set must be idempotent: re-running it on an
//! already-clean table changes nothing, which is validated when the file
//! is loaded.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indexer::{IndexRow, IndexTable, COLUMNS};

/// Fill value used for missing labels unless a rule says otherwise.
pub const DEFAULT_MISSING_LABEL: &str = "unspecified";
/// Separator between corpus and participant name in identifiers.
pub const DEFAULT_ID_SEPARATOR: &str = "/";

/// Columns rules may touch. Row identity (`file_path`, `corpus`) and the
/// numeric `age_m` column are off limits.
const EDITABLE_COLUMNS: [&str; 6] = ["participants", "name", "sex", "group", "ses", "study_type"];

#[derive(Debug, Error)]
pub enum CuratorError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` cannot be edited by rules")]
    ProtectedColumn(String),
    #[error("rule set for column `{column}` is not idempotent: `{value}` maps to `{mapped}`")]
    NotIdempotent {
        column: String,
        value: String,
        mapped: String,
    },
    #[error("cannot read rule file {path}: {message}")]
    Load { path: String, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One cleaning rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Replace an exact label; renaming to `""` deletes the value.
    Rename { from: String, to: String },
    /// Trim any of these characters off the end of the label.
    TrimTrailing(String),
    /// Fold labels that match the canonical form case-insensitively.
    CaseFoldTo(String),
    /// Substitute missing values with a default.
    FillMissing(String),
}

impl LabelRule {
    fn apply(&self, value: Option<String>) -> Option<String> {
        match (self, value) {
            (LabelRule::Rename { from, to }, Some(v)) if &v == from => {
                (!to.is_empty()).then(|| to.clone())
            }
            (LabelRule::TrimTrailing(chars), Some(v)) => {
                let trimmed = v.trim_end_matches(|c| chars.contains(c));
                (!trimmed.is_empty()).then(|| trimmed.to_string())
            }
            (LabelRule::CaseFoldTo(canonical), Some(v))
                if v.eq_ignore_ascii_case(canonical) && &v != canonical =>
            {
                Some(canonical.clone())
            }
            (LabelRule::FillMissing(default), None) => Some(default.clone()),
            (_, value) => value,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ColumnRules {
    rules: Vec<LabelRule>,
}

/// Ordered per-column rule lists.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabelRuleSet {
    columns: IndexMap<String, ColumnRules>,
}

impl LabelRuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_rule(&mut self, column: &str, rule: LabelRule) {
        self.columns
            .entry(column.to_string())
            .or_default()
            .rules
            .push(rule);
    }

    pub fn load(path: &Path) -> Result<Self, CuratorError> {
        let text = std::fs::read_to_string(path).map_err(|e| CuratorError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let set: LabelRuleSet = toml::from_str(&text).map_err(|e| CuratorError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        set.validate()?;
        Ok(set)
    }

    /// Columns must exist and be editable; every rule target must be a
    /// fixed point of its column's chain, which makes re-application a
    /// no-op.
    pub fn validate(&self) -> Result<(), CuratorError> {
        for (column, rules) in &self.columns {
            if !COLUMNS.contains(&column.as_str()) {
                return Err(CuratorError::UnknownColumn(column.clone()));
            }
            if !EDITABLE_COLUMNS.contains(&column.as_str()) {
                return Err(CuratorError::ProtectedColumn(column.clone()));
            }
            for rule in &rules.rules {
                let target = match rule {
                    LabelRule::Rename { to, .. } if to.is_empty() => continue,
                    LabelRule::Rename { to, .. } => to.clone(),
                    LabelRule::CaseFoldTo(canonical) => canonical.clone(),
                    LabelRule::FillMissing(default) => default.clone(),
                    LabelRule::TrimTrailing(_) => continue,
                };
                let mapped = apply_chain(&rules.rules, Some(target.clone()));
                if mapped.as_deref() != Some(target.as_str()) {
                    return Err(CuratorError::NotIdempotent {
                        column: column.clone(),
                        value: target,
                        mapped: mapped.unwrap_or_default(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

fn apply_chain(rules: &[LabelRule], value: Option<String>) -> Option<String> {
    rules.iter().fold(value, |v, rule| rule.apply(v))
}

/// Distinct labels of one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub column: String,
    /// Distinct non-missing values, sorted lexicographically.
    pub labels: Vec<String>,
    pub missing: usize,
}

fn column_value(row: &IndexRow, column: &str) -> Option<String> {
    let opt_str = |s: &Option<String>| s.clone();
    match column {
        "file_path" => Some(row.file_path.clone()),
        "corpus" => Some(row.corpus.clone()),
        "participants" => (!row.participants.is_empty()).then(|| row.participants.clone()),
        "name" => opt_str(&row.name),
        "age_m" => row.age_m.map(|a| format!("{a:.1}")),
        "sex" => opt_str(&row.sex),
        "group" => opt_str(&row.group),
        "ses" => opt_str(&row.ses),
        "study_type" => (!row.study_type.is_empty()).then(|| row.study_type.clone()),
        "participant_id" => opt_str(&row.participant_id),
        _ => None,
    }
}

fn set_column_value(row: &mut IndexRow, column: &str, value: Option<String>) {
    match column {
        "participants" => row.participants = value.unwrap_or_default(),
        "name" => row.name = value,
        "sex" => row.sex = value,
        "group" => row.group = value,
        "ses" => row.ses = value,
        "study_type" => row.study_type = value.unwrap_or_default(),
        _ => unreachable!("writes are restricted to editable columns"),
    }
}

/// Distinct non-missing labels of a column, sorted, plus a missing count.
pub fn get_labels(table: &IndexTable, column: &str) -> Result<LabelReport, CuratorError> {
    if !COLUMNS.contains(&column) {
        return Err(CuratorError::UnknownColumn(column.to_string()));
    }
    let mut labels: Vec<String> = Vec::new();
    let mut missing = 0usize;
    for row in &table.rows {
        match column_value(row, column) {
            Some(v) => labels.push(v),
            None => missing += 1,
        }
    }
    labels.sort();
    labels.dedup();
    Ok(LabelReport {
        column: column.to_string(),
        labels,
        missing,
    })
}

/// One applied change, for the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub row: usize,
    pub column: String,
    pub before: String,
    pub after: String,
}

/// Apply a rule set column-wise, returning the cleaned table and a change
/// log. The input table is untouched; `file_path`, `corpus` and the row
/// count never change.
pub fn apply_rules(
    table: &IndexTable,
    rules: &LabelRuleSet,
) -> Result<(IndexTable, Vec<ChangeRecord>), CuratorError> {
    rules.validate()?;
    let mut cleaned = table.clone();
    let mut log = Vec::new();
    for (column, column_rules) in &rules.columns {
        for (row_idx, row) in cleaned.rows.iter_mut().enumerate() {
            let before = column_value(row, column);
            let after = apply_chain(&column_rules.rules, before.clone());
            if before != after {
                log.push(ChangeRecord {
                    row: row_idx,
                    column: column.clone(),
                    before: before.unwrap_or_default(),
                    after: after.clone().unwrap_or_default(),
                });
                set_column_value(row, column, after);
            }
        }
    }
    Ok((cleaned, log))
}

/// Write the change log as CSV (`row,column,before,after`).
pub fn write_change_log(log: &[ChangeRecord], path: &Path) -> Result<(), CuratorError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CuratorError::Write {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let write_err = |e: csv::Error| CuratorError::Write {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    };
    writer
        .write_record(["row", "column", "before", "after"])
        .map_err(write_err)?;
    for entry in log {
        writer
            .write_record([
                entry.row.to_string().as_str(),
                &entry.column,
                &entry.before,
                &entry.after,
            ])
            .map_err(write_err)?;
    }
    writer.flush().map_err(|e| CuratorError::Write {
        path: path.display().to_string(),
        source: e,
    })
}

/// Fill `participant_id` with `corpus<separator>name` for every row that
/// has a name. Rows sharing (corpus, name) share an identifier, so
/// longitudinal files map to one participant.
pub fn add_participant_id(table: &IndexTable, separator: &str) -> (IndexTable, Vec<String>) {
    let mut out = table.clone();
    let mut warnings = Vec::new();
    for row in &mut out.rows {
        match &row.name {
            Some(name) => row.participant_id = Some(format!("{}{separator}{name}", row.corpus)),
            None => {
                row.participant_id = None;
                warnings.push(format!("{}: missing name, no participant id", row.file_path));
            }
        }
    }
    (out, warnings)
}

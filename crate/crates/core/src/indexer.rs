//! Level two of the pipeline: exhaustively inspect every local CHAT file
//! and emit the deterministic index table.
//!
//! One row per matching file, columns fixed as
//! `file_path,corpus,participants,name,age_m,sex,group,ses,study_type,participant_id`,
//! rows sorted by (corpus, file_path). Two runs over the same mirror
//! produce byte-identical CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::chat_header::{parse_header, HeaderMetadata, ParseMode};
use crate::criteria::{eval_expr, FilterExpr};
use crate::parallel::map_bounded;

/// Default focus participant.
pub const DEFAULT_FOCUS: &str = "CHI";

/// Fixed column schema, in order.
pub const COLUMNS: [&str; 10] = [
    "file_path",
    "corpus",
    "participants",
    "name",
    "age_m",
    "sex",
    "group",
    "ses",
    "study_type",
    "participant_id",
];

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("mirror root {0} does not exist")]
    MissingRoot(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error in {path}: {message}")]
    Csv { path: String, message: String },
}

/// One matching CHAT file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    /// Mirror-relative path with `/` separators.
    pub file_path: String,
    pub corpus: String,
    /// Speaker codes in source order, joined with `", "`.
    pub participants: String,
    pub name: Option<String>,
    pub age_m: Option<f64>,
    pub sex: Option<String>,
    pub group: Option<String>,
    pub ses: Option<String>,
    /// `@Types` labels joined with `", "`.
    pub study_type: String,
    /// Cross-corpus identifier, filled by the curator.
    pub participant_id: Option<String>,
}

/// Where a table came from: recorded in the CSV's sidecar file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub criteria: String,
    pub mirror_root: String,
    pub created_at: String,
}

/// The deterministic per-file metadata table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndexTable {
    pub rows: Vec<IndexRow>,
    pub provenance: Provenance,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Build one row from a parsed header.
///
/// `name`, `age_m`, `sex` and `group` come from the focus participant;
/// `ses` falls back to MOT when the focus participant's slot is blank.
/// A missing focus participant leaves all focus-derived fields empty and
/// is reported in the returned warnings.
pub fn row_from_header(header: &HeaderMetadata, focus: &str) -> (IndexRow, Vec<String>) {
    let mut warnings = Vec::new();
    let focus_rec = header.participants.get(focus);
    if focus_rec.is_none() {
        warnings.push(format!(
            "{}: focus participant {focus} absent",
            header.file_path
        ));
    }
    let ses = focus_rec
        .and_then(|r| r.ses.clone())
        .or_else(|| header.participants.get("MOT").and_then(|r| r.ses.clone()));
    let row = IndexRow {
        file_path: header.file_path.clone(),
        corpus: header.corpus.clone(),
        participants: header
            .participants
            .keys()
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(", "),
        name: focus_rec.and_then(|r| r.name.clone()),
        age_m: focus_rec.and_then(|r| r.age_months),
        sex: focus_rec.and_then(|r| r.sex.as_ref().map(|s| s.as_str().to_string())),
        group: focus_rec.and_then(|r| r.group.clone()),
        ses,
        study_type: header.types.join(", "),
        participant_id: None,
    };
    (row, warnings)
}

/// Walk the mirror, lenient-parse every `.cha` file, keep the ones that
/// satisfy the criteria. Parsing and evaluation run per-file in parallel;
/// rows are sorted afterwards so scheduling never shows in the output.
pub fn index_files(
    root: &Path,
    criteria: &FilterExpr,
    focus: &str,
    parallelism: usize,
) -> Result<IndexTable, IndexError> {
    if !root.is_dir() {
        return Err(IndexError::MissingRoot(root.display().to_string()));
    }

    let mut paths = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                if e.path().extension().is_some_and(|x| x == "cha") {
                    paths.push(e.into_path());
                }
            }
            Ok(_) => {}
            Err(e) => {
                // Collected below with the per-file warnings.
                paths.clear();
                return Err(IndexError::Read {
                    path: root.display().to_string(),
                    source: std::io::Error::other(e.to_string()),
                });
            }
        }
    }
    paths.sort();

    let focus = focus.to_string();
    let outcomes = map_bounded(paths, parallelism, |path| {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => return (None, vec![format!("{rel}: unreadable: {e}")]),
        };
        let mut header = match parse_header(&text, ParseMode::Lenient) {
            Ok(h) => h,
            Err(e) => return (None, vec![format!("{rel}: {e}")]),
        };
        header.file_path = rel.clone();
        if header.corpus.is_empty() {
            // No @ID line named the corpus; fall back to the directory.
            header.corpus = rel
                .rsplit('/')
                .nth(1)
                .unwrap_or_default()
                .to_string();
        }
        if !eval_expr(criteria, &header) {
            return (None, Vec::new());
        }
        let (row, warnings) = row_from_header(&header, &focus);
        (Some(row), warnings)
    });

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (row, mut warn) in outcomes {
        if let Some(row) = row {
            rows.push(row);
        }
        warnings.append(&mut warn);
    }
    rows.sort_by(|a, b| (&a.corpus, &a.file_path).cmp(&(&b.corpus, &b.file_path)));
    warnings.sort();

    Ok(IndexTable {
        rows,
        provenance: Provenance {
            criteria: criteria.to_string(),
            mirror_root: root.display().to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        },
        warnings,
    })
}

fn format_age(age: f64) -> String {
    format!("{age:.1}")
}

/// Write the table as RFC 4180 CSV plus a JSON provenance sidecar
/// (`<path>.provenance.json`). Missing values are empty fields; identical
/// tables produce byte-identical CSV.
pub fn write_index(table: &IndexTable, path: &Path) -> Result<(), IndexError> {
    let csv_err = |e: csv::Error| IndexError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(COLUMNS).map_err(csv_err)?;
    for row in &table.rows {
        writer
            .write_record([
                row.file_path.as_str(),
                row.corpus.as_str(),
                row.participants.as_str(),
                row.name.as_deref().unwrap_or(""),
                &row.age_m.map(format_age).unwrap_or_default(),
                row.sex.as_deref().unwrap_or(""),
                row.group.as_deref().unwrap_or(""),
                row.ses.as_deref().unwrap_or(""),
                row.study_type.as_str(),
                row.participant_id.as_deref().unwrap_or(""),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| IndexError::Write {
        path: path.display().to_string(),
        source: e,
    })?;

    let sidecar = sidecar_path(path);
    let json = serde_json::to_string_pretty(&table.provenance)
        .expect("provenance serializes");
    fs::write(&sidecar, json + "\n").map_err(|e| IndexError::Write {
        path: sidecar.display().to_string(),
        source: e,
    })
}

pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    let mut name = csv_path.as_os_str().to_os_string();
    name.push(".provenance.json");
    std::path::PathBuf::from(name)
}

/// Read a CSV written by [`write_index`] back into a table. Provenance is
/// restored from the sidecar when present.
pub fn read_index(path: &Path) -> Result<IndexTable, IndexError> {
    let csv_err = |e: csv::Error| IndexError::Csv {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(IndexError::Csv {
            path: path.display().to_string(),
            message: format!("unexpected column header: {headers:?}"),
        });
    }
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let age_m = match record.get(4).unwrap_or_default() {
            "" => None,
            s => Some(s.parse::<f64>().map_err(|e| IndexError::Csv {
                path: path.display().to_string(),
                message: format!("bad age_m `{s}`: {e}"),
            })?),
        };
        rows.push(IndexRow {
            file_path: record.get(0).unwrap_or_default().to_string(),
            corpus: record.get(1).unwrap_or_default().to_string(),
            participants: record.get(2).unwrap_or_default().to_string(),
            name: opt(record.get(3).unwrap_or_default()),
            age_m,
            sex: opt(record.get(5).unwrap_or_default()),
            group: opt(record.get(6).unwrap_or_default()),
            ses: opt(record.get(7).unwrap_or_default()),
            study_type: record.get(8).unwrap_or_default().to_string(),
            participant_id: opt(record.get(9).unwrap_or_default()),
        });
    }
    let provenance = fs::read_to_string(sidecar_path(path))
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok())
        .unwrap_or_default();
    Ok(IndexTable {
        rows,
        provenance,
        warnings: Vec::new(),
    })
}

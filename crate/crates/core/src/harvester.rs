//! Level one of the pipeline: screen corpora with early exit, then
//! batch-download and extract the selected archives into a local mirror.
//!
//! Screening streams each archive's entries in central-directory order
//! and stops at the first header that satisfies the criteria, so a corpus
//! is accepted or rejected without inspecting every file. Downloads are
//! recorded in a manifest keyed by content digest, which makes re-runs
//! resumable no-ops.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zip::ZipArchive;

use crate::chat_header::{parse_header, ParseMode};
use crate::criteria::{eval_expr, FilterExpr};
use crate::fetch::{FetchError, FetchResponse, PageFetcher};
use crate::parallel::map_bounded;
use crate::remote_source::CorpusSource;

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("corpus {corpus}: {source}")]
    Fetch {
        corpus: String,
        #[source]
        source: FetchError,
    },
    #[error("corpus {corpus}: corrupt archive: {reason}")]
    CorruptArchive { corpus: String, reason: String },
    #[error("corpus {corpus}: archive entry `{entry}` escapes the extraction root")]
    ZipSlip { corpus: String, entry: String },
    #[error("corpus {corpus}: I/O error: {source}")]
    Io {
        corpus: String,
        #[source]
        source: std::io::Error,
    },
    #[error("screening failed for all {0} corpora")]
    AllFailed(usize),
    #[error("manifest error: {0}")]
    Manifest(String),
}

/// Download retry policy: exponential backoff doubling from
/// `initial_backoff`.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

fn fetch_with_retry(
    url: &str,
    fetcher: &dyn PageFetcher,
    retry: &RetryPolicy,
) -> Result<FetchResponse, FetchError> {
    let mut backoff = retry.initial_backoff;
    let mut last_err = None;
    for attempt in 0..retry.attempts.max(1) {
        if attempt > 0 {
            std::thread::sleep(backoff);
            backoff *= 2;
        }
        match fetcher.fetch(url).and_then(FetchResponse::into_success) {
            Ok(resp) => return Ok(resp),
            // Auth challenges and client errors won't improve on retry.
            Err(err @ FetchError::ProtectedCollection { .. }) => return Err(err),
            Err(FetchError::Http { status, url }) if (400..500).contains(&status) => {
                return Err(FetchError::Http { status, url })
            }
            Err(err) => last_err = Some(err),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Outcome of screening one corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenResult {
    pub source: CorpusSource,
    pub selected: bool,
    /// 1-based position of the first match in archive order, or the total
    /// `.cha` count when nothing matched.
    pub files_inspected: usize,
    pub first_match: Option<String>,
    pub warnings: Vec<String>,
}

/// Screen one corpus archive, stopping at the first matching header.
pub fn screen_corpus(
    source: &CorpusSource,
    criteria: &FilterExpr,
    fetcher: &dyn PageFetcher,
    retry: &RetryPolicy,
) -> Result<ScreenResult, HarvestError> {
    let resp = fetch_with_retry(&source.archive_url, fetcher, retry).map_err(|e| {
        HarvestError::Fetch {
            corpus: source.corpus.clone(),
            source: e,
        }
    })?;
    let mut archive =
        ZipArchive::new(Cursor::new(resp.body)).map_err(|e| HarvestError::CorruptArchive {
            corpus: source.corpus.clone(),
            reason: e.to_string(),
        })?;

    let mut result = ScreenResult {
        source: source.clone(),
        selected: false,
        files_inspected: 0,
        first_match: None,
        warnings: Vec::new(),
    };

    for index in 0..archive.len() {
        let mut entry = match archive.by_index(index) {
            Ok(e) => e,
            Err(e) => {
                result.warnings.push(format!("entry {index}: {e}"));
                continue;
            }
        };
        if !entry.is_file() || !entry.name().ends_with(".cha") {
            continue;
        }
        result.files_inspected += 1;
        let name = entry.name().to_string();
        let mut text = String::new();
        if let Err(e) = entry.read_to_string(&mut text) {
            result.warnings.push(format!("{name}: unreadable: {e}"));
            continue;
        }
        let header = match parse_header(&text, ParseMode::Lenient) {
            Ok(h) => h,
            Err(e) => {
                result.warnings.push(format!("{name}: {e}"));
                continue;
            }
        };
        if eval_expr(criteria, &header) {
            result.selected = true;
            result.first_match = Some(name);
            break;
        }
    }
    Ok(result)
}

/// Per-source screening failure collected by [`screen_dataset`].
#[derive(Debug)]
pub struct ScreenFailure {
    pub source: CorpusSource,
    pub error: HarvestError,
}

/// Screening outcome for a whole dataset: results sorted by corpus name,
/// failures kept separately.
#[derive(Debug)]
pub struct DatasetScreen {
    pub results: Vec<ScreenResult>,
    pub failures: Vec<ScreenFailure>,
}

impl DatasetScreen {
    pub fn selected(&self) -> impl Iterator<Item = &ScreenResult> {
        self.results.iter().filter(|r| r.selected)
    }
}

/// Screen every source, up to `parallelism` corpora at a time. The result
/// list is sorted by corpus name regardless of completion order; a run
/// where every source failed is an error.
pub fn screen_dataset(
    sources: &[CorpusSource],
    criteria: &FilterExpr,
    fetcher: &dyn PageFetcher,
    parallelism: usize,
    retry: &RetryPolicy,
) -> Result<DatasetScreen, HarvestError> {
    let outcomes = map_bounded(sources.to_vec(), parallelism, |source| {
        let outcome = screen_corpus(&source, criteria, fetcher, retry);
        (source, outcome)
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (source, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(error) => failures.push(ScreenFailure { source, error }),
        }
    }
    if !sources.is_empty() && results.is_empty() {
        return Err(HarvestError::AllFailed(failures.len()));
    }
    results.sort_by(|a, b| {
        (&a.source.corpus, &a.source.archive_url).cmp(&(&b.source.corpus, &b.source.archive_url))
    });
    failures.sort_by(|a, b| a.source.corpus.cmp(&b.source.corpus));
    Ok(DatasetScreen { results, failures })
}

/// One downloaded corpus in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub archive_url: String,
    /// SHA-256 of the archive bytes, recorded before extraction.
    pub sha256: String,
    pub byte_size: u64,
    /// Extraction root relative to the mirror root, `/`-separated.
    pub extraction_root: String,
    pub timestamp: String,
    pub file_count: usize,
}

/// Download manifest, persisted as JSON with sorted corpus keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, HarvestError> {
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(path)
            .map_err(|e| HarvestError::Manifest(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| HarvestError::Manifest(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarvestError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| HarvestError::Manifest(e.to_string()))?;
        fs::write(path, text + "\n")
            .map_err(|e| HarvestError::Manifest(format!("{}: {e}", path.display())))
    }
}

/// Download and extract one corpus archive into the mirror.
///
/// Layout: `<mirror_root>/<collection>/<dataset>/<corpus>/` with the
/// archive's internal paths preserved. A manifest entry with a matching
/// digest plus an existing extraction root makes the call a timestamp-only
/// no-op. Archives containing traversal paths are rejected before
/// anything is written.
pub fn fetch_corpus(
    source: &CorpusSource,
    mirror_root: &Path,
    fetcher: &dyn PageFetcher,
    manifest: &Mutex<Manifest>,
    retry: &RetryPolicy,
) -> Result<PathBuf, HarvestError> {
    let corpus = source.corpus.clone();
    let io_err = |e: std::io::Error| HarvestError::Io {
        corpus: corpus.clone(),
        source: e,
    };

    let rel_root: PathBuf = [&source.collection, &source.dataset, &source.corpus]
        .iter()
        .collect();
    let extraction_root = mirror_root.join(&rel_root);
    let rel_root_str = rel_root
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");

    let resp = fetch_with_retry(&source.archive_url, fetcher, retry).map_err(|e| {
        HarvestError::Fetch {
            corpus: corpus.clone(),
            source: e,
        }
    })?;
    let digest = hex::encode(Sha256::digest(&resp.body));
    let byte_size = resp.body.len() as u64;
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);

    {
        let mut manifest = manifest.lock().expect("manifest lock");
        if let Some(entry) = manifest.entries.get_mut(&corpus) {
            if entry.sha256 == digest && extraction_root.is_dir() {
                entry.timestamp = now;
                return Ok(extraction_root);
            }
        }
    }

    let mut archive =
        ZipArchive::new(Cursor::new(resp.body)).map_err(|e| HarvestError::CorruptArchive {
            corpus: corpus.clone(),
            reason: e.to_string(),
        })?;

    // Validate every entry before touching the filesystem.
    for index in 0..archive.len() {
        let entry = archive
            .by_index(index)
            .map_err(|e| HarvestError::CorruptArchive {
                corpus: corpus.clone(),
                reason: e.to_string(),
            })?;
        if entry.enclosed_name().is_none() {
            return Err(HarvestError::ZipSlip {
                corpus: corpus.clone(),
                entry: entry.name().to_string(),
            });
        }
    }

    // Extract into a scratch directory, then swap it in, so failures
    // leave no partial tree behind.
    let scratch = extraction_root.with_extension(format!("partial-{}", std::process::id()));
    let result = extract_all(&mut archive, &scratch);
    let file_count = match result {
        Ok(count) => count,
        Err(e) => {
            let _ = fs::remove_dir_all(&scratch);
            return Err(io_err(e));
        }
    };
    if extraction_root.exists() {
        fs::remove_dir_all(&extraction_root).map_err(io_err)?;
    }
    if let Some(parent) = extraction_root.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::rename(&scratch, &extraction_root).map_err(io_err)?;

    manifest.lock().expect("manifest lock").entries.insert(
        corpus,
        ManifestEntry {
            archive_url: source.archive_url.clone(),
            sha256: digest,
            byte_size,
            extraction_root: rel_root_str,
            timestamp: now,
            file_count,
        },
    );
    Ok(extraction_root)
}

fn extract_all(
    archive: &mut ZipArchive<Cursor<Vec<u8>>>,
    root: &Path,
) -> std::io::Result<usize> {
    fs::create_dir_all(root)?;
    let mut cha_count = 0;
    for index in 0..archive.len() {
        let mut entry = archive
            .by_index(index)
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let Some(rel) = entry.enclosed_name() else {
            return Err(std::io::Error::other("traversal entry slipped past validation"));
        };
        let dest = root.join(rel);
        if entry.is_dir() {
            fs::create_dir_all(&dest)?;
            continue;
        }
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = fs::File::create(&dest)?;
        std::io::copy(&mut entry, &mut out)?;
        if entry.name().ends_with(".cha") {
            cha_count += 1;
        }
    }
    Ok(cha_count)
}

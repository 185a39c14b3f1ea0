//! Harvest CHAT transcript corpora from TalkBank-style repositories and
//! curate them into a deterministic, cross-corpus metadata index.
//!
//! The pipeline runs in two levels. Level one screens remote corpus
//! archives with cheap criteria and stops at the first matching file per
//! corpus, then batch-downloads the selected archives into a local mirror.
//! Level two inspects every downloaded file against the target criteria
//! and emits one index row per match. A final curation pass standardizes
//! header labels and synthesizes cross-corpus participant identifiers.

pub mod chat_header;
pub mod config;
pub mod criteria;
pub mod curator;
pub mod fetch;
pub mod harvester;
pub mod indexer;
pub mod parallel;
pub mod remote_source;

pub use chat_header::{parse_age, parse_header, Field, HeaderMetadata, ParseMode, ParticipantRecord};
pub use criteria::{eval_expr, parse_expr, FilterExpr};
pub use fetch::{FetchResponse, HttpFetcher, PageFetcher};
pub use harvester::{fetch_corpus, screen_corpus, screen_dataset, Manifest, RetryPolicy, ScreenResult};
pub use indexer::{index_files, read_index, row_from_header, write_index, IndexRow, IndexTable};
pub use remote_source::{dataset_url, scan_zip_urls, CorpusSource};

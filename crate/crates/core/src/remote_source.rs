//! Dataset URL construction and directory-listing scans.
//!
//! Repositories in the TalkBank family expose each dataset as a plain
//! HTTP directory listing whose entries are corpus zip archives (possibly
//! nested one level into sub-dataset directories).

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::fetch::{FetchError, PageFetcher};

/// Default recursion into nested sub-dataset listings.
pub const DEFAULT_SCAN_DEPTH: usize = 1;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("invalid {kind} name `{name}`: {reason}")]
    InvalidName { kind: &'static str, name: String, reason: String },
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("cannot parse URL `{url}`: {reason}")]
    BadUrl { url: String, reason: String },
}

/// One downloadable corpus archive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CorpusSource {
    pub collection: String,
    pub dataset: String,
    /// Archive basename without the `.zip` extension.
    pub corpus: String,
    pub archive_url: String,
}

fn check_name(kind: &'static str, name: &str) -> Result<(), SourceError> {
    let invalid = |reason: &str| SourceError::InvalidName {
        kind,
        name: name.to_string(),
        reason: reason.to_string(),
    };
    if name.is_empty() {
        return Err(invalid("name is empty"));
    }
    if !name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
    {
        return Err(invalid("only alphanumerics, `-`, `_` and `.` are allowed"));
    }
    Ok(())
}

/// URL of a dataset's directory listing.
///
/// The canonical layout puts the collection in the subdomain:
/// `https://<collection>.talkbank.org/data/<dataset>`. With a base host
/// override the collection becomes the first path segment instead, which
/// is how the test stub routes requests.
pub fn dataset_url(
    collection: &str,
    dataset: &str,
    base_host: Option<&str>,
) -> Result<String, SourceError> {
    check_name("collection", collection)?;
    check_name("dataset", dataset)?;
    match base_host {
        None => Ok(format!("https://{collection}.talkbank.org/data/{dataset}")),
        Some(base) => {
            let base = base.trim_end_matches('/');
            let base = if base.contains("://") {
                base.to_string()
            } else {
                format!("http://{base}")
            };
            Ok(format!("{base}/{collection}/data/{dataset}"))
        }
    }
}

/// Scan a dataset listing for corpus zip archives.
///
/// Returns one [`CorpusSource`] per distinct `.zip` hyperlink, resolved
/// against the listing URL, deduplicated and sorted by corpus name.
/// Sub-directory links are followed up to `max_depth` levels (default 1).
pub fn scan_zip_urls(
    collection: &str,
    dataset: &str,
    url: &str,
    fetcher: &dyn PageFetcher,
    max_depth: usize,
) -> Result<Vec<CorpusSource>, SourceError> {
    let mut by_url: BTreeMap<String, CorpusSource> = BTreeMap::new();
    scan_level(collection, dataset, url, fetcher, max_depth, &mut by_url)?;
    let mut sources: Vec<CorpusSource> = by_url.into_values().collect();
    sources.sort();
    Ok(sources)
}

fn scan_level(
    collection: &str,
    dataset: &str,
    url: &str,
    fetcher: &dyn PageFetcher,
    depth_left: usize,
    by_url: &mut BTreeMap<String, CorpusSource>,
) -> Result<(), SourceError> {
    let resp = fetcher.fetch(url)?.into_success()?;
    let mut base = Url::parse(&resp.final_url).map_err(|e| SourceError::BadUrl {
        url: resp.final_url.clone(),
        reason: e.to_string(),
    })?;
    // A listing is a directory: relative links resolve inside it, not
    // beside it.
    if !base.path().ends_with('/') {
        let dir = format!("{}/", base.path());
        base.set_path(&dir);
    }
    let html = String::from_utf8_lossy(&resp.body);

    // Only href values are consulted; listings vary in attribute order
    // and quoting.
    let href_re = Regex::new(r#"(?i)href\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>"']+))"#)
        .expect("static regex");

    for caps in href_re.captures_iter(&html) {
        let href = caps
            .get(1)
            .or_else(|| caps.get(2))
            .or_else(|| caps.get(3))
            .map(|m| m.as_str())
            .unwrap_or_default();
        if href.is_empty() || href.starts_with('#') || href.starts_with('?') {
            continue;
        }
        let Ok(resolved) = base.join(href) else { continue };
        if resolved.host_str() != base.host_str() {
            continue;
        }
        let path = resolved.path().to_string();
        if path.ends_with(".zip") {
            let stem = path
                .rsplit('/')
                .next()
                .unwrap_or_default()
                .trim_end_matches(".zip");
            if stem.is_empty() {
                continue;
            }
            by_url
                .entry(resolved.to_string())
                .or_insert_with(|| CorpusSource {
                    collection: collection.to_string(),
                    dataset: dataset.to_string(),
                    corpus: stem.to_string(),
                    archive_url: resolved.to_string(),
                });
        } else if depth_left > 0 && path.ends_with('/') {
            // Nested dataset directory: must live strictly below this
            // listing, so parent links never loop the scan.
            let base_path = base.path().trim_end_matches('/');
            let sub = path.trim_end_matches('/');
            if let Some(name) = sub.strip_prefix(base_path).map(|s| s.trim_start_matches('/')) {
                if !name.is_empty() && !name.contains('/') {
                    let nested = format!("{dataset}/{name}");
                    scan_level(
                        collection,
                        &nested,
                        resolved.as_str(),
                        fetcher,
                        depth_left - 1,
                        by_url,
                    )?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::Mutex;

    use crate::fetch::FetchResponse;

    /// In-memory fetcher mapping URLs to canned responses.
    pub struct MapFetcher {
        routes: HashMap<String, (u16, Vec<u8>)>,
        pub log: Mutex<Vec<String>>,
    }

    impl MapFetcher {
        pub fn new(routes: &[(&str, u16, &[u8])]) -> Self {
            MapFetcher {
                routes: routes
                    .iter()
                    .map(|(u, s, b)| (u.to_string(), (*s, b.to_vec())))
                    .collect(),
                log: Mutex::new(Vec::new()),
            }
        }
    }

    impl PageFetcher for MapFetcher {
        fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
            self.log.lock().unwrap().push(url.to_string());
            match self.routes.get(url) {
                Some((status, body)) => Ok(FetchResponse {
                    status: *status,
                    body: body.clone(),
                    final_url: url.to_string(),
                }),
                None => Ok(FetchResponse {
                    status: 404,
                    body: Vec::new(),
                    final_url: url.to_string(),
                }),
            }
        }
    }

    const LISTING: &str = r#"<html><body>
        <a href="Bates.zip">Bates.zip</a>
        <a href='Clark.zip'>Clark.zip</a>
        <A HREF=Brown.zip>Brown.zip</A>
        <a href="Bates.zip">duplicate</a>
        <a href="../">parent</a>
        <a href="notes.txt">notes</a>
    </body></html>"#;

    #[test]
    fn default_url_layout() {
        assert_eq!(
            dataset_url("childes", "Eng-NA", None).unwrap(),
            "https://childes.talkbank.org/data/Eng-NA"
        );
    }

    #[test]
    fn base_host_override_layout() {
        assert_eq!(
            dataset_url("asdbank", "English", Some("localhost:8080")).unwrap(),
            "http://localhost:8080/asdbank/data/English"
        );
        assert_eq!(
            dataset_url("childes", "Eng-NA", Some("http://127.0.0.1:9000/")).unwrap(),
            "http://127.0.0.1:9000/childes/data/Eng-NA"
        );
    }

    #[test]
    fn rejects_bad_names() {
        assert!(dataset_url("childes", "", None).is_err());
        assert!(dataset_url("childes", "a/b", None).is_err());
        assert!(dataset_url("", "Eng-NA", None).is_err());
        assert!(dataset_url("chi ldes", "Eng-NA", None).is_err());
    }

    #[test]
    fn scans_listing_sorted_and_deduplicated() {
        let url = "http://host.test/childes/data/Eng-NA";
        let fetcher = MapFetcher::new(&[(url, 200, LISTING.as_bytes())]);
        let sources = scan_zip_urls("childes", "Eng-NA", url, &fetcher, 1).unwrap();
        let names: Vec<&str> = sources.iter().map(|s| s.corpus.as_str()).collect();
        assert_eq!(names, vec!["Bates", "Brown", "Clark"]);
        for s in &sources {
            assert!(s.archive_url.starts_with("http://host.test/"));
            assert!(s.archive_url.ends_with(".zip"));
            assert_eq!(s.corpus, s.archive_url.rsplit('/').next().unwrap().trim_end_matches(".zip"));
        }
    }

    #[test]
    fn empty_listing_is_not_an_error() {
        let url = "http://host.test/childes/data/Empty";
        let fetcher = MapFetcher::new(&[(url, 200, b"<html>no links</html>")]);
        assert!(scan_zip_urls("childes", "Empty", url, &fetcher, 1).unwrap().is_empty());
    }

    #[test]
    fn recurses_one_level_into_subdirectories() {
        let root = "http://host.test/childes/data/Eng-NA";
        let sub_listing = r#"<a href="Nested.zip">n</a> <a href="deeper/">d</a>"#;
        let deep_listing = r#"<a href="TooDeep.zip">t</a>"#;
        let fetcher = MapFetcher::new(&[
            (root, 200, br#"<a href="Bates.zip">b</a> <a href="sub/">s</a>"# as &[u8]),
            ("http://host.test/childes/data/Eng-NA/sub/", 200, sub_listing.as_bytes()),
            ("http://host.test/childes/data/Eng-NA/sub/deeper/", 200, deep_listing.as_bytes()),
        ]);
        let sources = scan_zip_urls("childes", "Eng-NA", root, &fetcher, 1).unwrap();
        let names: Vec<&str> = sources.iter().map(|s| s.corpus.as_str()).collect();
        assert_eq!(names, vec!["Bates", "Nested"], "depth 1 stops before `deeper/`");
        let nested = sources.iter().find(|s| s.corpus == "Nested").unwrap();
        assert_eq!(nested.dataset, "Eng-NA/sub");
    }

    #[test]
    fn protected_collection_is_a_distinct_error() {
        let url = "http://host.test/childes/data/Private";
        let fetcher = MapFetcher::new(&[(url, 401, b"auth required")]);
        match scan_zip_urls("childes", "Private", url, &fetcher, 1) {
            Err(SourceError::Fetch(FetchError::ProtectedCollection { .. })) => {}
            other => panic!("expected ProtectedCollection, got {other:?}"),
        }
    }

    #[test]
    fn http_failure_carries_status() {
        let url = "http://host.test/childes/data/Gone";
        let fetcher = MapFetcher::new(&[(url, 500, b"boom")]);
        match scan_zip_urls("childes", "Gone", url, &fetcher, 1) {
            Err(SourceError::Fetch(FetchError::Http { status: 500, .. })) => {}
            other => panic!("expected Http 500, got {other:?}"),
        }
    }

    #[test]
    fn scanning_is_idempotent() {
        let url = "http://host.test/childes/data/Eng-NA";
        let fetcher = MapFetcher::new(&[(url, 200, LISTING.as_bytes())]);
        let a = scan_zip_urls("childes", "Eng-NA", url, &fetcher, 1).unwrap();
        let b = scan_zip_urls("childes", "Eng-NA", url, &fetcher, 1).unwrap();
        assert_eq!(a, b);
    }
}

//! Page fetching abstraction.
//!
//! All networked operations go through [`PageFetcher`] so the whole
//! pipeline can run against a local stub server in tests.

use std::time::Duration;

use thiserror::Error;

pub const USER_AGENT: &str = concat!("corpus-harvest/", env!("CARGO_PKG_VERSION"));
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("transport error fetching {url}: {message}")]
    Transport { url: String, message: String },
    #[error("HTTP {status} fetching {url}")]
    Http { status: u16, url: String },
    #[error("collection at {url} is password-protected; only public collections are supported")]
    ProtectedCollection { url: String },
    #[error("failed to build HTTP client: {0}")]
    Client(String),
}

/// Response to a single GET.
#[derive(Debug, Clone)]
pub struct FetchResponse {
    pub status: u16,
    pub body: Vec<u8>,
    /// URL after redirects; relative links resolve against this.
    pub final_url: String,
}

impl FetchResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Folds HTTP status into the error space, flagging auth challenges
    /// as protected collections.
    pub fn into_success(self) -> Result<FetchResponse, FetchError> {
        match self.status {
            s if (200..300).contains(&s) => Ok(self),
            401 | 403 => Err(FetchError::ProtectedCollection { url: self.final_url }),
            s => Err(FetchError::Http { status: s, url: self.final_url }),
        }
    }
}

/// A single GET capability. Implementations must be safe for concurrent
/// use and must not mutate pipeline state.
pub trait PageFetcher: Send + Sync {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError>;
}

/// Real HTTP fetcher backed by a blocking client: identifies itself with
/// a tool user-agent, follows up to 5 redirects, configurable timeout.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(USER_AGENT)
            .timeout(timeout)
            .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
            .build()
            .map_err(|e| FetchError::Client(e.to_string()))?;
        Ok(HttpFetcher { client })
    }
}

impl Default for HttpFetcher {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT).expect("default HTTP client")
    }
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchResponse, FetchError> {
        let resp = self.client.get(url).send().map_err(|e| FetchError::Transport {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        let final_url = resp.url().to_string();
        let body = resp
            .bytes()
            .map_err(|e| FetchError::Transport {
                url: url.to_string(),
                message: e.to_string(),
            })?
            .to_vec();
        Ok(FetchResponse { status, body, final_url })
    }
}

//! Pipeline configuration: a single TOML document, with every field
//! overridable by a command-line flag (the flag wins).

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{parse_expr, FilterExpr};
use crate::harvester::RetryPolicy;
use crate::indexer::DEFAULT_FOCUS;
use crate::remote_source::DEFAULT_SCAN_DEPTH;

/// Environment variable naming the default config path.
pub const CONFIG_ENV_VAR: &str = "CORPUS_HARVEST_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryConfig {
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        RetryConfig {
            attempts: 3,
            backoff_ms: 1000,
        }
    }
}

impl RetryConfig {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.attempts,
            initial_backoff: Duration::from_millis(self.backoff_ms),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub collection: String,
    pub datasets: Vec<String>,
    pub base_host: Option<String>,
    pub mirror_root: PathBuf,
    pub screening_criteria: String,
    pub target_criteria: String,
    pub focus: String,
    pub parallelism: usize,
    pub retry: RetryConfig,
    pub rule_file: Option<PathBuf>,
    pub add_participant_id: bool,
    pub participant_id_separator: String,
    pub index_csv: PathBuf,
    pub cleaned_csv: PathBuf,
    pub change_log_csv: PathBuf,
    pub timeout_secs: u64,
    pub scan_depth: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            collection: "childes".to_string(),
            datasets: vec!["Eng-NA".to_string()],
            base_host: None,
            mirror_root: PathBuf::from("mirror"),
            screening_criteria: "exists(CHI)".to_string(),
            target_criteria: "exists(CHI)".to_string(),
            focus: DEFAULT_FOCUS.to_string(),
            parallelism: 4,
            retry: RetryConfig::default(),
            rule_file: None,
            add_participant_id: true,
            participant_id_separator: "/".to_string(),
            index_csv: PathBuf::from("index.csv"),
            cleaned_csv: PathBuf::from("index_clean.csv"),
            change_log_csv: PathBuf::from("index_changes.csv"),
            timeout_secs: 30,
            scan_depth: DEFAULT_SCAN_DEPTH,
        }
    }
}

impl PipelineConfig {
    /// Load, resolve relative paths against the current directory, and
    /// validate. Both criteria must parse; the mirror root is absolute
    /// afterwards.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config: PipelineConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.resolve_paths()?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self) -> Result<(), ConfigError> {
        if self.mirror_root.is_relative() {
            let cwd = std::env::current_dir().map_err(|e| ConfigError::Invalid {
                field: "mirror_root",
                message: e.to_string(),
            })?;
            self.mirror_root = cwd.join(&self.mirror_root);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.screening_expr()?;
        self.target_expr()?;
        if self.collection.is_empty() {
            return Err(ConfigError::Invalid {
                field: "collection",
                message: "must not be empty".to_string(),
            });
        }
        if self.datasets.is_empty() {
            return Err(ConfigError::Invalid {
                field: "datasets",
                message: "at least one dataset is required".to_string(),
            });
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid {
                field: "parallelism",
                message: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }

    pub fn screening_expr(&self) -> Result<FilterExpr, ConfigError> {
        parse_expr(&self.screening_criteria).map_err(|e| ConfigError::Invalid {
            field: "screening_criteria",
            message: e.to_string(),
        })
    }

    pub fn target_expr(&self) -> Result<FilterExpr, ConfigError> {
        parse_expr(&self.target_criteria).map_err(|e| ConfigError::Invalid {
            field: "target_criteria",
            message: e.to_string(),
        })
    }
}

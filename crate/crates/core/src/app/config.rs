use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AppError;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
/// Overrides `listen` from the config file.
pub const LISTEN_ENV: &str = "LAYOUT_WORKBENCH_LISTEN";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    /// Manifest whose ids `POST /sessions` accepts.
    pub corpus: Option<PathBuf>,
    /// Encoder checkpoint; its pooled embedding is attached to requests.
    pub checkpoint: Option<PathBuf>,
    /// Corruption classifier used for FID in `/metrics/compare`.
    pub classifier: Option<PathBuf>,
    /// Sessions are written here on shutdown and read back on start.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.to_string(),
            corpus: None,
            checkpoint: None,
            classifier: None,
            snapshot_dir: None,
        }
    }
}

impl ServiceConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, AppError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))
        }
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus, &mut cfg.checkpoint, &mut cfg.classifier, &mut cfg.snapshot_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Applies the listen-address environment override.
    pub fn with_env(mut self) -> Self {
        if let Ok(addr) = std::env::var(LISTEN_ENV) {
            if !addr.trim().is_empty() {
                self.listen = addr.trim().to_string();
            }
        }
        self
    }
}

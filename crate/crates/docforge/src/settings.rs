//! Engine configuration from TOML or JSON files.

use std::path::{Path, PathBuf};

use docforge_core::config::ConfigError;
use docforge_core::EngineConfig;

pub const CONFIG_ENV: &str = "DOCFORGE_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum SettingsError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(#[from] ConfigError),
}

/// Parses a config file; `.json` files are JSON, anything else TOML.
/// Missing fields take their defaults.
pub fn read_config(path: &Path) -> Result<EngineConfig, SettingsError> {
    let text = std::fs::read_to_string(path).map_err(|source| SettingsError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|message| SettingsError::Parse {
        path: path.to_path_buf(),
        message,
    })
}

/// The file to read: an explicit path, else `DOCFORGE_CONFIG`, else none.
pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn load_config(explicit: Option<&Path>) -> Result<EngineConfig, SettingsError> {
    match config_path(explicit) {
        Some(path) => read_config(&path),
        None => Ok(EngineConfig::default()),
    }
}

pub fn render_toml(config: &EngineConfig) -> String {
    toml::to_string_pretty(config).expect("config serializes")
}

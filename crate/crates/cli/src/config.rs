//! Flat key-value configuration: a text file of `key = value` lines plus
//! command-line overrides, validated against the keys each command accepts.

use std::collections::BTreeMap;
use std::path::Path;

/// Effective configuration of one command invocation. Keys are kept as
/// strings so the manifest can echo exactly what was run.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "{}:{}: expected 'key = value'",
                    path.display(),
                    lineno + 1
                )));
            };
            cfg.values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                return Err(ConfigError(format!("--set needs key=value, got '{o}'")));
            };
            self.set(k.trim(), v.trim().to_string());
        }
        Ok(())
    }

    /// Rejects keys the command does not understand.
    pub fn validate_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for k in self.values.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError(format!(
                    "unknown key '{k}' (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("key '{key}': bad number '{v}': {e}"))),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("key '{key}': bad integer '{v}': {e}"))),
        }
    }

    pub fn get_u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError(format!("key '{key}': bad integer '{v}': {e}"))),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.values
            .get(key)
            .ok_or_else(|| ConfigError(format!("missing required key '{key}'")))?
            .parse()
            .map_err(|e| ConfigError(format!("key '{key}': {e}")))
    }
}

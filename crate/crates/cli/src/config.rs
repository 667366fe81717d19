//! Flat key-value configuration with dotted sections. Lines look like
//! `params.M = 2`; `#` starts a comment. Every key must belong to the
//! whitelist of the experiment being run, and values are parsed strictly;
//! both failure modes name the offending key.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    raw: Vec<u8>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError(format!("line {}: empty key", lineno + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(ConfigError(format!("duplicate key `{key}`")));
            }
        }
        Ok(Config {
            values,
            raw: text.as_bytes().to_vec(),
        })
    }

    pub fn raw_bytes(&self) -> &[u8] {
        &self.raw
    }

    /// Reject keys outside the whitelist, naming the first offender.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for key in self.values.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError(format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not a number"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not an integer"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not an integer"))),
        }
    }

    pub fn require_usize(&self, key: &str) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Err(ConfigError(format!("missing required key `{key}`"))),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("{key}: `{v}` is not an integer"))),
        }
    }

    /// Comma-separated list of floats; an explicitly present but empty list
    /// is an error naming the key.
    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => {
                let items: Vec<&str> = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect();
                if items.is_empty() {
                    return Err(ConfigError(format!("{key}: empty list")));
                }
                items
                    .into_iter()
                    .map(|s| {
                        s.parse()
                            .map_err(|_| ConfigError(format!("{key}: `{s}` is not a number")))
                    })
                    .collect()
            }
        }
    }
}

/// Geometric default time grid `2^-6 .. 2^4` scaled by `1/mu`.
pub fn default_time_grid(mu: f64) -> Vec<f64> {
    let scale = if mu > 0.0 { 1.0 / mu } else { 1.0 };
    (-6..=4).map(|k| 2.0f64.powi(k) * scale).collect()
}

//! Detector thresholds and limits. All values are overridable from the CLI
//! or a `key=value` config file.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("config line {0}: expected key=value")]
    Malformed(usize),
    #[error("config key {key}: invalid value {value:?}")]
    BadValue { key: String, value: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Minimum content similarity for pairing files across a commit.
    pub file_pair_floor: f64,
    /// Minimum slice similarity for `is_move_slice`.
    pub slice_move_floor: f64,
    /// Below this body similarity, a declaration Update is split into
    /// Delete + Insert.
    pub rename_body_floor: f64,
    /// Body-similarity fallback when pairing declarations by signature.
    pub signature_pair_floor: f64,
    /// Minimum body similarity for move rules over Delete/Insert pairs.
    pub move_floor: f64,
    /// Minimum body similarity for extract/inline rules.
    pub extract_floor: f64,
    /// Fixed tree-matcher threshold; when unset, a size-adaptive value
    /// is used (0.4 for small trees, 0.5 for large ones).
    pub match_threshold: Option<f64>,
    /// Minimum subtree height for greedy top-down matching.
    pub min_match_height: usize,
    /// Cap on cross-file candidate pairs per commit.
    pub cross_file_cap: usize,
    /// Files larger than this many bytes are skipped with a diagnostic.
    pub max_file_bytes: usize,
    /// Suffix selecting source files out of a commit.
    pub source_suffix: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            file_pair_floor: 0.6,
            slice_move_floor: 0.8,
            rename_body_floor: 0.5,
            signature_pair_floor: 0.7,
            move_floor: 0.7,
            extract_floor: 0.6,
            match_threshold: None,
            min_match_height: 2,
            cross_file_cap: 10_000,
            max_file_bytes: 1 << 20,
            source_suffix: ".py".to_string(),
        }
    }
}

impl Config {
    /// Matcher threshold for a candidate container pair, clamped to
    /// [0.3, 0.6] when overridden.
    pub fn adaptive_threshold(&self, before_size: usize, after_size: usize) -> f64 {
        if let Some(t) = self.match_threshold {
            return t.clamp(0.3, 0.6);
        }
        if before_size.min(after_size) < 100 {
            0.4
        } else {
            0.5
        }
    }

    pub fn load_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        let mut cfg = Config::default();
        cfg.apply_str(&text)?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Malformed(i + 1))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        for (key, value) in entries {
            self.set(&key, &value)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "file_pair_floor" => self.file_pair_floor = value.parse().map_err(|_| bad())?,
            "slice_move_floor" => self.slice_move_floor = value.parse().map_err(|_| bad())?,
            "rename_body_floor" => self.rename_body_floor = value.parse().map_err(|_| bad())?,
            "signature_pair_floor" => {
                self.signature_pair_floor = value.parse().map_err(|_| bad())?
            }
            "move_floor" => self.move_floor = value.parse().map_err(|_| bad())?,
            "extract_floor" => self.extract_floor = value.parse().map_err(|_| bad())?,
            "match_threshold" => self.match_threshold = Some(value.parse().map_err(|_| bad())?),
            "min_match_height" => self.min_match_height = value.parse().map_err(|_| bad())?,
            "cross_file_cap" => self.cross_file_cap = value.parse().map_err(|_| bad())?,
            "max_file_bytes" => self.max_file_bytes = value.parse().map_err(|_| bad())?,
            "source_suffix" => self.source_suffix = value.to_string(),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_threshold_size_buckets() {
        let cfg = Config::default();
        assert_eq!(cfg.adaptive_threshold(50, 80), 0.4);
        assert_eq!(cfg.adaptive_threshold(500, 700), 0.5);
        assert_eq!(cfg.adaptive_threshold(99, 5000), 0.4);
    }

    #[test]
    fn fixed_threshold_overrides_sizes() {
        let cfg = Config {
            match_threshold: Some(0.55),
            ..Config::default()
        };
        assert_eq!(cfg.adaptive_threshold(10, 10), 0.55);
        assert_eq!(cfg.adaptive_threshold(5000, 5000), 0.55);
    }

    #[test]
    fn fixed_threshold_clamped() {
        let cfg = Config {
            match_threshold: Some(0.9),
            ..Config::default()
        };
        assert_eq!(cfg.adaptive_threshold(10, 10), 0.6);
    }

    #[test]
    fn config_file_roundtrip() {
        let mut cfg = Config::default();
        cfg.apply_str("# thresholds\nextract_floor = 0.7\nmove_floor=0.8\n")
            .unwrap();
        assert_eq!(cfg.extract_floor, 0.7);
        assert_eq!(cfg.move_floor, 0.8);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = Config::default();
        assert!(cfg.apply_str("bogus=1\n").is_err());
    }
}

//! Flat `key = value` detector configuration files.
//!
//! ```text
//! # tighter lateral threshold
//! lat_threshold = 0.8
//! n_points = 30
//! ```
//!
//! Keys are the [`DetectorConfig`] field names. Later assignments win.

use std::path::Path;

use thiserror::Error;

use crate::model::{validate_config, ConfigError, DetectorConfig};

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {message}")]
    Value {
        key: String,
        value: String,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const KEYS: &[&str] = &[
    "n_points",
    "w_m",
    "w_avg",
    "lat_threshold",
    "long_persistence",
    "v_deadband",
    "align_tolerance",
    "smoothing_window",
    "horizon",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigFileError::Value {
        key: key.to_string(),
        value: value.to_string(),
        message: e.to_string(),
    })
}

/// Sets one field by name. Does not validate the result.
pub fn set_key(cfg: &mut DetectorConfig, key: &str, value: &str) -> Result<(), ConfigFileError> {
    let value = value.trim();
    match key.trim() {
        "n_points" => cfg.n_points = parse(key, value)?,
        "w_m" => cfg.w_m = parse(key, value)?,
        "w_avg" => cfg.w_avg = parse(key, value)?,
        "lat_threshold" => cfg.lat_threshold = parse(key, value)?,
        "long_persistence" => cfg.long_persistence = parse(key, value)?,
        "v_deadband" => cfg.v_deadband = parse(key, value)?,
        "align_tolerance" => cfg.align_tolerance = parse(key, value)?,
        "smoothing_window" => cfg.smoothing_window = parse(key, value)?,
        "horizon" => cfg.horizon = parse(key, value)?,
        other => return Err(ConfigFileError::UnknownKey(other.to_string())),
    }
    Ok(())
}

/// Applies the assignments in `text` on top of `base` and validates.
pub fn apply_config_text(
    base: DetectorConfig,
    text: &str,
) -> Result<DetectorConfig, ConfigFileError> {
    let mut cfg = base;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigFileError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
        set_key(&mut cfg, key, value).map_err(|e| ConfigFileError::Syntax {
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(validate_config(cfg)?)
}

pub fn load_config(base: DetectorConfig, path: &Path) -> Result<DetectorConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    apply_config_text(base, &text)
}

/// Renders a config in the file format, one key per line.
pub fn render_config(cfg: &DetectorConfig) -> String {
    let values = [
        cfg.n_points.to_string(),
        cfg.w_m.to_string(),
        cfg.w_avg.to_string(),
        cfg.lat_threshold.to_string(),
        cfg.long_persistence.to_string(),
        cfg.v_deadband.to_string(),
        cfg.align_tolerance.to_string(),
        cfg.smoothing_window.to_string(),
        cfg.horizon.to_string(),
    ];
    KEYS.iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

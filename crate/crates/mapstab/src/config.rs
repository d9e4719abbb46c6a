//! Evaluation configuration: defaults, validation, and a minimal
//! `key = value` config-file format with CLI-override semantics
//! (defaults < file < flags).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PerceptionRange;

/// How mean lateral deviation d maps to a localization score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LocMap {
    /// `clamp(1 − d/β, 0, 1)`: hits zero exactly at d = β.
    #[default]
    Linear,
    /// `exp(−2·ln2·d/β)`: same half-way point (0.5 at d = β/2), never zero.
    Exp,
}

impl std::str::FromStr for LocMap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(LocMap::Linear),
            "exp" => Ok(LocMap::Exp),
            other => Err(format!("unknown loc_map '{other}' (expected linear or exp)")),
        }
    }
}

/// All knobs of one evaluation run. Echoed verbatim into reports so a result
/// is reproducible from the report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Temporal window: each anchor frame pairs with one drawn from the next
    /// `m` frames.
    pub m: u32,
    /// Resample count per aligned polyline; doubles as the Chamfer
    /// densification resolution so there is a single resolution knob.
    pub n_samples: usize,
    /// Confidence threshold separating "detected" from "missed" for the
    /// presence sub-metric.
    pub tau: f64,
    /// Mean lateral deviation (meters) at which localization stability
    /// reaches zero under the linear map.
    pub beta: f64,
    /// Weight of localization vs shape inside the combined score.
    pub omega: f64,
    /// Maximum Chamfer cost (meters) for a prediction↔GT frame match.
    pub match_gate: f64,
    pub range: PerceptionRange,
    /// Base seed for pair sampling (scene streams derive from it).
    pub seed: u64,
    pub loc_map: LocMap,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            m: 2,
            n_samples: 100,
            tau: 0.3,
            beta: 15.0,
            omega: 0.7,
            match_gate: 5.0,
            range: PerceptionRange::standard(),
            seed: 0,
            loc_map: LocMap::Linear,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: bad value for '{key}': {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m < 1 {
            return Err(ConfigError::Invalid("m must be >= 1".into()));
        }
        if self.n_samples < 2 {
            return Err(ConfigError::Invalid("n_samples must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::Invalid("tau must be in [0, 1]".into()));
        }
        if !(self.beta > 0.0) {
            return Err(ConfigError::Invalid("beta must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(ConfigError::Invalid("omega must be in [0, 1]".into()));
        }
        if !(self.match_gate > 0.0) {
            return Err(ConfigError::Invalid("match_gate must be > 0".into()));
        }
        PerceptionRange::new(
            self.range.x_min,
            self.range.x_max,
            self.range.y_min,
            self.range.y_max,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Applies a `key = value` config file on top of `self`. Blank lines and
    /// `#` comments are skipped; unknown keys and bad values are errors with
    /// their line number. Call [`EvalConfig::validate`] after all layers are
    /// applied.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: trimmed.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: String| ConfigError::BadValue {
                line,
                key: key.to_string(),
                msg,
            };
            match key {
                "m" => self.m = value.parse().map_err(|e| bad(format!("{e}")))?,
                "n_samples" => self.n_samples = value.parse().map_err(|e| bad(format!("{e}")))?,
                "tau" => self.tau = value.parse().map_err(|e| bad(format!("{e}")))?,
                "beta" => self.beta = value.parse().map_err(|e| bad(format!("{e}")))?,
                "omega" => self.omega = value.parse().map_err(|e| bad(format!("{e}")))?,
                "match_gate" => self.match_gate = value.parse().map_err(|e| bad(format!("{e}")))?,
                "seed" => self.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
                "loc_map" => self.loc_map = value.parse().map_err(bad)?,
                "x_min" => self.range.x_min = value.parse().map_err(|e| bad(format!("{e}")))?,
                "x_max" => self.range.x_max = value.parse().map_err(|e| bad(format!("{e}")))?,
                "y_min" => self.range.y_min = value.parse().map_err(|e| bad(format!("{e}")))?,
                "y_max" => self.range.y_max = value.parse().map_err(|e| bad(format!("{e}")))?,
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.to_string(),
                    })
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EvalConfig::default().validate().unwrap();
    }

    #[test]
    fn file_overrides_and_reports_errors_with_lines() {
        let mut config = EvalConfig::default();
        config
            .apply_file("# comment\n\nm = 5\ntau = 0.5\nloc_map = exp\nx_min = -20\n")
            .unwrap();
        assert_eq!(config.m, 5);
        assert_eq!(config.tau, 0.5);
        assert_eq!(config.loc_map, LocMap::Exp);
        assert_eq!(config.range.x_min, -20.0);
        config.validate().unwrap();

        let err = config.apply_file("m = 3\nwat = 1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "wat".into()
            }
        );
        let err = config.apply_file("tau = not-a-number").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { line: 1, .. }));
        let err = config.apply_file("just words").unwrap_err();
        assert!(matches!(err, ConfigError::Malformed { line: 1, .. }));
    }

    #[test]
    fn validation_catches_out_of_range_knobs() {
        for (key, value) in [
            ("m", "0"),
            ("n_samples", "1"),
            ("tau", "1.5"),
            ("beta", "0"),
            ("omega", "-0.1"),
            ("match_gate", "0"),
            ("x_min", "99"),
        ] {
            let mut config = EvalConfig::default();
            config.apply_file(&format!("{key} = {value}")).unwrap();
            assert!(config.validate().is_err(), "{key} = {value} should fail");
        }
    }
}

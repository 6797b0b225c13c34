//! Scenario configuration.
//!
//! A flat key-value document (TOML, or JSON when the text starts with `{`).
//! Absent keys take the reference-terminal defaults: a 1040 m quay, 8 quay cranes,
//! 12 yard cranes and 45 internal trucks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::Deserialize;
use thiserror::Error;

use crate::cranes::ServiceParams;
use crate::model::{QuayLayout, VesselCall};
use crate::time::{from_f64_decimal, int, parse_decimal, Rational};

pub const EPOCH_FORMAT: &str = "%Y-%m-%d %H:%M";
pub const DEFAULT_EPOCH: &str = "2014-03-03 00:00";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServiceMode {
    /// Closed-form crane throughput with crane re-splits at berth events.
    #[default]
    Aggregate,
    /// Per-container event chains through quay cranes, trucks and yard cranes.
    Detailed,
    /// Recorded operation spans replayed through the berth allocator.
    Recorded,
}

impl FromStr for ServiceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "aggregate" => Ok(ServiceMode::Aggregate),
            "detailed" => Ok(ServiceMode::Detailed),
            "recorded" => Ok(ServiceMode::Recorded),
            other => Err(format!(
                "unknown mode `{other}` (expected Aggregate, Detailed or Recorded)"
            )),
        }
    }
}

impl fmt::Display for ServiceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceMode::Aggregate => "Aggregate",
            ServiceMode::Detailed => "Detailed",
            ServiceMode::Recorded => "Recorded",
        })
    }
}

/// Calibration loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Mape,
    TotalAbsoluteError,
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mape" => Ok(LossKind::Mape),
            "total_abs" | "total_absolute_error" => Ok(LossKind::TotalAbsoluteError),
            other => Err(format!(
                "unknown loss `{other}` (expected mape or total_abs)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub quay_length_m: u32,
    pub quay_cranes: u32,
    pub yard_cranes: u32,
    pub trucks: u32,
    /// Landside equipment listed for the terminal but not on the service path.
    pub top_lift_trucks: u32,
    pub empty_handlers: u32,
    pub mobile_cranes: u32,
    pub params: ServiceParams,
    pub epoch: NaiveDateTime,
    pub mode: ServiceMode,
    pub seed: u64,
    /// Draw exponential service times (detailed mode) from the seeded generator.
    pub stochastic: bool,
    pub allow_overtake: bool,
    pub resplit_per_move: bool,
    pub loss: LossKind,
    pub horizon_min: Option<i64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            quay_length_m: 1040,
            quay_cranes: 8,
            yard_cranes: 12,
            trucks: 45,
            top_lift_trucks: 16,
            empty_handlers: 5,
            mobile_cranes: 1,
            params: ServiceParams::default(),
            epoch: NaiveDateTime::parse_from_str(DEFAULT_EPOCH, EPOCH_FORMAT)
                .expect("default epoch parses"),
            mode: ServiceMode::Aggregate,
            seed: 0,
            stochastic: false,
            allow_overtake: false,
            resplit_per_move: false,
            loss: LossKind::Mape,
            horizon_min: None,
        }
    }
}

impl ScenarioConfig {
    pub fn quay(&self) -> QuayLayout {
        QuayLayout {
            length_m: self.quay_length_m,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [
            ("quay_length_m", self.quay_length_m),
            ("quay_cranes", self.quay_cranes),
            ("yard_cranes", self.yard_cranes),
            ("trucks", self.trucks),
        ] {
            if v == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        self.params
            .validate()
            .map_err(|e| invalid(e.field, e.reason))
    }

    /// The quay has to be longer than every vessel in the ship file.
    pub fn check_vessels(&self, vessels: &[VesselCall]) -> Result<(), ConfigError> {
        match vessels.iter().max_by_key(|v| v.length_m) {
            Some(v) if v.length_m >= self.quay_length_m => Err(invalid(
                "quay_length_m",
                format!(
                    "{} m quay cannot take vessel {} ({} m)",
                    self.quay_length_m, v.id, v.length_m
                ),
            )),
            _ => Ok(()),
        }
    }

    /// Applies one `key = value` override, e.g. from a CLI flag.
    pub fn set(&mut self, key: &str, value: &Scalar) -> Result<(), ConfigError> {
        let p = &mut self.params;
        match key {
            "quay_length_m" => self.quay_length_m = value.as_u32(key)?,
            "quay_cranes" => self.quay_cranes = value.as_u32(key)?,
            "yard_cranes" => self.yard_cranes = value.as_u32(key)?,
            "trucks" => self.trucks = value.as_u32(key)?,
            "top_lift_trucks" => self.top_lift_trucks = value.as_u32(key)?,
            "empty_handlers" => self.empty_handlers = value.as_u32(key)?,
            "mobile_cranes" => self.mobile_cranes = value.as_u32(key)?,
            "crane_rate_moves_per_min" => p.crane_rate_moves_per_min = value.as_rational(key)?,
            "interference_alpha" => p.interference_alpha = value.as_rational(key)?,
            "max_cranes_per_vessel" => p.max_cranes_per_vessel = value.as_u32(key)?,
            "moves_per_crane_threshold" => p.moves_per_crane_threshold = value.as_u32(key)?,
            "truck_cycle_min" => p.truck_cycle_min = value.as_rational(key)?,
            "yard_crane_service_min" => p.yard_crane_service_min = value.as_rational(key)?,
            "epoch" => {
                let text = value.as_text(key)?;
                self.epoch = NaiveDateTime::parse_from_str(text.trim(), EPOCH_FORMAT)
                    .map_err(|e| invalid(key, format!("{e} (expected YYYY-MM-DD HH:MM)")))?;
            }
            "mode" => self.mode = value.as_text(key)?.parse().map_err(|e| invalid(key, e))?,
            "loss" => self.loss = value.as_text(key)?.parse().map_err(|e| invalid(key, e))?,
            "seed" => {
                self.seed = u64::try_from(value.as_i64(key)?)
                    .map_err(|_| invalid(key, "must be non-negative"))?
            }
            "stochastic" => self.stochastic = value.as_bool(key)?,
            "allow_overtake" => self.allow_overtake = value.as_bool(key)?,
            "resplit_per_move" => self.resplit_per_move = value.as_bool(key)?,
            "horizon_min" => self.horizon_min = Some(value.as_i64(key)?),
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }
}

/// A scalar config value as written in the document.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Scalar {
    pub fn as_i64(&self, key: &str) -> Result<i64, ConfigError> {
        match self {
            Scalar::Int(i) => Ok(*i),
            Scalar::Text(t) => t
                .trim()
                .parse()
                .map_err(|_| invalid(key, "expected an integer")),
            _ => Err(invalid(key, "expected an integer")),
        }
    }

    pub fn as_u32(&self, key: &str) -> Result<u32, ConfigError> {
        u32::try_from(self.as_i64(key)?).map_err(|_| invalid(key, "must be a non-negative integer"))
    }

    pub fn as_rational(&self, key: &str) -> Result<Rational, ConfigError> {
        match self {
            Scalar::Int(i) => Ok(int(*i)),
            Scalar::Float(f) => {
                from_f64_decimal(*f).ok_or_else(|| invalid(key, "not a finite number"))
            }
            Scalar::Text(t) => parse_decimal(t).ok_or_else(|| invalid(key, "expected a number")),
            Scalar::Bool(_) => Err(invalid(key, "expected a number")),
        }
    }

    pub fn as_bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self {
            Scalar::Bool(b) => Ok(*b),
            Scalar::Text(t) => t
                .trim()
                .parse()
                .map_err(|_| invalid(key, "expected true or false")),
            _ => Err(invalid(key, "expected true or false")),
        }
    }

    pub fn as_text(&self, key: &str) -> Result<String, ConfigError> {
        match self {
            Scalar::Text(t) => Ok(t.clone()),
            _ => Err(invalid(key, "expected a string")),
        }
    }
}

pub const KNOWN_KEYS: [&str; 22] = [
    "quay_length_m",
    "quay_cranes",
    "yard_cranes",
    "trucks",
    "top_lift_trucks",
    "empty_handlers",
    "mobile_cranes",
    "crane_rate_moves_per_min",
    "interference_alpha",
    "max_cranes_per_vessel",
    "moves_per_crane_threshold",
    "truck_cycle_min",
    "yard_crane_service_min",
    "epoch",
    "mode",
    "seed",
    "stochastic",
    "allow_overtake",
    "resplit_per_move",
    "loss",
    "horizon_min",
    // accepted so a config may carry a note without tripping strict mode
    "description",
];

pub fn parse_document(text: &str) -> Result<BTreeMap<String, Scalar>, ConfigError> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// Parses a config document. Unknown keys are an error under `strict` and
/// ignored otherwise.
pub fn parse_config(text: &str, strict: bool) -> Result<ScenarioConfig, ConfigError> {
    let doc = parse_document(text)?;
    let mut config = ScenarioConfig::default();
    for (key, value) in &doc {
        if key == "description" {
            continue;
        }
        match config.set(key, value) {
            Err(ConfigError::UnknownKey(_)) if !strict => {}
            other => other?,
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, strict: bool) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, strict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::ratio;

    #[test]
    fn empty_document_gives_reference_defaults() {
        let c = parse_config("", true).unwrap();
        assert_eq!(c.quay_length_m, 1040);
        assert_eq!((c.quay_cranes, c.yard_cranes, c.trucks), (8, 12, 45));
        assert_eq!(
            (c.top_lift_trucks, c.empty_handlers, c.mobile_cranes),
            (16, 5, 1)
        );
        assert_eq!(c.mode, ServiceMode::Aggregate);
        assert_eq!(c.epoch.to_string(), "2014-03-03 00:00:00");
    }

    #[test]
    fn zero_quay_cranes_is_invalid() {
        let err = parse_config(r#"{"quay_cranes": 0}"#, true).unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { ref key, .. } if key == "quay_cranes"));
        let err = parse_config("quay_cranes = 0", true).unwrap_err();
        assert!(matches!(err, ConfigError::InvalidValue { .. }));
    }

    #[test]
    fn mode_selection_still_validates_pools() {
        let c = parse_config(r#"{"mode": "Aggregate"}"#, true).unwrap();
        assert_eq!(c.mode, ServiceMode::Aggregate);
        assert!(parse_config(r#"{"mode": "Aggregate", "trucks": 0}"#, true).is_err());
        let c = parse_config("mode = \"detailed\"", true).unwrap();
        assert_eq!(c.mode, ServiceMode::Detailed);
    }

    #[test]
    fn unknown_keys_depend_on_strictness() {
        assert!(matches!(
            parse_config("berth_slots = 3", true),
            Err(ConfigError::UnknownKey(k)) if k == "berth_slots"
        ));
        assert!(parse_config("berth_slots = 3", false).is_ok());
    }

    #[test]
    fn rationals_are_exact() {
        let c = parse_config(
            "crane_rate_moves_per_min = 0.35\ninterference_alpha = \"17/20\"\ntruck_cycle_min = 4",
            true,
        )
        .unwrap();
        assert_eq!(c.params.crane_rate_moves_per_min, ratio(7, 20));
        assert_eq!(c.params.interference_alpha, ratio(17, 20));
        assert_eq!(c.params.truck_cycle_min, int(4));
    }

    #[test]
    fn alpha_above_one_is_rejected() {
        assert!(parse_config("interference_alpha = 1.2", true).is_err());
    }

    #[test]
    fn epoch_and_flags() {
        let c = parse_config(
            "epoch = \"2014-03-01 06:00\"\nseed = 7\nallow_overtake = true\nloss = \"total_abs\"",
            true,
        )
        .unwrap();
        assert_eq!(c.epoch.to_string(), "2014-03-01 06:00:00");
        assert_eq!(c.seed, 7);
        assert!(c.allow_overtake);
        assert_eq!(c.loss, LossKind::TotalAbsoluteError);
        assert!(parse_config("epoch = \"yesterday\"", true).is_err());
    }

    #[test]
    fn quay_must_exceed_longest_vessel() {
        let c = ScenarioConfig::default();
        let ok = VesselCall::new(1, 296, crate::time::SimTime::zero(), vec![]);
        let too_long = VesselCall::new(2, 1040, crate::time::SimTime::zero(), vec![]);
        assert!(c.check_vessels(std::slice::from_ref(&ok)).is_ok());
        assert!(c.check_vessels(&[ok, too_long]).is_err());
    }
}

//! Configuration file (TOML). Every key is optional; missing keys take the
//! defaults shown in `omniteleop.example.toml`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, UnitQuat, Vec3};
use crate::gestures::{GestureConfig, GestureError, GestureId};
use crate::interaction::{CartesianParams, HeightOverride, ScaleVector, SphericalParams};
use crate::plant::{PlantError, PlantParams};
use crate::supervisor::{default_bindings, ModeId, Palette, SupervisorConfig, SupervisorError};

pub const LISTEN_ENV: &str = "OMNITELEOP_LISTEN";
pub const COCKPIT_ENV: &str = "OMNITELEOP_COCKPIT_LISTEN";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("session: {0}")]
    Session(String),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("gestures: {0}")]
    Gesture(#[from] GestureError),
    #[error(transparent)]
    Supervisor(#[from] SupervisorError),
    #[error("binding refers to unknown gesture `{0}`")]
    UnknownGesture(GestureId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    /// Control loop rate, Hz.
    pub tick_rate: f64,
    /// Transport delay applied to operator frames, seconds.
    pub latency: f64,
    /// Frames older than this (after the delay) are stale; the last command is held.
    pub gap_limit: f64,
    /// Stop after this much session time, seconds. Unlimited when absent.
    pub max_duration: Option<f64>,
    pub record_path: Option<PathBuf>,
    /// Seed for randomized scenario inputs.
    pub seed: u64,
    pub initial_pose: Pose,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_rate: 100.0,
            latency: 0.4,
            gap_limit: 1.0,
            max_duration: None,
            record_path: None,
            seed: 0,
            initial_pose: Pose::new(Vec3::new(1.0, 0.0, 1.4), UnitQuat::IDENTITY),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Session(m));
        if !(self.tick_rate > 0.0) || !self.tick_rate.is_finite() {
            return fail(format!("tick_rate must be positive, got {}", self.tick_rate));
        }
        if !(self.latency >= 0.0) || !self.latency.is_finite() {
            return fail(format!("latency must be >= 0, got {}", self.latency));
        }
        if !(self.gap_limit > 0.0) {
            return fail(format!("gap_limit must be positive, got {}", self.gap_limit));
        }
        if let Some(d) = self.max_duration {
            if !(d >= 0.0) {
                return fail(format!("max_duration must be >= 0, got {d}"));
            }
        }
        if !self.initial_pose.position.is_finite() {
            return fail("initial_pose position must be finite".into());
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperationParams {
    pub k: ScaleVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewayConfig {
    /// Datagram endpoint for operator frames.
    pub listen: String,
    /// Stream endpoint for cockpit subscribers.
    pub cockpit_listen: String,
    /// Messages buffered per subscriber before it is dropped.
    pub subscriber_buffer: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { listen: "0.0.0.0:9870".into(), cockpit_listen: "127.0.0.1:9871".into(), subscriber_buffer: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub session: SessionConfig,
    pub plant: PlantParams,
    pub operation: OperationParams,
    pub spherical: SphericalParams,
    pub cartesian: CartesianParams,
    pub height: HeightOverride,
    pub gestures: GestureConfig,
    pub bindings: BTreeMap<GestureId, ModeId>,
    pub feedback: Palette,
    pub gateway: GatewayConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            plant: PlantParams::default(),
            operation: OperationParams::default(),
            spherical: SphericalParams::default(),
            cartesian: CartesianParams::default(),
            height: HeightOverride::default(),
            gestures: GestureConfig::default(),
            bindings: default_bindings(),
            feedback: Palette::default(),
            gateway: GatewayConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.session.validate()?;
        self.plant.validate()?;
        self.gestures.validate()?;
        self.supervisor().validate()?;
        if let Some(g) = self.bindings.keys().find(|g| !self.gestures.patterns.contains_key(*g)) {
            return Err(ConfigError::UnknownGesture(g.clone()));
        }
        Ok(())
    }

    pub fn supervisor(&self) -> SupervisorConfig {
        SupervisorConfig {
            k: self.operation.k,
            spherical: self.spherical,
            cartesian: self.cartesian,
            height: self.height,
            bindings: self.bindings.clone(),
            palette: self.feedback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Config::default().validate().unwrap();
    }

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn default_round_trips_through_toml() {
        let text = Config::default().to_toml_string();
        assert_eq!(Config::from_toml_str(&text).unwrap(), Config::default());
    }

    #[test]
    fn partial_override() {
        let cfg = Config::from_toml_str(
            r#"
            [session]
            latency = 0.3
            [spherical]
            delta_r = 0.02
            [operation]
            k = [0.5, 0.5, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.session.latency, 0.3);
        assert_eq!(cfg.session.tick_rate, 100.0);
        assert_eq!(cfg.spherical.delta_r, 0.02);
        assert_eq!(cfg.spherical.d_max, 0.45);
        assert_eq!(cfg.operation.k.get(), Vec3::new(0.5, 0.5, 1.0));
    }

    #[test]
    fn rejects_invalid_values() {
        for bad in [
            "[session]\nlatency = -1.0",
            "[session]\ntick_rate = 0.0",
            "[plant]\nt_q = 0.0",
            "[operation]\nk = [1.5, 0.0, 0.0]",
            "[spherical]\nd_min = 0.6",
            "[cartesian]\ndelta_d = 0.0",
            "[gestures]\nhold_duration = 0.0",
            "[bindings]\nwave = \"Locking\"",
            "[feedback]\nlocking = [0, 170, 0]",
            "[nonsense]\nx = 1",
        ] {
            assert!(Config::from_toml_str(bad).is_err(), "accepted: {bad}");
        }
    }
}

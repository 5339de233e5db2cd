//! Scenario configuration: one TOML file whose key tree mirrors the domain
//! types, SI units throughout (lengths in meters, voltages in volts,
//! frequencies in hertz). Each subcommand reads its own block next to the
//! shared `device` and `solver` blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceSpec, ElectrodeKind};
use crate::solver::SolverSettings;

/// Full scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub device: DeviceSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullin: Option<PullInBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pullout: Option<PullOutBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_curve: Option<CvCurveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_sweep: Option<RatioSweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unstick: Option<UnstickBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table1: Option<Table1Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf: Option<RfBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_rf: Option<FitRfBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullInBlock {
    pub electrodes: ElectrodeKind,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullOutBlock {
    pub electrodes: ElectrodeKind,
    /// Charging offset held during the descent (V).
    #[serde(default)]
    pub v_charge_internal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurveBlock {
    pub electrodes: ElectrodeKind,
    pub v_start: f64,
    pub v_stop: f64,
    pub n_points: usize,
}

impl CvCurveBlock {
    pub fn grid(&self) -> Vec<f64> {
        if self.n_points == 0 {
            return vec![];
        }
        if self.n_points == 1 {
            return vec![self.v_start];
        }
        let dv = (self.v_stop - self.v_start) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.v_start + dv * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSweepBlock {
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnstickBlock {
    /// Residual charging offsets to scan (V).
    pub charge_levels: Vec<f64>,
    /// Pull-off adhesion per ohmic contact (N).
    #[serde(default)]
    pub adhesion: f64,
    pub v_ext_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Block {
    /// Contact-detection gap (m); defaults to the device gap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfBlock {
    pub z0: f64,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
    /// Down-state resistance (ohm); when absent it is computed from the
    /// device's down-state contact force through the contact law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_down: Option<f64>,
    #[serde(default)]
    pub l_down: f64,
    pub c_up: f64,
    /// Drive voltage for the mechanical down-state solve when `r_down` is
    /// derived from contact force.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_internal_drive: Option<f64>,
    #[serde(default)]
    pub contact_law: crate::rf::ContactLaw,
}

impl RfBlock {
    pub fn grid(&self) -> Vec<f64> {
        if self.n_points == 0 {
            return vec![];
        }
        if self.n_points == 1 {
            return vec![self.f_start];
        }
        let df = (self.f_stop - self.f_start) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.f_start + df * i as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRfBlock {
    pub isolation_db: f64,
    pub isolation_freq: f64,
    pub insertion_db: f64,
    pub insertion_freq: f64,
    pub z0: f64,
}

/// Errors from configuration handling.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config is missing the [{0}] block required by this subcommand")]
    MissingBlock(&'static str),
}

impl ScenarioConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Canonical serialized form used for the run manifest and its hash.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// FNV-1a hash of the resolved configuration, recorded in the run manifest.
pub fn config_hash(resolved: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in resolved.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

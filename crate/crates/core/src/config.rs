//! System configuration and its TOML file form.
//!
//! Every key is optional in the file; missing keys take the defaults below.
//! Angles are written in degrees and converted to radians on use.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How the configured SNR maps onto the per-antenna noise power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrReference {
    /// SNR = p_u · β_edge / σn², with β_edge the free-space gain of a UE at
    /// the cell edge on sector boresight.
    CellEdge,
    /// SNR = p_u / σn²; path gains are carried entirely by the channel.
    Transmit,
}

/// Feature used by the real-position baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositionFeatureKind {
    /// 2-D Cartesian position in meters.
    Cartesian,
    /// Unit vector pointing at the UE azimuth.
    Azimuth,
}

/// Pilot draw used by the random baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RandomMode {
    /// Shuffled cyclic list: every pilot used ⌊N/τ⌋ or ⌈N/τ⌉ times.
    Balanced,
    /// Independent uniform pilot per UE.
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_active: usize,
    pub num_sectors: usize,
    pub antennas_per_sector: usize,
    pub num_paths: usize,
    /// Element spacing in wavelengths.
    pub antenna_spacing: f64,
    pub angular_std_deg: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    pub cell_radius: f64,
    pub min_radius: f64,
    /// Transmit symbol power p_u (linear).
    pub tx_power: f64,
    pub snr_db: f64,
    pub snr_reference: SnrReference,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub max_gain_db: f64,
    pub max_attenuation_db: f64,
    pub beamwidth_3db_deg: f64,
    pub chart_dim: usize,
    pub chart_neighbors: usize,
    pub quadrature_points: usize,
    pub position_feature: PositionFeatureKind,
    pub random_mode: RandomMode,
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_users: 512,
            num_active: 64,
            num_sectors: 3,
            antennas_per_sector: 64,
            num_paths: 200,
            antenna_spacing: 0.5,
            angular_std_deg: 15.0,
            wavelength: 0.15,
            cell_radius: 500.0,
            min_radius: 10.0,
            tx_power: 1.0,
            snr_db: 0.0,
            snr_reference: SnrReference::CellEdge,
            pilot_len: 64,
            coherence_len: 200,
            max_gain_db: 0.0,
            max_attenuation_db: 30.0,
            beamwidth_3db_deg: 65.0,
            chart_dim: 2,
            chart_neighbors: 15,
            quadrature_points: 512,
            position_feature: PositionFeatureKind::Azimuth,
            random_mode: RandomMode::Balanced,
            seed: 1,
        }
    }
}

impl SystemConfig {
    /// Reduced-size preset used for CI-speed acceptance runs.
    pub fn desk() -> Self {
        Self {
            num_users: 128,
            num_active: 16,
            antennas_per_sector: 16,
            pilot_len: 16,
            num_paths: 50,
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.num_users < 1 {
            return Err(Error::config("num_users", "must be at least 1"));
        }
        if self.num_active < 1 || self.num_active > self.num_users {
            return Err(Error::config(
                "num_active",
                format!("must lie in 1..={} (num_users)", self.num_users),
            ));
        }
        if self.num_sectors < 1 {
            return Err(Error::config("num_sectors", "must be at least 1"));
        }
        if self.antennas_per_sector < 1 {
            return Err(Error::config("antennas_per_sector", "must be at least 1"));
        }
        if self.num_paths < 1 {
            return Err(Error::config("num_paths", "must be at least 1"));
        }
        if self.pilot_len < 1 || self.pilot_len > self.coherence_len {
            return Err(Error::config(
                "pilot_len",
                format!("must lie in 1..={} (coherence_len)", self.coherence_len),
            ));
        }
        if !positive(self.antenna_spacing) {
            return Err(Error::config("antenna_spacing", "must be positive"));
        }
        if !(self.angular_std_deg.is_finite() && self.angular_std_deg >= 0.0) {
            return Err(Error::config("angular_std_deg", "must be non-negative"));
        }
        if !positive(self.wavelength) {
            return Err(Error::config("wavelength", "must be positive"));
        }
        if !positive(self.tx_power) {
            return Err(Error::config("tx_power", "must be positive"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db", "must be finite"));
        }
        if !positive(self.min_radius) {
            return Err(Error::config("min_radius", "must be positive"));
        }
        if !(self.cell_radius.is_finite() && self.min_radius < self.cell_radius) {
            return Err(Error::config("cell_radius", "must exceed min_radius"));
        }
        if !positive(self.beamwidth_3db_deg) {
            return Err(Error::config("beamwidth_3db_deg", "must be positive"));
        }
        if !(self.max_attenuation_db.is_finite() && self.max_attenuation_db >= 0.0) {
            return Err(Error::config("max_attenuation_db", "must be non-negative"));
        }
        if !self.max_gain_db.is_finite() {
            return Err(Error::config("max_gain_db", "must be finite"));
        }
        if self.quadrature_points < 2 {
            return Err(Error::config("quadrature_points", "must be at least 2"));
        }
        if self.chart_neighbors < 1 || self.chart_neighbors >= self.num_users.max(2) {
            return Err(Error::config(
                "chart_neighbors",
                "must lie in 1..num_users",
            ));
        }
        if self.chart_dim < 1 || self.chart_dim + 2 > self.num_users.max(3) {
            return Err(Error::config("chart_dim", "must lie in 1..=num_users-2"));
        }
        Ok(())
    }

    pub fn angular_std(&self) -> f64 {
        self.angular_std_deg.to_radians()
    }

    pub fn beamwidth_3db(&self) -> f64 {
        self.beamwidth_3db_deg.to_radians()
    }

    /// Total receive dimension M·S.
    pub fn receive_dim(&self) -> usize {
        self.antennas_per_sector * self.num_sectors
    }

    /// Free-space gain of a boresight UE at the cell edge.
    pub fn cell_edge_gain(&self) -> f64 {
        10f64.powf(self.max_gain_db / 10.0) * (self.wavelength / (4.0 * PI * self.cell_radius)).powi(2)
    }

    /// Per-antenna noise power σn² implied by `snr_db` and `snr_reference`.
    pub fn noise_power(&self) -> f64 {
        let snr = 10f64.powf(self.snr_db / 10.0);
        match self.snr_reference {
            SnrReference::CellEdge => self.tx_power * self.cell_edge_gain() / snr,
            SnrReference::Transmit => self.tx_power / snr,
        }
    }
}

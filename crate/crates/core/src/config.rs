//! System and environment parameters.
//!
//! Every power is stored in watts and every ratio in linear scale. Conversions
//! from dBm/dB happen only at the command-line boundary through the helpers at
//! the bottom of this module.
//!
//! The on-disk format is a flat `key = value` file whose keys are exactly the
//! field names of [`SystemConfig`]. Missing keys take the reference values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// Transmit antennas N_T.
    pub n_tx: usize,
    /// Receive antennas N_R.
    pub n_rx: usize,
    /// Number of RISs K.
    pub n_ris: usize,
    /// Rician factor of the Tx-RIS subchannels (linear).
    pub rician_kappa: f64,
    /// NLoS path count of each Tx-RIS subchannel.
    pub l_t: usize,
    /// Path count of each RIS-Rx subchannel.
    pub l_r: usize,
    /// Noise power in watts.
    pub noise_power: f64,
    /// Total transmit power in watts.
    pub transmit_power: f64,
    /// RIS scale C such that N_S,k * rho_k = C.
    pub c_scale: f64,
    /// Offset of the Tx DFT grid in radians.
    pub dft_offset: f64,
    /// RIS reconfigurations per symbol for the diversity schemes.
    pub m_r: usize,
    pub rng_seed: u64,
    /// Standard deviation of the RIS-Rx angle estimation error, radians of
    /// spatial frequency.
    pub angle_error_std: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_frequency: 3.5e9,
            n_tx: 16,
            n_rx: 4,
            n_ris: 4,
            rician_kappa: 10.0,
            l_t: 2,
            l_r: 10,
            noise_power: dbm_to_watts(-100.0),
            transmit_power: dbm_to_watts(20.0),
            c_scale: 1e-6,
            dft_offset: 0.0,
            m_r: 2,
            rng_seed: 20_230_601,
            angle_error_std: 0.0,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Config(format!(
                "noise_power must be positive, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }

    /// Same as [`validate`](Self::validate) but admits a noiseless link,
    /// which only the BER trials can evaluate.
    pub fn validate_allow_noiseless(&self) -> Result<()> {
        self.validate_structure()?;
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            return Err(Error::Config(format!(
                "noise_power must be non-negative, got {}",
                self.noise_power
            )));
        }
        Ok(())
    }

    fn validate_structure(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_rx == 0 || self.n_tx < self.n_rx {
            return fail(format!(
                "need n_tx >= n_rx >= 1, got n_tx={} n_rx={}",
                self.n_tx, self.n_rx
            ));
        }
        if self.n_ris < self.n_rx {
            return fail(format!(
                "need n_ris >= n_rx, got n_ris={} n_rx={}",
                self.n_ris, self.n_rx
            ));
        }
        if !(self.rician_kappa > 0.0 && self.rician_kappa.is_finite()) {
            return fail(format!("rician_kappa must be positive, got {}", self.rician_kappa));
        }
        if self.l_r == 0 {
            return fail("l_r must be at least 1".into());
        }
        if !(self.c_scale > 0.0 && self.c_scale.is_finite()) {
            return fail(format!("c_scale must be positive, got {}", self.c_scale));
        }
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return fail(format!(
                "carrier_frequency must be positive, got {}",
                self.carrier_frequency
            ));
        }
        if !(self.transmit_power >= 0.0 && self.transmit_power.is_finite()) {
            return fail(format!(
                "transmit_power must be non-negative, got {}",
                self.transmit_power
            ));
        }
        if self.m_r == 0 {
            return fail("m_r must be at least 1".into());
        }
        if !(self.angle_error_std >= 0.0 && self.angle_error_std.is_finite()) {
            return fail(format!(
                "angle_error_std must be non-negative, got {}",
                self.angle_error_std
            ));
        }
        if !self.dft_offset.is_finite() {
            return fail("dft_offset must be finite".into());
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Applies a single `key=value` override. The key must name a field.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let mut table: toml::Table = toml::from_str(&self.to_toml_string())
            .map_err(|e| Error::Config(e.to_string()))?;
        if !table.contains_key(key) {
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        let parsed: toml::Table = toml::from_str(&format!("v = {}", value.trim()))
            .map_err(|_| Error::Config(format!("cannot parse value `{value}` for `{key}`")))?;
        let mut parsed_value = parsed["v"].clone();
        // Allow integers where floats are expected ("noise_power = 1").
        if let (Some(toml::Value::Float(_)), toml::Value::Integer(i)) =
            (table.get(key), &parsed_value)
        {
            parsed_value = toml::Value::Float(*i as f64);
        }
        table.insert(key.to_string(), parsed_value);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("`{key}`: {}", e.message())))?;
        Ok(())
    }

    /// Applies an override written as `key=value`.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.apply_override(key, value)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

//! Fully resolved run configuration, as read from a JSON file and echoed,
//! with its hash, into every output.
//!
//! ```json
//! {
//!   "engine": { "dim": 8192, "n": 4, "seed": 0, "num_pgs": 1, "mode": "exact-sum",
//!               "geometry": { "banks": 32, "subarrays_per_bank": 64 } },
//!   "energy": { "read_pj_per_bit": 0.5, "background_mw": 212.0 }
//! }
//! ```
//!
//! Every key is optional and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cost::{EnergyParams, ParamError};
use crate::engine::{EngineError, HdcrConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error(transparent)]
    Energy(#[from] ParamError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub engine: HdcrConfig,
    pub energy: EnergyParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.energy.validate()?;
        self.engine.validate()?;
        Ok(())
    }

    /// Canonical compact JSON; field order is fixed by the struct layout.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical_json().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::BundlingMode;

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"engine": {"num_pgs": 2, "geometry": {"banks": 4}}}"#).unwrap();
        assert_eq!(c.engine.num_pgs, 2);
        assert_eq!(c.engine.dim, 8192);
        assert_eq!(c.engine.geometry.banks, 4);
        assert_eq!(c.engine.geometry.tracks_per_dbc, 512);
        assert_eq!(c.energy, EnergyParams::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"engin": {}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"energy": {"read_pj": 1}}"#).is_err());
    }

    #[test]
    fn negative_energy_fails_validation() {
        let c: RunConfig = serde_json::from_str(r#"{"energy": {"shift_pj_per_bit": -0.3}}"#).unwrap();
        assert!(matches!(c.validate(), Err(ConfigError::Energy(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.engine.mode = BundlingMode::Preset;
        assert_ne!(a.hash(), b.hash());
        let back: RunConfig = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }
}

//! Problem configuration and its TOML file format.
//!
//! The file is flat key/value TOML with three optional tables:
//!
//! ```toml
//! theta1 = 10.0            # absorber total cross section, 1/cm
//! theta2 = 0.75            # down-scattering ratio in the scatterer
//! block_size = 1.0         # cm
//! cells_per_block = 3
//! n_groups = 2
//! source_strength = 1.0    # particles / (cm^3 s), isotropic
//! source_group = 0
//! # Block layout, rows listed top (largest y) to bottom.
//! # 0 = scatterer, 1 = absorber, 2 = source
//! layout = [
//!   [0, 0, 0, 0, 0, 0, 0],
//!   ...
//! ]
//!
//! [quadrature]
//! n_polar = 4              # polar levels per hemisphere
//! n_azimuthal = 16         # multiple of 4
//!
//! [gmres]
//! tol = 1e-8
//! restart = 30
//! maxiter = 1000
//!
//! [sampling]
//! seed = 2024
//! ```
//!
//! Unknown keys are reported as warnings and otherwise ignored.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::xs::{MATERIAL_COUNT, SOURCE};

/// Parameter box of the reference checkerboard problem.
pub const THETA1_RANGE: (f64, f64) = (7.5, 12.5);
pub const THETA2_RANGE: (f64, f64) = (0.5, 1.0);

/// Checkerboard layout, rows top to bottom: eleven absorbers around a central source.
pub const CHECKERBOARD_LAYOUT: [[usize; 7]; 7] = [
    [0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, 1, 0, 0],
    [0, 1, 0, 2, 0, 1, 0],
    [0, 0, 1, 0, 1, 0, 0],
    [0, 1, 0, 1, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub n_polar: usize,
    pub n_azimuthal: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            n_polar: 4,
            n_azimuthal: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresConfig {
    pub tol: f64,
    pub restart: usize,
    pub maxiter: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restart: 30,
            maxiter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { seed: 2024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemConfig {
    pub theta1: f64,
    pub theta2: f64,
    pub block_size: f64,
    pub cells_per_block: usize,
    pub n_groups: usize,
    pub source_strength: f64,
    pub source_group: usize,
    pub layout: Vec<Vec<usize>>,
    pub quadrature: QuadratureConfig,
    pub gmres: GmresConfig,
    pub sampling: SamplingConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            theta1: 10.0,
            theta2: 0.75,
            block_size: 1.0,
            cells_per_block: 3,
            n_groups: 2,
            source_strength: 1.0,
            source_group: 0,
            layout: CHECKERBOARD_LAYOUT.iter().map(|r| r.to_vec()).collect(),
            quadrature: QuadratureConfig::default(),
            gmres: GmresConfig::default(),
            sampling: SamplingConfig::default(),
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "theta1",
    "theta2",
    "block_size",
    "cells_per_block",
    "n_groups",
    "source_strength",
    "source_group",
    "layout",
    "quadrature",
    "gmres",
    "sampling",
];
const QUADRATURE_KEYS: &[&str] = &["n_polar", "n_azimuthal"];
const GMRES_KEYS: &[&str] = &["tol", "restart", "maxiter"];
const SAMPLING_KEYS: &[&str] = &["seed"];

impl ProblemConfig {
    /// Parse TOML text. Returns the config and one warning per unknown key.
    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<String>)> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut warnings = Vec::new();
        for (key, value) in &table {
            if !TOP_KEYS.contains(&key.as_str()) {
                warnings.push(format!("unknown key `{key}` ignored"));
                continue;
            }
            let known = match key.as_str() {
                "quadrature" => QUADRATURE_KEYS,
                "gmres" => GMRES_KEYS,
                "sampling" => SAMPLING_KEYS,
                _ => continue,
            };
            if let Some(sub) = value.as_table() {
                for k in sub.keys() {
                    if !known.contains(&k.as_str()) {
                        warnings.push(format!("unknown key `{key}.{k}` ignored"));
                    }
                }
            }
        }
        let config: ProblemConfig =
            toml::from_str(text).map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok((config, warnings))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::Config(format!("`{key}`: {msg}")));
        if !self.theta1.is_finite() || self.theta1 <= 0.0 {
            return bad("theta1", "must be a positive number");
        }
        if !(0.0..=1.0).contains(&self.theta2) {
            return bad("theta2", "must lie in [0, 1]");
        }
        if !self.block_size.is_finite() || self.block_size <= 0.0 {
            return bad("block_size", "must be positive");
        }
        if self.cells_per_block == 0 {
            return bad("cells_per_block", "must be at least 1");
        }
        if !(1..=2).contains(&self.n_groups) {
            return bad("n_groups", "only 1 or 2 groups are supported");
        }
        if !self.source_strength.is_finite() || self.source_strength < 0.0 {
            return bad("source_strength", "must be finite and non-negative");
        }
        if self.source_group >= self.n_groups {
            return bad("source_group", "must be smaller than n_groups");
        }
        if self.layout.is_empty() || self.layout[0].is_empty() {
            return bad("layout", "must contain at least one block");
        }
        let width = self.layout[0].len();
        for (row, cells) in self.layout.iter().enumerate() {
            if cells.len() != width {
                return bad("layout", &format!("row {row} has {} entries, expected {width}", cells.len()));
            }
            if let Some(m) = cells.iter().find(|&&m| m >= MATERIAL_COUNT) {
                return bad("layout", &format!("row {row} references undefined material {m}"));
            }
        }
        if self.quadrature.n_polar == 0 {
            return bad("quadrature.n_polar", "must be at least 1");
        }
        if self.quadrature.n_azimuthal == 0 || !self.quadrature.n_azimuthal.is_multiple_of(4) {
            return bad("quadrature.n_azimuthal", "must be a positive multiple of 4");
        }
        if !(self.gmres.tol > 0.0) {
            return bad("gmres.tol", "must be positive");
        }
        if self.gmres.restart == 0 || self.gmres.maxiter == 0 {
            return bad("gmres", "restart and maxiter must be at least 1");
        }
        Ok(())
    }

    /// Number of blocks along x and y.
    pub fn blocks(&self) -> (usize, usize) {
        (self.layout[0].len(), self.layout.len())
    }

    pub fn has_source(&self) -> bool {
        self.layout.iter().flatten().any(|&m| m == SOURCE)
    }

    /// Messages for parameters outside the reference box (extrapolation).
    pub fn extrapolation_warnings(&self) -> Vec<String> {
        extrapolation_warnings(self.theta1, self.theta2)
    }

    pub fn with_params(&self, theta1: f64, theta2: f64) -> Self {
        Self {
            theta1,
            theta2,
            ..self.clone()
        }
    }

    /// Hash of everything that shapes the discrete operator except the two parameters.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut canon = String::new();
        let _ = write!(
            canon,
            "block_size={:e};cells_per_block={};n_groups={};source_strength={:e};source_group={};",
            self.block_size, self.cells_per_block, self.n_groups, self.source_strength, self.source_group
        );
        for row in &self.layout {
            for m in row {
                let _ = write!(canon, "{m}");
            }
            canon.push('/');
        }
        let _ = write!(
            canon,
            ";n_polar={};n_azimuthal={};tol={:e};restart={};maxiter={}",
            self.quadrature.n_polar,
            self.quadrature.n_azimuthal,
            self.gmres.tol,
            self.gmres.restart,
            self.gmres.maxiter
        );
        Sha256::digest(canon.as_bytes()).into()
    }

    pub fn fingerprint_hex(&self) -> String {
        hex_string(&self.fingerprint())
    }
}

pub fn extrapolation_warnings(theta1: f64, theta2: f64) -> Vec<String> {
    let mut out = Vec::new();
    if theta1 < THETA1_RANGE.0 || theta1 > THETA1_RANGE.1 {
        out.push(format!(
            "theta1 = {theta1} lies outside [{}, {}]; extrapolating",
            THETA1_RANGE.0, THETA1_RANGE.1
        ));
    }
    if theta2 < THETA2_RANGE.0 || theta2 > THETA2_RANGE.1 {
        out.push(format!(
            "theta2 = {theta2} lies outside [{}, {}]; extrapolating",
            THETA2_RANGE.0, THETA2_RANGE.1
        ));
    }
    out
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ProblemConfig::default();
        let (back, warnings) = ProblemConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(warnings.is_empty());
    }

    #[test]
    fn default_layout_has_eleven_absorbers_and_one_source() {
        let cfg = ProblemConfig::default();
        let flat: Vec<usize> = cfg.layout.iter().flatten().copied().collect();
        assert_eq!(flat.iter().filter(|&&m| m == 1).count(), 11);
        assert_eq!(flat.iter().filter(|&&m| m == 2).count(), 1);
        assert_eq!(cfg.layout[3][3], 2);
    }

    #[test]
    fn unknown_keys_warn() {
        let text = "theta1 = 9.0\ncolour = \"red\"\n[gmres]\ntol = 1e-6\nfoo = 1\n";
        let (cfg, warnings) = ProblemConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.theta1, 9.0);
        assert_eq!(cfg.gmres.tol, 1e-6);
        assert_eq!(warnings.len(), 2);
        assert!(warnings.iter().any(|w| w.contains("colour")));
        assert!(warnings.iter().any(|w| w.contains("gmres.foo")));
    }

    #[test]
    fn malformed_value_names_the_key() {
        let err = ProblemConfig::from_toml_str("cells_per_block = \"three\"\n").unwrap_err();
        assert!(err.to_string().contains("cells_per_block"), "{err}");
        let err = ProblemConfig::from_toml_str("cells_per_block = 0\n").unwrap_err();
        assert!(err.to_string().contains("cells_per_block"), "{err}");
    }

    #[test]
    fn undefined_material_is_rejected() {
        let text = "layout = [[0, 1], [3, 0]]\n";
        let err = ProblemConfig::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("undefined material 3"), "{err}");
    }

    #[test]
    fn fingerprint_ignores_parameters_but_not_mesh() {
        let a = ProblemConfig::default();
        let b = a.with_params(8.0, 0.6);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let mut c = a.clone();
        c.cells_per_block = 2;
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn extrapolation_is_flagged() {
        assert!(extrapolation_warnings(10.0, 0.7).is_empty());
        assert_eq!(extrapolation_warnings(13.0, 0.7).len(), 1);
        assert_eq!(extrapolation_warnings(13.0, 0.2).len(), 2);
    }
}

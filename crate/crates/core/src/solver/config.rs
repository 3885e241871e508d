//! JSON run configuration.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InitialData, SolverError};
use crate::grid::{Boundary, GridError, GridSpec};
use crate::potential::PotentialSpec;

pub const DEFAULT_CFL_SIGMA: f64 = 0.9;
/// Largest supported component count.
pub const MAX_COMPONENTS: usize = 8;

/// Cube grid over `[0, 1]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub size: usize,
    pub boundary: Boundary,
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec, GridError> {
        GridSpec::unit(self.dim, self.size, self.boundary)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `u_t = Δ ∇Φ(u)`.
    #[default]
    Diffusion,
    /// The strongly coupled rewriting of the same system.
    Coupled,
}

fn default_sigma() -> f64 {
    DEFAULT_CFL_SIGMA
}

fn default_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub components: usize,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub model: ModelKind,
    pub t_end: f64,
    #[serde(default = "default_sigma")]
    pub cfl_sigma: f64,
    #[serde(default = "default_every")]
    pub snapshot_every: usize,
    pub initial: InitialData,
    #[serde(default)]
    pub seed: u64,
    /// Per-component Dirichlet values; defaults to the boundary trace of the
    /// initial data family (zero unless an offset is given).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_values: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| SolverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        if !(1..=3).contains(&self.grid.dim) {
            return bad(format!("grid.dim must be 1, 2 or 3, got {}", self.grid.dim));
        }
        if !(1..=MAX_COMPONENTS).contains(&self.components) {
            return bad(format!(
                "components must be in 1..={MAX_COMPONENTS}, got {}",
                self.components
            ));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.cfl_sigma > 0.0 && self.cfl_sigma <= 1.0) {
            return bad(format!(
                "cfl_sigma must lie in (0, 1], got {}",
                self.cfl_sigma
            ));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        let r_max = self.potential.r_max();
        if !(r_max.is_finite() && r_max > 0.0) {
            return bad(format!("potential r_max must be positive, got {r_max}"));
        }
        if let Some(bv) = &self.boundary_values {
            if bv.len() != self.components {
                return bad(format!(
                    "boundary_values has {} entries for {} components",
                    bv.len(),
                    self.components
                ));
            }
            if self.grid.boundary == Boundary::Periodic {
                return bad("boundary_values given for a periodic grid".into());
            }
        }
        self.initial.validate(self.components)
    }

    /// SHA-256 of the canonical (compact, field-ordered) JSON form.
    pub fn hash(&self) -> String {
        content_hash(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"{
            "grid": {"dim": 1, "size": 64, "boundary": "periodic"},
            "components": 2,
            "potential": {"id": "cosh", "r_max": 1.0},
            "t_end": 0.001,
            "initial": {"kind": "fourier_mode", "amplitude": 0.5, "wavenumber": [1]}
        }"#
    }

    #[test]
    fn defaults_are_filled_in() {
        let cfg = RunConfig::from_json(sample()).unwrap();
        assert_eq!(cfg.cfl_sigma, DEFAULT_CFL_SIGMA);
        assert_eq!(cfg.snapshot_every, 1);
        assert_eq!(cfg.model, ModelKind::Diffusion);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_json(sample()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        // round trip through JSON keeps the hash
        let c = RunConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = RunConfig::from_json(sample()).unwrap();
        cfg.cfl_sigma = 1.5;
        assert!(cfg.validate().is_err());
        cfg.cfl_sigma = 0.5;
        cfg.components = 9;
        assert!(cfg.validate().is_err());
        cfg.components = 2;
        cfg.t_end = -1.0;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::from_json(r#"{"grid": 3}"#).is_err());
    }
}

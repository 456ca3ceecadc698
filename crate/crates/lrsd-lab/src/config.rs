//! Run configuration files, overrides and sweep grids.

use std::path::Path;

use lrsd_core::circuits::{CircuitConfig, Model, TStage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    ZBasisMagic,
    XBasisPurification,
    CliffordCluster,
}

impl From<ModelName> for Model {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::ZBasisMagic => Model::ZBasisMagic,
            ModelName::XBasisPurification => Model::XBasisPurification,
            ModelName::CliffordCluster => Model::CliffordCluster,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TStageName {
    #[default]
    PerStep,
    PerQubit,
}

impl From<TStageName> for TStage {
    fn from(t: TStageName) -> Self {
        match t {
            TStageName::PerStep => TStage::PerStep,
            TStageName::PerQubit => TStage::PerQubit,
        }
    }
}

fn default_beta() -> f64 {
    1.0
}

fn default_p_m() -> f64 {
    0.5
}

fn default_n_traj() -> usize {
    1
}

/// A run configuration as read from JSON. Missing optional keys take the
/// model defaults; [`RunConfig::resolved`] makes every value explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_p_m")]
    pub p_m: f64,
    #[serde(default)]
    pub p_xz: Option<f64>,
    #[serde(default)]
    pub t_final: Option<usize>,
    #[serde(default)]
    pub epsilon: f64,
    pub model: ModelName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default)]
    pub t_stage: TStageName,
    #[serde(default)]
    pub full_state: bool,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub final_entropy: bool,
}

impl RunConfig {
    pub fn new(model: ModelName, l: usize) -> Self {
        Self {
            l,
            eta: 0.0,
            beta: default_beta(),
            p_m: default_p_m(),
            p_xz: None,
            t_final: None,
            epsilon: 0.0,
            model,
            seed: 0,
            n_traj: 1,
            t_stage: TStageName::PerStep,
            full_state: false,
            record_every: None,
            final_entropy: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Copy with every defaulted value filled in.
    pub fn resolved(&self) -> Self {
        let c = self.circuit();
        Self {
            p_xz: Some(c.p_xz),
            t_final: Some(c.t_final_steps()),
            record_every: Some(c.record_interval()),
            ..self.clone()
        }
    }

    pub fn circuit(&self) -> CircuitConfig {
        let mut c = CircuitConfig::new(self.model.into(), self.l);
        c.eta = self.eta;
        c.beta = self.beta;
        c.p_m = self.p_m;
        if let Some(p) = self.p_xz {
            c.p_xz = p;
        }
        c.t_final = self.t_final;
        c.epsilon = self.epsilon;
        c.t_stage = self.t_stage.into();
        c.full_state = self.full_state;
        c.seed = self.seed;
        c.n_traj = self.n_traj;
        c.record_every = self.record_every;
        c.final_entropy = self.final_entropy;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(LabError::Config("n_traj must be positive".into()));
        }
        self.circuit().validate().map_err(|e| LabError::Config(e.to_string()))
    }

    /// SHA-256 (hex) of the resolved configuration as compact JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.resolved()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn set(&mut self, key: GridKey, v: f64) -> Result<()> {
        match key {
            GridKey::L => {
                if v.fract() != 0.0 || v < 2.0 {
                    return Err(LabError::Config(format!("L = {v} is not an integer ≥ 2")));
                }
                self.l = v as usize;
                // The default final time follows the new L; an explicit
                // recording interval is kept.
                self.t_final = None;
            }
            GridKey::PM => self.p_m = v,
            GridKey::Eta => self.eta = v,
            GridKey::Beta => self.beta = v,
            GridKey::PXz => self.p_xz = Some(v),
            GridKey::Epsilon => self.epsilon = v,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridKey {
    #[serde(rename = "L")]
    L,
    #[serde(rename = "p_m")]
    PM,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "p_xz")]
    PXz,
    #[serde(rename = "epsilon")]
    Epsilon,
}

impl GridKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GridKey::L => "L",
            GridKey::PM => "p_m",
            GridKey::Eta => "eta",
            GridKey::Beta => "beta",
            GridKey::PXz => "p_xz",
            GridKey::Epsilon => "epsilon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [GridKey::L, GridKey::PM, GridKey::Eta, GridKey::Beta, GridKey::PXz, GridKey::Epsilon]
            .into_iter()
            .find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub key: GridKey,
    pub values: Vec<f64>,
}

impl std::str::FromStr for GridAxis {
    type Err = LabError;

    /// `KEY=V1,V2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (k, vs) = s.split_once('=').ok_or_else(|| LabError::Config(format!("grid `{s}` lacks `=`")))?;
        let key = GridKey::parse(k.trim()).ok_or_else(|| LabError::Config(format!("unknown grid key `{k}`")))?;
        let values = vs
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| LabError::Config(format!("grid value `{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(LabError::Config(format!("grid `{s}` has no values")));
        }
        Ok(Self { key, values })
    }
}

/// Cartesian product of the axes; the last axis varies fastest.
pub fn grid_points(axes: &[GridAxis]) -> Vec<Vec<(GridKey, f64)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((axis.key, v));
                    q
                })
            })
            .collect();
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_keys() {
        let cfg = RunConfig::from_json(
            r#"{"L": 16, "eta": 1.0, "beta": 1.6, "p_m": 0.5, "p_xz": 0.0, "t_final": 100,
                "epsilon": 0.0, "model": "z-basis-magic", "seed": 7, "n_traj": 10}"#,
        )
        .unwrap();
        assert_eq!(cfg.l, 16);
        assert_eq!(cfg.model, ModelName::ZBasisMagic);
        assert_eq!(cfg.circuit().t_final_steps(), 100);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(RunConfig::from_json(r#"{"L": 8, "model": "clifford-cluster", "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"L": 8, "model": "clifford-cluster", "p_m": 1.5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"L": 1, "model": "clifford-cluster"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"L": 8, "model": "z-basis-magic", "p_xz": 1.0}"#).is_err());
    }

    #[test]
    fn hash_ignores_spelled_out_defaults() {
        let a = RunConfig::from_json(r#"{"L": 8, "model": "x-basis-purification"}"#).unwrap();
        let b = RunConfig::from_json(r#"{"L": 8, "model": "x-basis-purification", "p_xz": 1.0, "t_final": 128}"#)
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn grid_product() {
        let axes: Vec<GridAxis> = ["L=16,32", "p_m=0.2,0.3,0.4"].iter().map(|s| s.parse().unwrap()).collect();
        let pts = grid_points(&axes);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], vec![(GridKey::L, 16.0), (GridKey::PM, 0.3)]);
        assert!("q=1".parse::<GridAxis>().is_err());
        let mut cfg = RunConfig::new(ModelName::CliffordCluster, 8);
        assert!(cfg.set(GridKey::L, 7.5).is_err());
    }
}

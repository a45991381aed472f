//! Experiment configuration: TOML schema, validation against module
//! preconditions, and a stable content hash embedded in every output.

use crate::distributions::{
    make_shifted_binomial, make_tilted_symmetric, make_two_point, EdgeLaw,
};
use crate::error::{Error, Result};
use crate::runner::RunSpec;
use crate::walk::HFunction;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LawSpec {
    TwoPoint { p: f64 },
    ShiftedBinomial { n: u32, p: f64 },
    Tilted { base_atoms: Vec<(f64, f64)>, beta0: f64 },
}

impl LawSpec {
    pub fn build(&self) -> Result<EdgeLaw> {
        match self {
            LawSpec::TwoPoint { p } => make_two_point(*p),
            LawSpec::ShiftedBinomial { n, p } => make_shifted_binomial(*n, *p),
            LawSpec::Tilted { base_atoms, beta0 } => make_tilted_symmetric(base_atoms, *beta0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: u32,
    pub h: HFunction,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub beta_grid: Option<Vec<f64>>,
}

fn default_buffer_w() -> u32 {
    50
}

fn default_stride() -> u64 {
    1
}

fn default_min_blocks() -> usize {
    crate::estimators::BLOCK_FLOOR
}

fn default_trajectory_replicas() -> u32 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub n_steps: u64,
    pub n_replicas: u32,
    pub seed: u64,
    #[serde(default = "default_buffer_w")]
    pub buffer_w: u32,
    /// Trajectory subsample stride for CSV export.
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default = "default_min_blocks")]
    pub min_blocks: usize,
    /// How many replicas get a trajectory CSV.
    #[serde(default = "default_trajectory_replicas")]
    pub trajectory_replicas: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub law: LawSpec,
    pub model: ModelConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Validates every module precondition reachable from the config.
    pub fn validate(&self) -> Result<EdgeLaw> {
        if self.model.d < 3 {
            return Err(Error::InvalidConfig(format!(
                "d = {} must be at least 3",
                self.model.d
            )));
        }
        if self.run.n_replicas == 0 || self.run.n_steps == 0 {
            return Err(Error::InvalidConfig(
                "n_steps and n_replicas must be positive".into(),
            ));
        }
        self.law.build()
    }

    pub fn beta(&self) -> f64 {
        self.model.beta.unwrap_or(0.0)
    }

    pub fn run_spec(&self, law: EdgeLaw, beta: f64) -> RunSpec {
        RunSpec {
            law,
            d: self.model.d,
            h: self.model.h,
            beta,
            n_steps: self.run.n_steps,
            n_replicas: self.run.n_replicas,
            master_seed: self.run.seed,
            buffer_w: self.run.buffer_w,
        }
    }

    /// Stable content hash over the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[law]
type = "two_point"
p = 0.25

[model]
d = 3
h = "metropolis"
beta = 0.0

[run]
n_steps = 1000
n_replicas = 4
seed = 7
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let law = cfg.validate().unwrap();
        assert!((law.beta0() - 3f64.ln()).abs() < 1e-12);
        assert_eq!(cfg.run.buffer_w, 50);
        assert_eq!(cfg.beta(), 0.0);
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let b = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        c.run.seed = 8;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejects_bad_law() {
        let text = SAMPLE.replace("p = 0.25", "p = 0.75");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_malformed_toml() {
        assert!(ExperimentConfig::from_toml("[law]\ntype = 12").is_err());
    }
}

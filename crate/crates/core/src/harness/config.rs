use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{ClusterConfig, DescriptiveConfig};
use crate::error::{Error, Result};
use crate::rl::{AdversaryConfig, SutConfig, SutKind};
use crate::search::{GaConfig, ParamBounds};

/// Test generators that can be run under a common budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Random adversary actions.
    #[serde(rename = "rs")]
    RandomTesting,
    /// Genetic search over open-loop action sequences.
    #[serde(rename = "ga-actions")]
    GaActions,
    /// RL adversary rewarded for any collision.
    #[serde(rename = "base-dqn")]
    BaseDqn,
    /// Validity-aware RL adversary alone.
    #[serde(rename = "varl")]
    Varl,
    /// Validity-aware RL with genetic search over its initial conditions.
    #[serde(rename = "varl-ga")]
    VarlGa,
    #[serde(rename = "varl-rs")]
    VarlRs,
    /// Two-step pipeline with genetic initial-condition search.
    #[serde(rename = "dynasto-ga")]
    DynastoGa,
    #[serde(rename = "dynasto-rs")]
    DynastoRs,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::RandomTesting,
        Method::GaActions,
        Method::BaseDqn,
        Method::Varl,
        Method::VarlGa,
        Method::VarlRs,
        Method::DynastoGa,
        Method::DynastoRs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RandomTesting => "rs",
            Method::GaActions => "ga-actions",
            Method::BaseDqn => "base-dqn",
            Method::Varl => "varl",
            Method::VarlGa => "varl-ga",
            Method::VarlRs => "varl-rs",
            Method::DynastoGa => "dynasto-ga",
            Method::DynastoRs => "dynasto-rs",
        }
    }

    pub fn is_two_step(self) -> bool {
        matches!(self, Method::DynastoGa | Method::DynastoRs)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

/// How the Step-2 share of the budget is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step2Unit {
    /// One unit per candidate episode.
    #[default]
    Evaluations,
    /// One unit per simulated policy step.
    EnvSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub budget: usize,
    /// Step-1 share of `budget` for the two-step methods.
    pub step1_budget: usize,
    pub step2_unit: Step2Unit,
    pub seeds: usize,
    pub base_seed: u64,
    pub sut: SutKind,
    /// Trained SUT checkpoint; required unless the SUT is trained first.
    pub sut_checkpoint: Option<PathBuf>,
    pub sut_train_steps: usize,
    pub sut_seed: u64,
    pub out_dir: PathBuf,
    /// Optional TOML file overriding the initial-condition ranges.
    pub bounds_file: Option<PathBuf>,
    pub adversary: AdversaryConfig,
    pub ga: GaConfig,
    pub descriptive: DescriptiveConfig,
    pub cluster: ClusterConfig,
    pub sut_training: Option<SutConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::DynastoGa,
            budget: 4000,
            step1_budget: 3000,
            step2_unit: Step2Unit::Evaluations,
            seeds: 10,
            base_seed: 0,
            sut: SutKind::Sut1,
            sut_checkpoint: None,
            sut_train_steps: 10_000,
            sut_seed: 0,
            out_dir: PathBuf::from("runs"),
            bounds_file: None,
            adversary: AdversaryConfig::default(),
            ga: GaConfig::default(),
            descriptive: DescriptiveConfig::default(),
            cluster: ClusterConfig::default(),
            sut_training: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::config("budget", "must be positive"));
        }
        if self.step1_budget > self.budget {
            return Err(Error::config("step1_budget", "cannot exceed the total budget"));
        }
        if self.seeds == 0 {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        if !(self.descriptive.s_th > 0.0) || self.descriptive.n_steps == 0 {
            return Err(Error::config("descriptive", "need s_th > 0 and n_steps > 0"));
        }
        if self.cluster.k == 0 {
            return Err(Error::config("cluster.k", "must be at least 1"));
        }
        self.adversary.validate()?;
        self.ga.validate()
    }

    pub fn step2_budget(&self) -> usize {
        self.budget - self.step1_budget
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|i| self.base_seed + i).collect()
    }

    pub fn bounds(&self) -> Result<ParamBounds> {
        match &self.bounds_file {
            Some(p) => ParamBounds::load(p),
            None => Ok(ParamBounds::default()),
        }
    }

    pub fn sut_config(&self) -> SutConfig {
        self.sut_training.clone().unwrap_or_else(|| SutConfig::for_kind(self.sut))
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

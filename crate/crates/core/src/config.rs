//! TOML experiment files. Agent fields take the same `kind[:key=value,...]`
//! strings as the command line, or an inline table:
//!
//! ```toml
//! distribution = [0.2, 0.4, 0.6, 0.8]
//! rounds = 1000
//! seed = 7
//! repetitions = 100
//! poacher = "pfa:M=10,s=1"
//! ranger = { kind = "fp" }
//! ```

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::agents::AgentSpec;
use crate::error::{Error, Result};
use crate::game::{GameConfig, RhinoDistribution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: RhinoDistribution,
    pub rounds: usize,
    #[serde(deserialize_with = "spec_field")]
    pub poacher: AgentSpec,
    #[serde(deserialize_with = "spec_field")]
    pub ranger: AgentSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Text(String),
    Table(AgentSpec),
}

fn spec_field<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<AgentSpec, D::Error> {
    match SpecRepr::deserialize(de)? {
        SpecRepr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        SpecRepr::Table(spec) => Ok(spec),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.game_config().validate()?;
        if config.repetitions == 0 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn game_config(&self) -> GameConfig {
        GameConfig::new(self.distribution.clone(), self.rounds, self.poacher.clone(), self.ranger.clone(), self.seed)
    }
}

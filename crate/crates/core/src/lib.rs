//! Simulation laboratory for the repeated ranger-poacher security game.

pub mod agents;
pub mod analysis;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod io;
pub mod sim;

pub use agents::{Agent, AgentKind, AgentSpec, BoundedMemory};
pub use config::ExperimentConfig;
pub use equilibrium::{solve_stage_ne, EquilibriumResult};
pub use error::{Error, Result};
pub use game::{GameConfig, MixedStrategy, RhinoDistribution, Role, RoundOutcome, Site};
pub use sim::{run_batch, run_game, BatchStats, GameLog};

//! Poacher and ranger strategies behind one [`Agent`] type.
//!
//! Every agent follows the same round protocol: [`Agent::act`] picks a site,
//! then [`Agent::observe`] receives the resolved round (the opponent's site
//! and the agent's own realized utility).

mod learning;
mod memory;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use learning::{expected_utilities, level2_distribution, mwu_update, util_match_distribution};
pub use memory::{memory_estimate, pfa_transition, significance_increment, BoundedMemory};

use crate::equilibrium::{argmax_sites, solve_stage_ne};
use crate::error::{Error, Result};
use crate::game::{poacher_payoff, ranger_payoff, MixedStrategy, RhinoDistribution, Role, RoundOutcome, Site};

pub const DEFAULT_ETA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    /// Samples the stage-game equilibrium strategy every round.
    #[serde(rename = "ne", alias = "ne_fixed")]
    NeFixed,
    /// Samples `d / Σd`.
    #[serde(rename = "pm", alias = "prob_match")]
    ProbMatch,
    /// Utility matching against the opponent's exact visit frequencies.
    #[serde(rename = "um", alias = "util_match")]
    UtilMatch,
    /// Best response to the opponent's exact visit frequencies.
    #[serde(rename = "fp", alias = "fictitious_play")]
    FictitiousPlay,
    #[serde(rename = "mwu")]
    Mwu,
    /// Best response to a bounded, randomly evicted count memory.
    #[serde(rename = "pfa")]
    Pfa,
    #[serde(rename = "level0_uniform", alias = "uniform")]
    Level0Uniform,
    /// Sticks to one site drawn at initialization.
    #[serde(rename = "level0_sticky", alias = "sticky")]
    Level0Sticky,
    #[serde(rename = "level1")]
    Level1,
    #[serde(rename = "level2")]
    Level2,
    /// Moves supplied from outside, e.g. by a person playing through the
    /// session service. Cannot be instantiated as an [`Agent`].
    #[serde(rename = "human")]
    Human,
}

impl AgentKind {
    /// Every simulated kind.
    pub const ALL: [AgentKind; 10] = [
        AgentKind::NeFixed,
        AgentKind::ProbMatch,
        AgentKind::UtilMatch,
        AgentKind::FictitiousPlay,
        AgentKind::Mwu,
        AgentKind::Pfa,
        AgentKind::Level0Uniform,
        AgentKind::Level0Sticky,
        AgentKind::Level1,
        AgentKind::Level2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::NeFixed => "ne",
            AgentKind::ProbMatch => "pm",
            AgentKind::UtilMatch => "um",
            AgentKind::FictitiousPlay => "fp",
            AgentKind::Mwu => "mwu",
            AgentKind::Pfa => "pfa",
            AgentKind::Level0Uniform => "level0_uniform",
            AgentKind::Level0Sticky => "level0_sticky",
            AgentKind::Level1 => "level1",
            AgentKind::Level2 => "level2",
            AgentKind::Human => "human",
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ne" | "ne_fixed" => AgentKind::NeFixed,
            "pm" | "prob_match" => AgentKind::ProbMatch,
            "um" | "util_match" => AgentKind::UtilMatch,
            "fp" | "fictitious_play" => AgentKind::FictitiousPlay,
            "mwu" => AgentKind::Mwu,
            "pfa" => AgentKind::Pfa,
            "level0_uniform" | "uniform" => AgentKind::Level0Uniform,
            "level0_sticky" | "sticky" => AgentKind::Level0Sticky,
            "level1" => AgentKind::Level1,
            "level2" => AgentKind::Level2,
            "human" => AgentKind::Human,
            other => return Err(Error::InvalidSpec(format!("unknown agent kind {other:?}"))),
        };
        Ok(kind)
    }
}

/// Declarative agent configuration. The role is supplied by the game slot
/// the spec sits in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    /// Memory capacity, PFA only.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<u32>,
    /// Significance weight, PFA only; defaults to 0.
    #[serde(rename = "s", default, skip_serializing_if = "Option::is_none")]
    pub significance: Option<u32>,
    /// Learning rate, MWU only; defaults to [`DEFAULT_ETA`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl AgentSpec {
    pub fn new(kind: AgentKind) -> Self {
        Self { kind, memory: None, significance: None, eta: None }
    }

    pub fn pfa(memory: u32, significance: u32) -> Self {
        Self { memory: Some(memory), significance: Some(significance), ..Self::new(AgentKind::Pfa) }
    }

    pub fn mwu(eta: f64) -> Self {
        Self { eta: Some(eta), ..Self::new(AgentKind::Mwu) }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            AgentKind::Pfa => match self.memory {
                None => return Err(Error::InvalidSpec("pfa requires M".into())),
                Some(0) => return Err(Error::InvalidSpec("pfa requires M >= 1".into())),
                Some(_) => {}
            },
            AgentKind::Mwu => {
                let eta = self.eta();
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::InvalidSpec(format!("mwu requires eta > 0, got {eta}")));
                }
            }
            _ => {}
        }
        if self.kind != AgentKind::Pfa && (self.memory.is_some() || self.significance.is_some()) {
            return Err(Error::InvalidSpec(format!("M and s only apply to pfa, not {}", self.kind.name())));
        }
        if self.kind != AgentKind::Mwu && self.eta.is_some() {
            return Err(Error::InvalidSpec(format!("eta only applies to mwu, not {}", self.kind.name())));
        }
        Ok(())
    }

    pub fn significance(&self) -> u32 {
        self.significance.unwrap_or(0)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(DEFAULT_ETA)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let mut params = Vec::new();
        if let Some(m) = self.memory {
            params.push(format!("M={m}"));
        }
        if let Some(s) = self.significance {
            params.push(format!("s={s}"));
        }
        if let Some(eta) = self.eta {
            params.push(format!("eta={eta}"));
        }
        if !params.is_empty() {
            write!(f, ":{}", params.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for AgentSpec {
    type Err = Error;

    /// Parses `kind[:key=value,...]`, e.g. `pfa:M=10,s=1` or `mwu:eta=0.05`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = match s.split_once(':') {
            Some((kind, params)) => (kind, Some(params)),
            None => (s, None),
        };
        let mut spec = AgentSpec::new(kind.parse()?);
        for pair in params.into_iter().flat_map(|p| p.split(',')).filter(|p| !p.trim().is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got {pair:?}")))?;
            let bad = |e: &dyn fmt::Display| Error::InvalidSpec(format!("bad value for {key}: {e}"));
            match key.trim() {
                "M" | "m" => spec.memory = Some(value.trim().parse().map_err(|e| bad(&e))?),
                "s" => spec.significance = Some(value.trim().parse().map_err(|e| bad(&e))?),
                "eta" => spec.eta = Some(value.trim().parse().map_err(|e| bad(&e))?),
                other => return Err(Error::InvalidSpec(format!("unknown parameter {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Runtime state of a bounded-memory agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfaState {
    pub memory: BoundedMemory,
    pub current_choice: Site,
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Fixed(MixedStrategy),
    Sticky(Site),
    Pfa { state: PfaState, significance: u32 },
    FictitiousPlay { counts: Vec<u64>, next: Site },
    Mwu { weights: Vec<f64>, eta: f64 },
    UtilMatch { counts: Vec<u64>, strategy: MixedStrategy },
}

/// An initialized agent playing one role in one game.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    spec: AgentSpec,
    role: Role,
    distribution: RhinoDistribution,
    payload: Payload,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(spec: &AgentSpec, role: Role, d: &RhinoDistribution, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let n = d.sites();
        let payload = match spec.kind {
            AgentKind::NeFixed => {
                let ne = solve_stage_ne(d);
                Payload::Fixed(match role {
                    Role::Poacher => ne.poacher_strategy,
                    Role::Ranger => ne.ranger_strategy,
                })
            }
            AgentKind::ProbMatch | AgentKind::Level1 => Payload::Fixed(d.probability_matching()),
            AgentKind::Level0Uniform => Payload::Fixed(MixedStrategy::uniform(n)),
            AgentKind::Level2 => Payload::Fixed(match role {
                Role::Poacher => level2_distribution(d),
                Role::Ranger => util_match_distribution(&d.probability_matching(), d, Role::Ranger),
            }),
            AgentKind::Level0Sticky => Payload::Sticky(rng.random_range(0..n)),
            AgentKind::Pfa => Payload::Pfa {
                state: PfaState {
                    memory: BoundedMemory::new(n, spec.memory.unwrap_or_default())?,
                    current_choice: 0,
                },
                significance: spec.significance(),
            },
            AgentKind::FictitiousPlay => Payload::FictitiousPlay { counts: vec![0; n], next: rng.random_range(0..n) },
            AgentKind::Mwu => Payload::Mwu { weights: vec![1.0; n], eta: spec.eta() },
            AgentKind::UtilMatch => Payload::UtilMatch { counts: vec![0; n], strategy: MixedStrategy::uniform(n) },
            AgentKind::Human => return Err(Error::InvalidSpec("human players are not simulated".into())),
        };
        Ok(Self { spec: spec.clone(), role, distribution: d.clone(), payload })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn act<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        match &self.payload {
            Payload::Fixed(strategy) | Payload::UtilMatch { strategy, .. } => strategy.sample(rng),
            Payload::Sticky(site) => *site,
            Payload::Pfa { state, .. } => state.current_choice,
            Payload::FictitiousPlay { next, .. } => *next,
            Payload::Mwu { weights, .. } => crate::game::sample_weighted(weights, rng),
        }
    }

    pub fn observe<R: Rng + ?Sized>(&mut self, outcome: &RoundOutcome, rng: &mut R) -> Result<()> {
        let n = self.distribution.sites();
        if outcome.rhino_present.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: outcome.rhino_present.len() });
        }
        if !outcome.is_consistent() {
            return Err(Error::InvalidConfig(format!("inconsistent round outcome {outcome:?}")));
        }
        let opponent = outcome.site(self.role.opponent());
        let utility = outcome.utility(self.role);
        let (role, d) = (self.role, &self.distribution);
        match &mut self.payload {
            Payload::Fixed(_) | Payload::Sticky(_) => {}
            Payload::Pfa { state, significance } => {
                state.memory.insert(opponent, significance_increment(utility, *significance), rng);
                state.current_choice = choose_best_response(&state.memory, role, d, rng);
            }
            Payload::FictitiousPlay { counts, next } => {
                counts[opponent] += 1;
                let estimate = MixedStrategy::from_counts(counts).expect("just incremented");
                *next = random_best_response(&estimate, role, d, rng);
            }
            Payload::Mwu { weights, eta } => {
                let mut updated = mwu_update(weights, opponent, d, role, *eta);
                // rescale so long games stay finite; only ratios matter
                let max = updated.iter().copied().fold(0.0, f64::max);
                updated.iter_mut().for_each(|w| *w /= max);
                *weights = updated;
            }
            Payload::UtilMatch { counts, strategy } => {
                counts[opponent] += 1;
                let estimate = MixedStrategy::from_counts(counts).expect("just incremented");
                *strategy = util_match_distribution(&estimate, d, role);
            }
        }
        Ok(())
    }

    /// The agent's current belief about its opponent, for learning agents
    /// that hold one.
    pub fn opponent_estimate(&self) -> Option<MixedStrategy> {
        match &self.payload {
            Payload::Pfa { state, .. } => memory_estimate(&state.memory).ok(),
            Payload::FictitiousPlay { counts, .. } | Payload::UtilMatch { counts, .. } => {
                MixedStrategy::from_counts(counts)
            }
            _ => None,
        }
    }

    /// The distribution the next action is drawn from, when the agent has
    /// one (fixed strategies, MWU, utility matching).
    pub fn mixed_strategy(&self) -> Option<MixedStrategy> {
        match &self.payload {
            Payload::Fixed(s) | Payload::UtilMatch { strategy: s, .. } => Some(s.clone()),
            Payload::Mwu { weights, .. } => Some(MixedStrategy::from_weights(weights.clone())),
            _ => None,
        }
    }

    pub fn pfa_state(&self) -> Option<&PfaState> {
        match &self.payload {
            Payload::Pfa { state, .. } => Some(state),
            _ => None,
        }
    }

    /// Exact opponent visit counts held by FP and UM agents.
    pub fn history_counts(&self) -> Option<&[u64]> {
        match &self.payload {
            Payload::FictitiousPlay { counts, .. } | Payload::UtilMatch { counts, .. } => Some(counts),
            _ => None,
        }
    }

    #[cfg(test)]
    fn set_pfa_memory(&mut self, memory: BoundedMemory) {
        if let Payload::Pfa { state, .. } = &mut self.payload {
            state.memory = memory;
        }
    }
}

/// Best-response sites for `role` against an opponent strategy.
pub fn best_responses(estimate: &MixedStrategy, role: Role, d: &RhinoDistribution) -> Vec<Site> {
    argmax_sites(d.sites(), |i| match role {
        Role::Poacher => poacher_payoff(i, estimate.probs(), d.as_slice()),
        Role::Ranger => ranger_payoff(i, estimate.probs(), d.as_slice()),
    })
}

fn random_best_response<R: Rng + ?Sized>(estimate: &MixedStrategy, role: Role, d: &RhinoDistribution, rng: &mut R) -> Site {
    let sites = best_responses(estimate, role, d);
    sites[rng.random_range(0..sites.len())]
}

// Site 0 while the memory is empty.
fn choose_best_response<R: Rng + ?Sized>(memory: &BoundedMemory, role: Role, d: &RhinoDistribution, rng: &mut R) -> Site {
    match memory_estimate(memory) {
        Ok(estimate) => random_best_response(&estimate, role, d, rng),
        Err(_) => 0,
    }
}

//! The stage game and the repeated game built on it.
//!
//! Sites are 0-based throughout the crate. The poacher is the row player;
//! a collision costs the poacher 1 point, an unguarded site with a rhino
//! pays the poacher 1 point, anything else is a draw.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::AgentSpec;
use crate::error::{Error, Result};

pub type Site = usize;

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-site probability that a rhino is present. Entries need not sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RhinoDistribution(Vec<f64>);

impl RhinoDistribution {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if d.len() < 2 {
            return Err(Error::TooFewSites(d.len()));
        }
        for (index, &value) in d.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ProbabilityOutOfRange { index, value });
            }
        }
        Ok(Self(d))
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, site: Site) -> f64 {
        self.0[site]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `d / Σd`, or uniform when every entry is zero.
    pub fn probability_matching(&self) -> MixedStrategy {
        MixedStrategy::from_weights(self.0.clone())
    }

    fn check_site(&self, site: Site) -> Result<()> {
        if site >= self.sites() {
            return Err(Error::SiteOutOfRange { site, n: self.sites() });
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.sites() {
            return Err(Error::LengthMismatch { expected: self.sites(), got: len });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for RhinoDistribution {
    type Error = Error;

    fn try_from(d: Vec<f64>) -> Result<Self> {
        Self::new(d)
    }
}

impl From<RhinoDistribution> for Vec<f64> {
    fn from(d: RhinoDistribution) -> Self {
        d.0
    }
}

impl std::str::FromStr for RhinoDistribution {
    type Err = Error;

    /// Parses a comma-separated list such as `0.2,0.4,0.6,0.8`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidConfig(format!("bad probability {part:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

impl fmt::Display for RhinoDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A probability distribution over sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidStrategy("no entries".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidStrategy(format!("negative or non-finite entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidStrategy(format!("entries sum to {total}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, site: Site) -> Self {
        let mut probs = vec![0.0; n];
        probs[site] = 1.0;
        Self(probs)
    }

    /// Normalizes nonnegative weights; an all-zero vector becomes uniform.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Self::uniform(weights.len());
        }
        Self(weights.into_iter().map(|w| w / total).collect())
    }

    /// Visit frequencies from integer counts; `None` when all counts are zero.
    pub fn from_counts(counts: &[u64]) -> Option<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        Some(Self(counts.iter().map(|&c| c as f64 / total as f64).collect()))
    }

    pub fn sites(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, site: Site) -> f64 {
        self.0[site]
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        sample_weighted(&self.0, rng)
    }
}

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(s: MixedStrategy) -> Self {
        s.0
    }
}

/// Draws an index proportionally to nonnegative `weights`. Zero weights are
/// never drawn unless every weight is zero, in which case the draw is uniform.
pub(crate) fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if target < w {
            return i;
        }
        target -= w;
        last_positive = i;
    }
    // rounding left a sliver past the final positive weight
    last_positive
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Poacher,
    Ranger,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::Poacher => Role::Ranger,
            Role::Ranger => Role::Poacher,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Poacher => "poacher",
            Role::Ranger => "ranger",
        })
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poacher" => Ok(Role::Poacher),
            "ranger" => Ok(Role::Ranger),
            other => Err(Error::InvalidConfig(format!("unknown role {other:?}"))),
        }
    }
}

/// One resolved stage game with realized payoffs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub poacher_site: Site,
    pub ranger_site: Site,
    pub rhino_present: Vec<bool>,
    #[serde(rename = "u_p")]
    pub poacher_utility: i8,
    #[serde(rename = "u_r")]
    pub ranger_utility: i8,
}

impl RoundOutcome {
    pub fn site(&self, role: Role) -> Site {
        match role {
            Role::Poacher => self.poacher_site,
            Role::Ranger => self.ranger_site,
        }
    }

    pub fn utility(&self, role: Role) -> i8 {
        match role {
            Role::Poacher => self.poacher_utility,
            Role::Ranger => self.ranger_utility,
        }
    }

    /// Checks the payoff rules against the recorded sites and rhinos.
    pub fn is_consistent(&self) -> bool {
        let n = self.rhino_present.len();
        if self.poacher_site >= n || self.ranger_site >= n {
            return false;
        }
        let expected = if self.poacher_site == self.ranger_site {
            -1
        } else if self.rhino_present[self.poacher_site] {
            1
        } else {
            0
        };
        self.poacher_utility == expected && self.ranger_utility == -expected
    }
}

/// Expected poacher payoff of a pure visit to `site`: `(1 - r)·d - r`.
pub fn expected_poacher_utility(
    site: Site,
    ranger_strategy: &MixedStrategy,
    d: &RhinoDistribution,
) -> Result<f64> {
    d.check_len(ranger_strategy.sites())?;
    d.check_site(site)?;
    Ok(poacher_payoff(site, ranger_strategy.probs(), d.as_slice()))
}

/// Expected ranger payoff of a pure visit to `site`: `p_site - Σ_{j≠site} d_j·p_j`.
pub fn expected_ranger_utility(
    poacher_strategy: &MixedStrategy,
    site: Site,
    d: &RhinoDistribution,
) -> Result<f64> {
    d.check_len(poacher_strategy.sites())?;
    d.check_site(site)?;
    Ok(ranger_payoff(site, poacher_strategy.probs(), d.as_slice()))
}

// Unchecked kernels shared with the agents; callers guarantee lengths.
pub(crate) fn poacher_payoff(site: Site, ranger: &[f64], d: &[f64]) -> f64 {
    let r = ranger[site];
    (1.0 - r) * d[site] - r
}

pub(crate) fn ranger_payoff(site: Site, poacher: &[f64], d: &[f64]) -> f64 {
    let escaped: f64 = poacher
        .iter()
        .zip(d)
        .enumerate()
        .filter(|(j, _)| *j != site)
        .map(|(_, (p, dj))| p * dj)
        .sum();
    poacher[site] - escaped
}

/// Expected poacher payoff of the pure cell `(poacher_site, ranger_site)`.
pub fn cell_payoff(poacher_site: Site, ranger_site: Site, d: &RhinoDistribution) -> f64 {
    if poacher_site == ranger_site {
        -1.0
    } else {
        d.get(poacher_site)
    }
}

/// Each site independently holds a rhino with probability `d_i`.
pub fn sample_rhinos<R: Rng + ?Sized>(d: &RhinoDistribution, rng: &mut R) -> Vec<bool> {
    d.as_slice().iter().map(|&p| rng.random::<f64>() < p).collect()
}

pub fn resolve_round(
    poacher_site: Site,
    ranger_site: Site,
    rhino_present: &[bool],
) -> Result<RoundOutcome> {
    let n = rhino_present.len();
    for site in [poacher_site, ranger_site] {
        if site >= n {
            return Err(Error::SiteOutOfRange { site, n });
        }
    }
    let poacher_utility = if poacher_site == ranger_site {
        -1
    } else if rhino_present[poacher_site] {
        1
    } else {
        0
    };
    Ok(RoundOutcome {
        poacher_site,
        ranger_site,
        rhino_present: rhino_present.to_vec(),
        poacher_utility,
        ranger_utility: -poacher_utility,
    })
}

/// Everything needed to replay one repeated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub distribution: RhinoDistribution,
    pub rounds: usize,
    pub poacher: AgentSpec,
    pub ranger: AgentSpec,
    pub seed: u64,
}

impl GameConfig {
    pub fn new(
        distribution: RhinoDistribution,
        rounds: usize,
        poacher: AgentSpec,
        ranger: AgentSpec,
        seed: u64,
    ) -> Self {
        Self { distribution, rounds, poacher, ranger, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        RhinoDistribution::new(self.distribution.as_slice().to_vec())?;
        self.poacher.validate()?;
        self.ranger.validate()?;
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

//! Seeded single games, Monte Carlo batches, frequency traces and the
//! significance sweep.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentSpec};
use crate::equilibrium::solve_stage_ne;
use crate::error::{Error, Result};
use crate::game::{resolve_round, sample_rhinos, GameConfig, MixedStrategy, RhinoDistribution, Role, RoundOutcome};

/// Window used for end-of-game strategy summaries.
pub const LAST_WINDOW: usize = 25;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record the poacher's opponent estimate after every round.
    pub record_estimates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub config: GameConfig,
    pub digest: String,
    pub rounds: Vec<RoundOutcome>,
    /// Poacher's belief about the ranger after each round, when recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poacher_estimates: Option<Vec<Option<MixedStrategy>>>,
}

impl GameLog {
    pub fn sites(&self) -> usize {
        self.config.distribution.sites()
    }

    pub fn total_utility(&self, role: Role) -> i64 {
        self.rounds.iter().map(|r| r.utility(role) as i64).sum()
    }

    pub fn average_utility(&self, role: Role) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        self.total_utility(role) as f64 / self.rounds.len() as f64
    }

    pub fn sites_of(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.rounds.iter().map(move |r| r.site(role))
    }

    /// Visit frequencies over the final `window` rounds (all rounds if the
    /// log is shorter).
    pub fn tail_frequencies(&self, role: Role, window: usize) -> Result<MixedStrategy> {
        if self.rounds.is_empty() {
            return Err(Error::EmptyLog);
        }
        let start = self.rounds.len().saturating_sub(window);
        Ok(visit_frequencies(self.sites(), self.rounds[start..].iter().map(|r| r.site(role))))
    }

    pub fn frequencies(&self, role: Role) -> Result<MixedStrategy> {
        self.tail_frequencies(role, self.rounds.len())
    }

    /// Checks the log's length and every round's payoff rules.
    pub fn check_invariants(&self) -> Result<()> {
        if self.rounds.len() != self.config.rounds {
            return Err(Error::InvalidConfig(format!(
                "log has {} rounds, config says {}",
                self.rounds.len(),
                self.config.rounds
            )));
        }
        let n = self.sites();
        for (i, round) in self.rounds.iter().enumerate() {
            if round.rhino_present.len() != n || !round.is_consistent() {
                return Err(Error::MalformedLog { line: i + 1, message: format!("inconsistent round {round:?}") });
            }
        }
        Ok(())
    }
}

fn visit_frequencies(n: usize, sites: impl Iterator<Item = usize>) -> MixedStrategy {
    let mut counts = vec![0u64; n];
    for s in sites {
        counts[s] += 1;
    }
    MixedStrategy::from_counts(&counts).unwrap_or_else(|| MixedStrategy::uniform(n))
}

/// FNV-1a over the config's JSON form; identifies the configuration in logs.
pub fn config_digest(config: &GameConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Warns when the poacher cannot expect a positive payoff in equilibrium.
pub fn warn_if_unprofitable(d: &RhinoDistribution) -> bool {
    let value = solve_stage_ne(d).value;
    if value <= 0.0 {
        log::warn!("equilibrium value {value:.4} for d = ({d}) is not positive for the poacher");
        return true;
    }
    false
}

pub fn run_game(config: &GameConfig) -> Result<GameLog> {
    run_game_with(config, &RunOptions::default())
}

/// Plays the configured game. One generator, seeded from `config.seed`,
/// is consumed in a fixed order each round: rhinos, poacher action, ranger
/// action, poacher update, ranger update.
pub fn run_game_with(config: &GameConfig, options: &RunOptions) -> Result<GameLog> {
    config.validate()?;
    let d = &config.distribution;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut poacher = Agent::new(&config.poacher, Role::Poacher, d, &mut rng)?;
    let mut ranger = Agent::new(&config.ranger, Role::Ranger, d, &mut rng)?;
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut estimates = options.record_estimates.then(|| Vec::with_capacity(config.rounds));
    for _ in 0..config.rounds {
        let rhinos = sample_rhinos(d, &mut rng);
        let poacher_site = poacher.act(&mut rng);
        let ranger_site = ranger.act(&mut rng);
        let outcome = resolve_round(poacher_site, ranger_site, &rhinos)?;
        poacher.observe(&outcome, &mut rng)?;
        ranger.observe(&outcome, &mut rng)?;
        if let Some(est) = estimates.as_mut() {
            est.push(poacher.opponent_estimate());
        }
        rounds.push(outcome);
    }
    Ok(GameLog { digest: config_digest(config), config: config.clone(), rounds, poacher_estimates: estimates })
}

/// Five-number boxplot summary: quartiles by linear interpolation, whiskers
/// at the most extreme observations within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotSummary {
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub max: f64,
}

impl BoxplotSummary {
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mean = sorted.iter().sum::<f64>() / count as f64;
        let std_dev = if count > 1 {
            (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        let q1 = quantile(&sorted, 0.25);
        let q3 = quantile(&sorted, 0.75);
        let iqr = q3 - q1;
        let lower_whisker = *sorted.iter().find(|&&x| x >= q1 - 1.5 * iqr).expect("q1 is within range");
        let upper_whisker = *sorted.iter().rev().find(|&&x| x <= q3 + 1.5 * iqr).expect("q3 is within range");
        Some(Self {
            count,
            mean,
            std_dev,
            min: sorted[0],
            lower_whisker,
            q1,
            median: quantile(&sorted, 0.5),
            q3,
            upper_whisker,
            max: sorted[count - 1],
        })
    }

    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.count as f64).sqrt()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub base_seed: u64,
    /// Average poacher utility of each repetition, in repetition order.
    pub per_repetition: Vec<f64>,
    pub summary: BoxplotSummary,
    pub poacher_frequencies: MixedStrategy,
    pub ranger_frequencies: MixedStrategy,
    pub poacher_last_window: MixedStrategy,
    pub ranger_last_window: MixedStrategy,
}

impl BatchStats {
    pub fn mean(&self) -> f64 {
        self.summary.mean
    }

    pub fn from_logs(logs: &[GameLog], base_seed: u64) -> Result<Self> {
        let first = logs.first().ok_or(Error::EmptyLog)?;
        let n = first.sites();
        let per_repetition: Vec<f64> = logs.iter().map(|l| l.average_utility(Role::Poacher)).collect();
        let pooled = |role: Role, window: Option<usize>| {
            visit_frequencies(
                n,
                logs.iter().flat_map(|l| {
                    let start = window.map_or(0, |w| l.rounds.len().saturating_sub(w));
                    l.rounds[start..].iter().map(move |r| r.site(role))
                }),
            )
        };
        Ok(Self {
            base_seed,
            summary: BoxplotSummary::from_samples(&per_repetition).expect("non-empty"),
            per_repetition,
            poacher_frequencies: pooled(Role::Poacher, None),
            ranger_frequencies: pooled(Role::Ranger, None),
            poacher_last_window: pooled(Role::Poacher, Some(LAST_WINDOW)),
            ranger_last_window: pooled(Role::Ranger, Some(LAST_WINDOW)),
        })
    }
}

/// Seed of repetition `k` in a batch.
pub fn repetition_seed(base_seed: u64, k: usize) -> u64 {
    base_seed.wrapping_add(k as u64)
}

/// Runs `repetitions` independent games in parallel and keeps their logs.
pub fn run_batch_logs(config: &GameConfig, repetitions: usize, base_seed: u64) -> Result<Vec<GameLog>> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
    }
    config.validate()?;
    (0..repetitions)
        .into_par_iter()
        .map(|k| run_game(&config.with_seed(repetition_seed(base_seed, k))))
        .collect()
}

pub fn run_batch(config: &GameConfig, repetitions: usize, base_seed: u64) -> Result<BatchStats> {
    BatchStats::from_logs(&run_batch_logs(config, repetitions, base_seed)?, base_seed)
}

/// Visit-frequency trace: entry `t` covers rounds `max(0, t-window+1)..=t`,
/// or the whole prefix when `window` is `None`.
pub fn running_frequencies(log: &GameLog, role: Role, window: Option<usize>) -> Result<Vec<MixedStrategy>> {
    if log.rounds.is_empty() {
        return Err(Error::EmptyLog);
    }
    if window == Some(0) {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    let n = log.sites();
    let sites: Vec<usize> = log.sites_of(role).collect();
    let mut counts = vec![0u64; n];
    let mut trace = Vec::with_capacity(sites.len());
    for (t, &site) in sites.iter().enumerate() {
        counts[site] += 1;
        if let Some(w) = window {
            if t >= w {
                counts[sites[t - w]] -= 1;
            }
        }
        trace.push(MixedStrategy::from_counts(&counts).expect("window holds the current round"));
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub significance: u32,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub distribution: RhinoDistribution,
    pub memory: u32,
    pub rounds: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    pub rows: Vec<SweepRow>,
}

/// Mean poacher utility of PFA(M, s) against a PFA(M, 0) ranger for each `s`.
pub fn significance_sweep(
    d: &RhinoDistribution,
    s_values: &[u32],
    memory: u32,
    rounds: usize,
    repetitions: usize,
    base_seed: u64,
) -> Result<SweepTable> {
    let rows = s_values
        .iter()
        .map(|&s| {
            let config = GameConfig::new(d.clone(), rounds, AgentSpec::pfa(memory, s), AgentSpec::pfa(memory, 0), base_seed);
            let stats = run_batch(&config, repetitions, base_seed)?;
            Ok(SweepRow { significance: s, mean: stats.mean(), std_error: stats.summary.std_error() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { distribution: d.clone(), memory, rounds, repetitions, base_seed, rows })
}

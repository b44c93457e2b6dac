//! One human-vs-ranger game and its append-only log file.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use poachlab_core::game::{resolve_round, sample_rhinos};
use poachlab_core::io::{load_log, meta_line, round_line, RoundRecord};
use poachlab_core::{Agent, AgentKind, AgentSpec, GameConfig, RhinoDistribution, Role, RoundOutcome, Site};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::ServiceError;

pub const DEFAULT_HORIZON: usize = 100;

pub fn default_ranger() -> AgentSpec {
    AgentSpec::pfa(100, 0)
}

pub struct Preset {
    pub id: &'static str,
    pub distribution: &'static [f64],
}

pub const PRESETS: [Preset; 4] = [
    Preset { id: "a", distribution: &[0.9, 0.6, 0.2] },
    Preset { id: "b", distribution: &[0.9, 0.6, 0.4, 0.9, 0.1] },
    Preset { id: "c", distribution: &[0.8, 0.3, 0.8, 0.3] },
    Preset { id: "d", distribution: &[0.3, 0.8, 0.7, 0.5] },
];

pub fn preset(id: &str) -> Option<RhinoDistribution> {
    PRESETS
        .iter()
        .find(|p| p.id.eq_ignore_ascii_case(id))
        .map(|p| RhinoDistribution::new(p.distribution.to_vec()).expect("presets are valid"))
}

pub fn rules_text(d: &RhinoDistribution, horizon: usize) -> String {
    format!(
        "You are a poacher choosing one of {n} sites in each of {horizon} rounds. \
         A rhino is at site i with probability d_i = ({d}), independently each round. \
         A ranger, who also knows these probabilities, chooses a site at the same time. \
         If the ranger picks your site you are caught and lose 1 point. \
         Otherwise you gain 1 point if a rhino is at your site and 0 points if not. \
         After each round you see where the ranger went and where the rhinos were.",
        n = d.sites()
    )
}

/// What the creator of a session learns about it.
#[derive(Debug, Clone, Serialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub n: usize,
    pub distribution: RhinoDistribution,
    pub horizon: usize,
    pub ranger: String,
    pub seed: u64,
    pub rules: String,
}

/// Public state. Contains only resolved rounds.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub id: String,
    pub distribution: RhinoDistribution,
    pub horizon: usize,
    pub ranger: String,
    pub round: usize,
    pub score: i64,
    pub completed: bool,
    pub history: Vec<RoundRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoveResult {
    #[serde(flatten)]
    pub record: RoundRecord,
    pub score: i64,
    pub completed: bool,
}

pub struct Session {
    id: String,
    config: GameConfig,
    ranger: Agent,
    rng: ChaCha8Rng,
    /// The ranger's site for the next round, drawn before the move arrives.
    pending: Site,
    rounds: Vec<RoundOutcome>,
    score: i64,
    path: PathBuf,
}

impl Session {
    /// Starts a game and writes its log header.
    pub fn create(id: String, config: GameConfig, dir: &Path) -> Result<Self, ServiceError> {
        let session = Self::start(id, config, dir)?;
        let mut file = File::create(&session.path)?;
        writeln!(file, "{}", meta_line(&session.config))?;
        file.sync_data()?;
        Ok(session)
    }

    fn start(id: String, config: GameConfig, dir: &Path) -> Result<Self, ServiceError> {
        if config.poacher.kind != AgentKind::Human {
            return Err(ServiceError::BadRequest("session poacher must be human".into()));
        }
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let ranger = Agent::new(&config.ranger, Role::Ranger, &config.distribution, &mut rng)?;
        let pending = ranger.act(&mut rng);
        let path = dir.join(format!("{id}.jsonl"));
        Ok(Self { id, config, ranger, rng, pending, rounds: Vec::new(), score: 0, path })
    }

    /// Rebuilds a session from its log by replaying the recorded moves.
    pub fn restore(path: &Path) -> Result<Self, ServiceError> {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| ServiceError::BadRequest(format!("bad log name {}", path.display())))?
            .to_string();
        let log = load_log(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut session = Self::start(id, log.config, dir)?;
        for (i, recorded) in log.rounds.iter().enumerate() {
            let outcome = session.advance(recorded.poacher_site)?;
            if &outcome != recorded {
                return Err(ServiceError::BadRequest(format!("{} diverges from replay at round {}", path.display(), i + 1)));
            }
            session.commit(outcome);
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn horizon(&self) -> usize {
        self.config.rounds
    }

    pub fn completed(&self) -> bool {
        self.rounds.len() >= self.horizon()
    }

    pub fn log_path(&self) -> &Path {
        &self.path
    }

    pub fn descriptor(&self) -> SessionDescriptor {
        let d = &self.config.distribution;
        SessionDescriptor {
            id: self.id.clone(),
            n: d.sites(),
            distribution: d.clone(),
            horizon: self.horizon(),
            ranger: self.config.ranger.to_string(),
            seed: self.config.seed,
            rules: rules_text(d, self.horizon()),
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            distribution: self.config.distribution.clone(),
            horizon: self.horizon(),
            ranger: self.config.ranger.to_string(),
            round: self.rounds.len(),
            score: self.score,
            completed: self.completed(),
            history: self
                .rounds
                .iter()
                .enumerate()
                .map(|(i, o)| RoundRecord { round: i + 1, outcome: o.clone() })
                .collect(),
        }
    }

    /// Plays round `round` (1-based). The log line is written before any
    /// in-memory state changes, so a failed write leaves the session as it was.
    pub fn submit(&mut self, round: usize, site: Site) -> Result<MoveResult, ServiceError> {
        if self.completed() {
            return Err(ServiceError::Completed);
        }
        let expected = self.rounds.len() + 1;
        if round < expected {
            return Err(ServiceError::DuplicateRound { got: round });
        }
        if round > expected {
            return Err(ServiceError::UnexpectedRound { expected, got: round });
        }
        let n = self.config.distribution.sites();
        if site >= n {
            return Err(poachlab_core::Error::SiteOutOfRange { site, n }.into());
        }

        let snapshot = (self.ranger.clone(), self.rng.clone(), self.pending);
        let outcome = self.advance(site)?;
        let appended = OpenOptions::new()
            .append(true)
            .open(&self.path)
            .and_then(|mut f| f.write_all(format!("{}\n", round_line(round, &outcome)).as_bytes()).and_then(|_| f.sync_data()));
        if let Err(e) = appended {
            (self.ranger, self.rng, self.pending) = snapshot;
            return Err(e.into());
        }
        self.commit(outcome.clone());
        Ok(MoveResult { record: RoundRecord { round, outcome }, score: self.score, completed: self.completed() })
    }

    // Resolves the next round against the committed ranger site, lets the
    // ranger learn, and commits its following action.
    fn advance(&mut self, site: Site) -> Result<RoundOutcome, ServiceError> {
        let rhinos = sample_rhinos(&self.config.distribution, &mut self.rng);
        let outcome = resolve_round(site, self.pending, &rhinos)?;
        self.ranger.observe(&outcome, &mut self.rng)?;
        self.pending = self.ranger.act(&mut self.rng);
        Ok(outcome)
    }

    fn commit(&mut self, outcome: RoundOutcome) {
        self.score += outcome.poacher_utility as i64;
        self.rounds.push(outcome);
    }

    #[cfg(test)]
    pub(crate) fn pending(&self) -> Site {
        self.pending
    }
}

pub fn human_config(distribution: RhinoDistribution, ranger: AgentSpec, horizon: usize, seed: u64) -> GameConfig {
    GameConfig::new(distribution, horizon, AgentSpec::new(AgentKind::Human), ranger, seed)
}

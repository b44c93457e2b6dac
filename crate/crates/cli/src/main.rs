use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use poachlab_core::analysis::{cluster_levels, last25_frequency, stickiness, ClusterOptions};
use poachlab_core::equilibrium::maximin_oracle;
use poachlab_core::io::{
    load_log, write_boxplot_csv, write_clusters_csv, write_log_jsonl, write_repetitions_csv, write_stickiness_csv,
    write_sweep_csv, write_trace_csv,
};
use poachlab_core::sim::{run_batch, running_frequencies, significance_sweep, warn_if_unprofitable};
use poachlab_core::{
    run_game, solve_stage_ne, AgentSpec, ExperimentConfig, GameConfig, RhinoDistribution, Role,
};
use poachlab_service::ServiceConfig;

/// Simulation lab for the repeated ranger-poacher game.
#[derive(Parser)]
#[command(name = "poachlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the stage-game equilibrium as JSON.
    Ne {
        /// Rhino probabilities, comma separated (e.g. 0.2,0.4,0.6,0.8).
        #[arg(long)]
        dist: RhinoDistribution,
        /// Solve with the linear-programming oracle instead of the closed form.
        #[arg(long)]
        oracle: bool,
    },
    /// Play one game and write its JSONL log.
    Run {
        #[command(flatten)]
        game: GameArgs,
        /// Log destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a visit-frequency trace CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Player whose frequencies the trace follows.
        #[arg(long, default_value = "poacher")]
        trace_role: Role,
        /// Sliding window for the trace; whole prefix when omitted.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Play repeated games and write boxplot statistics as CSV.
    Batch {
        #[command(flatten)]
        game: GameArgs,
        /// Number of games; game k uses seed + k.
        #[arg(long)]
        reps: Option<usize>,
        /// Row label in the CSV; defaults to "<poacher> vs <ranger>".
        #[arg(long)]
        label: Option<String>,
        /// Boxplot CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write each game's mean poacher utility here.
        #[arg(long)]
        per_rep: Option<PathBuf>,
    },
    /// Mean poacher utility of PFA(M, s) against a PFA(M, 0) ranger for each s.
    Sweep {
        /// Rhino probabilities; repeat the flag for several rows.
        #[arg(long, required = true)]
        dist: Vec<RhinoDistribution>,
        /// Significance weights, comma separated.
        #[arg(long = "s", value_delimiter = ',', default_value = "0,1,2,3,4")]
        s: Vec<u32>,
        /// Memory capacity of both players.
        #[arg(long = "M", default_value_t = 1000)]
        memory: u32,
        /// Rounds per game.
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
        /// Games per cell.
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Base seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stickiness and level clustering over JSONL logs.
    Analyze {
        /// Log files written by `run` or the session service.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Player to analyze.
        #[arg(long, default_value = "poacher")]
        role: Role,
        /// Stickiness CSV destination; standard output when neither output is given.
        #[arg(long)]
        stickiness: Option<PathBuf>,
        /// Cluster CSV destination (needs at least k logs on one distribution).
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Number of clusters.
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Seed for k-means restarts.
        #[arg(long, default_value_t = 0)]
        cluster_seed: u64,
    },
    /// Serve the session HTTP API.
    Serve {
        /// Listen address.
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory holding one JSONL log per session.
        #[arg(long, default_value = "sessions")]
        data_dir: PathBuf,
        /// Origin allowed by CORS; any origin when omitted.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

#[derive(Args)]
struct GameArgs {
    /// TOML experiment file; flags given alongside it take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rhino probabilities, comma separated.
    #[arg(long)]
    dist: Option<RhinoDistribution>,
    /// Rounds per game.
    #[arg(long)]
    rounds: Option<usize>,
    /// Poacher agent, `kind[:key=value,...]` (e.g. pfa:M=10,s=1).
    #[arg(long)]
    poacher: Option<AgentSpec>,
    /// Ranger agent, same syntax as --poacher.
    #[arg(long)]
    ranger: Option<AgentSpec>,
    /// Seed (base seed for batches).
    #[arg(long)]
    seed: Option<u64>,
}

impl GameArgs {
    /// Merged game config, plus the file's repetition count if a file was given.
    fn resolve(self) -> Result<(GameConfig, Option<usize>)> {
        let file = match &self.config {
            Some(path) => Some(ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?),
            None => None,
        };
        let distribution = match (self.dist, &file) {
            (Some(d), _) => d,
            (None, Some(f)) => f.distribution.clone(),
            (None, None) => bail!("--dist or --config is required"),
        };
        let poacher = self.poacher.or_else(|| file.as_ref().map(|f| f.poacher.clone()));
        let ranger = self.ranger.or_else(|| file.as_ref().map(|f| f.ranger.clone()));
        let (Some(poacher), Some(ranger)) = (poacher, ranger) else {
            bail!("--poacher and --ranger (or a --config file) are required");
        };
        let rounds = self.rounds.or(file.as_ref().map(|f| f.rounds)).unwrap_or(100);
        let seed = self.seed.or(file.as_ref().map(|f| f.seed)).unwrap_or(0);
        let reps = file.as_ref().map(|f| f.repetitions);
        let config = GameConfig::new(distribution, rounds, poacher, ranger, seed);
        config.validate()?;
        Ok((config, reps))
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();

    match cli.command {
        Command::Ne { dist, oracle } => {
            let result = if oracle { maximin_oracle(&dist)? } else { solve_stage_ne(&dist) };
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Run { game, out, trace, trace_role, window } => {
            let (config, _) = game.resolve()?;
            warn_if_unprofitable(&config.distribution);
            let log = run_game(&config)?;
            write_log_jsonl(&log, output(out.as_deref())?)?;
            if let Some(path) = trace {
                let frequencies = running_frequencies(&log, trace_role, window)?;
                write_trace_csv(&frequencies, config.seed, output(Some(&path))?)?;
            }
            eprintln!(
                "seed {}: poacher {} vs ranger {}, {} rounds, poacher mean utility {:.4}",
                config.seed,
                config.poacher,
                config.ranger,
                config.rounds,
                log.average_utility(Role::Poacher)
            );
        }
        Command::Batch { game, reps, label, out, per_rep } => {
            let (config, file_reps) = game.resolve()?;
            let reps = reps.or(file_reps).unwrap_or(100);
            warn_if_unprofitable(&config.distribution);
            let stats = run_batch(&config, reps, config.seed)?;
            let label = label.unwrap_or_else(|| format!("{} vs {}", config.poacher, config.ranger));
            write_boxplot_csv(&[(label.clone(), stats.clone())], output(out.as_deref())?)?;
            if let Some(path) = per_rep {
                write_repetitions_csv(&stats, output(Some(&path))?)?;
            }
            eprintln!(
                "{label}: {reps} games from seed {}, mean {:.4} (se {:.4}), median {:.4}",
                config.seed,
                stats.mean(),
                stats.summary.std_error(),
                stats.summary.median
            );
        }
        Command::Sweep { dist, s, memory, rounds, reps, seed, out } => {
            let tables = dist
                .iter()
                .map(|d| significance_sweep(d, &s, memory, rounds, reps, seed))
                .collect::<poachlab_core::Result<Vec<_>>>()?;
            write_sweep_csv(&tables, output(out.as_deref())?)?;
            for t in &tables {
                let means: Vec<String> = t.rows.iter().map(|r| format!("{:.3}", r.mean)).collect();
                eprintln!("({}): {}", t.distribution, means.join(" "));
            }
        }
        Command::Analyze { logs, role, stickiness: stickiness_out, clusters, k, cluster_seed } => {
            let loaded = logs
                .iter()
                .map(|p| load_log(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let table = stickiness(&loaded, role)?;
            if stickiness_out.is_some() || clusters.is_none() {
                write_stickiness_csv(&[("all".to_string(), table.clone())], output(stickiness_out.as_deref())?)?;
            }
            if let Some(path) = clusters {
                let d = &loaded[0].config.distribution;
                if let Some((p, _)) = logs.iter().zip(&loaded).find(|(_, l)| &l.config.distribution != d) {
                    bail!("{} uses a different rhino distribution than {}", p.display(), logs[0].display());
                }
                let vectors = loaded.iter().map(|l| last25_frequency(l, role)).collect::<poachlab_core::Result<Vec<_>>>()?;
                let options = ClusterOptions { k, seed: cluster_seed, ..ClusterOptions::default() };
                let report = cluster_levels(&vectors, d, &options)?;
                let labels: Vec<String> = logs.iter().map(|p| p.display().to_string()).collect();
                write_clusters_csv(&labels, &report, output(Some(&path))?)?;
                eprintln!("{} logs, {} effective clusters", loaded.len(), report.effective_clusters);
            }
            let fmt = |u: i8| table.probability(u).map_or("n/a".to_string(), |p| format!("{p:.4}"));
            eprintln!("{role} stickiness after -1/0/+1: {} {} {}", fmt(-1), fmt(0), fmt(1));
        }
        Command::Serve { addr, data_dir, cors_origin } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(poachlab_service::serve(addr, ServiceConfig { data_dir, allowed_origin: cors_origin }))?;
        }
    }
    Ok(())
}

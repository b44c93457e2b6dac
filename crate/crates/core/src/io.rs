//! File formats.
//!
//! Game logs are JSONL. The first line is a metadata object
//! `{"meta": {"config": ..., "digest": ...}}` carrying the seed and every
//! setting needed for replay. Each following line is one round:
//!
//! ```text
//! {"round":1,"poacher_site":0,"ranger_site":2,"rhino_present":[true,false,true],"u_p":1,"u_r":-1}
//! ```
//!
//! Rounds are numbered from 1 and sites from 0. Tables are CSV with a header
//! row; every randomized table carries its seed in a `seed` column.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ClusterReport, StickinessTable};
use crate::error::{Error, Result};
use crate::game::{GameConfig, MixedStrategy, RoundOutcome};
use crate::sim::{config_digest, repetition_seed, BatchStats, GameLog, SweepTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub config: GameConfig,
    pub digest: String,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: LogMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    #[serde(flatten)]
    pub outcome: RoundOutcome,
}

pub fn meta_line(config: &GameConfig) -> String {
    let meta = MetaLine { meta: LogMeta { config: config.clone(), digest: config_digest(config) } };
    serde_json::to_string(&meta).expect("metadata serializes")
}

/// `round` is 1-based.
pub fn round_line(round: usize, outcome: &RoundOutcome) -> String {
    serde_json::to_string(&RoundRecord { round, outcome: outcome.clone() }).expect("round serializes")
}

pub fn write_log_jsonl<W: Write>(log: &GameLog, mut out: W) -> Result<()> {
    writeln!(out, "{}", meta_line(&log.config))?;
    for (i, outcome) in log.rounds.iter().enumerate() {
        writeln!(out, "{}", round_line(i + 1, outcome))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_log(log: &GameLog, path: &Path) -> Result<()> {
    write_log_jsonl(log, BufWriter::new(File::create(path)?))
}

/// Reads a log written by [`write_log_jsonl`]. Logs of unfinished games
/// (fewer rounds than the configured horizon) are accepted.
pub fn read_log_jsonl<R: BufRead>(input: R) -> Result<GameLog> {
    let mut lines = input.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, first) = lines.next().ok_or(Error::EmptyLog)?;
    let meta: MetaLine = serde_json::from_str(&first?)
        .map_err(|e| Error::MalformedLog { line: 1, message: format!("expected metadata line: {e}") })?;
    let config = meta.meta.config;
    config.validate()?;
    let n = config.distribution.sites();
    let mut rounds = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let record: RoundRecord = serde_json::from_str(&line?)
            .map_err(|e| Error::MalformedLog { line: line_no, message: e.to_string() })?;
        let malformed = |message: String| Error::MalformedLog { line: line_no, message };
        if record.round != rounds.len() + 1 {
            return Err(malformed(format!("expected round {}, found {}", rounds.len() + 1, record.round)));
        }
        let o = &record.outcome;
        if o.poacher_site >= n || o.ranger_site >= n || o.rhino_present.len() != n {
            return Err(malformed(format!("record does not fit {n} sites")));
        }
        if !o.is_consistent() {
            return Err(malformed("utilities disagree with the payoff rules".into()));
        }
        rounds.push(record.outcome);
    }
    if rounds.len() > config.rounds {
        return Err(Error::MalformedLog { line: rounds.len() + 1, message: "more rounds than the horizon".into() });
    }
    Ok(GameLog { digest: meta.meta.digest, config, rounds, poacher_estimates: None })
}

pub fn load_log(path: &Path) -> Result<GameLog> {
    read_log_jsonl(BufReader::new(File::open(path)?))
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::InvalidConfig(format!("csv: {other:?}")),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn site_headers(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// `label,seed,count,mean,std_dev,std_error,min,lower_whisker,q1,median,q3,upper_whisker,max`,
/// one row per labelled batch.
pub fn write_boxplot_csv<W: Write>(rows: &[(String, BatchStats)], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record([
        "label", "seed", "count", "mean", "std_dev", "std_error", "min", "lower_whisker", "q1", "median", "q3",
        "upper_whisker", "max",
    ])
    .map_err(csv_err)?;
    for (label, stats) in rows {
        let s = &stats.summary;
        let mut record = vec![label.clone(), stats.base_seed.to_string(), s.count.to_string()];
        record.extend(
            [s.mean, s.std_dev, s.std_error(), s.min, s.lower_whisker, s.q1, s.median, s.q3, s.upper_whisker, s.max]
                .map(fmt),
        );
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `repetition,seed,poacher_utility`: average poacher utility of each game.
pub fn write_repetitions_csv<W: Write>(stats: &BatchStats, out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["repetition", "seed", "poacher_utility"]).map_err(csv_err)?;
    for (k, u) in stats.per_repetition.iter().enumerate() {
        w.write_record([k.to_string(), repetition_seed(stats.base_seed, k).to_string(), fmt(*u)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `round,seed,site0,...`: one frequency vector per round, 1-based rounds.
pub fn write_trace_csv<W: Write>(trace: &[MixedStrategy], seed: u64, out: W) -> Result<()> {
    let n = trace.first().map_or(0, MixedStrategy::sites);
    let mut w = csv_writer(out);
    let header: Vec<String> = ["round".to_string(), "seed".to_string()].into_iter().chain(site_headers("site", n)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (t, f) in trace.iter().enumerate() {
        let mut record = vec![(t + 1).to_string(), seed.to_string()];
        record.extend(f.probs().iter().map(|&p| fmt(p)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `distribution,M,rounds,reps,seed,s=<s>...` followed by one
/// `se(s=<s>)` column per significance value; one row per table.
pub fn write_sweep_csv<W: Write>(tables: &[SweepTable], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    let Some(first) = tables.first() else {
        w.flush()?;
        return Ok(());
    };
    let s_values: Vec<u32> = first.rows.iter().map(|r| r.significance).collect();
    if let Some(t) = tables.iter().find(|t| t.rows.iter().map(|r| r.significance).ne(s_values.iter().copied())) {
        return Err(Error::InvalidConfig(format!("sweep over ({}) uses different s values", t.distribution)));
    }
    let mut header: Vec<String> = ["distribution", "M", "rounds", "reps", "seed"].map(String::from).to_vec();
    header.extend(s_values.iter().map(|s| format!("s={s}")));
    header.extend(s_values.iter().map(|s| format!("se(s={s})")));
    w.write_record(&header).map_err(csv_err)?;
    for t in tables {
        let mut record = vec![
            t.distribution.to_string(),
            t.memory.to_string(),
            t.rounds.to_string(),
            t.repetitions.to_string(),
            t.base_seed.to_string(),
        ];
        record.extend(t.rows.iter().map(|r| format!("{:.3}", r.mean)));
        record.extend(t.rows.iter().map(|r| format!("{:.4}", r.std_error)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `label,role,utility,pairs,stayed,stickiness`; stickiness is empty when
/// no pair had that utility.
pub fn write_stickiness_csv<W: Write>(tables: &[(String, StickinessTable)], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["label", "role", "utility", "pairs", "stayed", "stickiness"]).map_err(csv_err)?;
    for (label, table) in tables {
        for e in &table.entries {
            w.write_record([
                label.clone(),
                table.role.to_string(),
                e.utility.to_string(),
                e.pairs.to_string(),
                e.stayed.to_string(),
                fmt_opt(e.probability()),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `label,cluster,level,site0,...`, one row per frequency vector; `cluster`
/// is empty for vectors pre-assigned as stuck on one site.
pub fn write_clusters_csv<W: Write>(labels: &[String], report: &ClusterReport, out: W) -> Result<()> {
    if labels.len() != report.assignments.len() {
        return Err(Error::LengthMismatch { expected: report.assignments.len(), got: labels.len() });
    }
    let n = report.assignments.first().map_or(0, |a| a.frequencies.sites());
    let mut w = csv_writer(out);
    let header: Vec<String> = ["label".to_string(), "cluster".to_string(), "level".to_string()]
        .into_iter()
        .chain(site_headers("site", n))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for (label, a) in labels.iter().zip(&report.assignments) {
        let mut record = vec![label.clone(), a.cluster.map(|c| c.to_string()).unwrap_or_default(), a.level.to_string()];
        record.extend(a.frequencies.probs().iter().map(|&p| fmt(p)));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

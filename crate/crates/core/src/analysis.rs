//! Post-hoc analytics over game logs: stickiness, end-of-game frequency
//! vectors, and level-k clustering of those vectors.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::level2_distribution;
use crate::error::{Error, Result};
use crate::game::{MixedStrategy, RhinoDistribution, Role};
use crate::sim::{GameLog, LAST_WINDOW};

/// Utilities a round can end with, in table order.
pub const UTILITIES: [i8; 3] = [-1, 0, 1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StickinessEntry {
    pub utility: i8,
    /// Consecutive pairs where round `t` ended with `utility`.
    pub pairs: u64,
    /// Of those, pairs where the site at `t + 1` equals the site at `t`.
    pub stayed: u64,
}

impl StickinessEntry {
    /// `None` when no pair had this utility.
    pub fn probability(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.stayed as f64 / self.pairs as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickinessTable {
    pub role: Role,
    pub entries: [StickinessEntry; 3],
}

impl StickinessTable {
    pub fn get(&self, utility: i8) -> Option<&StickinessEntry> {
        self.entries.iter().find(|e| e.utility == utility)
    }

    pub fn probability(&self, utility: i8) -> Option<f64> {
        self.get(utility).and_then(StickinessEntry::probability)
    }

    pub fn total_pairs(&self) -> u64 {
        self.entries.iter().map(|e| e.pairs).sum()
    }
}

/// Probability of revisiting the same site, conditioned on the utility of
/// the earlier round, pooled over every consecutive pair in every log.
pub fn stickiness(logs: &[GameLog], role: Role) -> Result<StickinessTable> {
    if logs.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut entries = UTILITIES.map(|utility| StickinessEntry { utility, pairs: 0, stayed: 0 });
    for log in logs {
        if log.rounds.len() < 2 {
            return Err(Error::HorizonTooShort { needed: 2, got: log.rounds.len() });
        }
        for pair in log.rounds.windows(2) {
            let idx = (pair[0].utility(role) + 1) as usize;
            entries[idx].pairs += 1;
            entries[idx].stayed += (pair[0].site(role) == pair[1].site(role)) as u64;
        }
    }
    Ok(StickinessTable { role, entries })
}

/// Visit frequencies over the final 25 rounds.
pub fn last25_frequency(log: &GameLog, role: Role) -> Result<MixedStrategy> {
    if log.rounds.len() < LAST_WINDOW {
        return Err(Error::HorizonTooShort { needed: LAST_WINDOW, got: log.rounds.len() });
    }
    log.tail_frequencies(role, LAST_WINDOW)
}

/// L1 distance between two strategies.
pub fn strategy_distance(f: &MixedStrategy, g: &MixedStrategy) -> Result<f64> {
    if f.sites() != g.sites() {
        return Err(Error::LengthMismatch { expected: f.sites(), got: g.sites() });
    }
    Ok(l1(f.probs(), g.probs()))
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn squared_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "level-0")]
    Level0,
    #[serde(rename = "level-1")]
    Level1,
    #[serde(rename = "level-2")]
    Level2,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Level0 => "level-0",
            Level::Level1 => "level-1",
            Level::Level2 => "level-2",
        })
    }
}

/// Reference strategy for each level: uniform, probability matching, and
/// utility matching against a probability-matching ranger.
pub fn canonical_strategies(d: &RhinoDistribution) -> [(Level, MixedStrategy); 3] {
    [
        (Level::Level0, MixedStrategy::uniform(d.sites())),
        (Level::Level1, d.probability_matching()),
        (Level::Level2, level2_distribution(d)),
    ]
}

fn nearest_level(point: &[f64], canon: &[(Level, MixedStrategy); 3]) -> Level {
    canon
        .iter()
        .min_by(|a, b| l1(point, a.1.probs()).total_cmp(&l1(point, b.1.probs())))
        .map(|(level, _)| *level)
        .expect("three canonical strategies")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAssignment {
    /// k-means cluster, or `None` for vectors pre-assigned as stuck on one site.
    pub cluster: Option<usize>,
    pub level: Level,
    pub frequencies: MixedStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub assignments: Vec<LevelAssignment>,
    pub centroids: Vec<Vec<f64>>,
    pub centroid_levels: Vec<Level>,
    /// Number of distinct non-empty clusters actually found.
    pub effective_clusters: usize,
    pub inertia: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub k: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    /// Vectors whose largest entry reaches this are labelled level-0 up front.
    pub sticky_threshold: f64,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self { k: 3, restarts: 20, max_iterations: 100, sticky_threshold: 0.9, seed: 0 }
    }
}

/// Groups frequency vectors with k-means and labels each cluster by the
/// nearest canonical level strategy.
pub fn cluster_levels(vectors: &[MixedStrategy], d: &RhinoDistribution, options: &ClusterOptions) -> Result<ClusterReport> {
    if vectors.len() < options.k || options.k == 0 {
        return Err(Error::TooFewVectors { needed: options.k.max(1), got: vectors.len() });
    }
    if let Some(v) = vectors.iter().find(|v| v.sites() != d.sites()) {
        return Err(Error::LengthMismatch { expected: d.sites(), got: v.sites() });
    }
    let canon = canonical_strategies(d);
    let (sticky, free): (Vec<usize>, Vec<usize>) = (0..vectors.len())
        .partition(|&i| vectors[i].probs().iter().copied().fold(0.0, f64::max) >= options.sticky_threshold);

    let points: Vec<&[f64]> = free.iter().map(|&i| vectors[i].probs()).collect();
    let fit = kmeans(&points, options);
    let centroid_levels: Vec<Level> = fit.centroids.iter().map(|c| nearest_level(c, &canon)).collect();

    let mut assignments: Vec<Option<LevelAssignment>> = vec![None; vectors.len()];
    for i in sticky {
        assignments[i] = Some(LevelAssignment { cluster: None, level: Level::Level0, frequencies: vectors[i].clone() });
    }
    for (slot, &i) in free.iter().enumerate() {
        let cluster = fit.labels[slot];
        assignments[i] = Some(LevelAssignment {
            cluster: Some(cluster),
            level: centroid_levels[cluster],
            frequencies: vectors[i].clone(),
        });
    }
    Ok(ClusterReport {
        assignments: assignments.into_iter().map(|a| a.expect("every vector assigned")).collect(),
        effective_clusters: fit.centroids.len(),
        centroids: fit.centroids,
        centroid_levels,
        inertia: fit.inertia,
    })
}

struct KMeansFit {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
}

// Lloyd iterations from k-means++ seeds, best of `restarts`. Empty and
// duplicate centroids are dropped, so fewer than k clusters may come back.
fn kmeans(points: &[&[f64]], options: &ClusterOptions) -> KMeansFit {
    if points.is_empty() {
        return KMeansFit { centroids: vec![], labels: vec![], inertia: 0.0 };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..options.restarts.max(1) {
        let fit = lloyd(points, seed_centroids(points, options.k, &mut rng), options.max_iterations);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia - 1e-12) {
            best = Some(fit);
        }
    }
    compact(best.expect("at least one restart"))
}

fn seed_centroids<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| squared_l2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        // all points coincide with a centroid: duplicates get dropped later
        let next = crate::game::sample_weighted(&weights, rng);
        centroids.push(points[next].to_vec());
    }
    centroids
}

fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>, max_iterations: usize) -> KMeansFit {
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let nearest = (0..centroids.len())
                .min_by(|&a, &b| squared_l2(p, &centroids[a]).total_cmp(&squared_l2(p, &centroids[b])))
                .expect("k >= 1");
            changed |= *label != nearest;
            *label = nearest;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut sizes = vec![0usize; centroids.len()];
        for (&label, p) in labels.iter().zip(points) {
            sizes[label] += 1;
            sums[label].iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
        }
        for ((c, sum), &size) in centroids.iter_mut().zip(sums).zip(&sizes) {
            if size > 0 {
                *c = sum.into_iter().map(|s| s / size as f64).collect();
            }
        }
    }
    let inertia = labels.iter().zip(points).map(|(&l, p)| squared_l2(p, &centroids[l])).sum();
    KMeansFit { centroids, labels, inertia }
}

fn compact(fit: KMeansFit) -> KMeansFit {
    let mut remap = vec![usize::MAX; fit.centroids.len()];
    let mut centroids: Vec<Vec<f64>> = Vec::new();
    for (old, c) in fit.centroids.iter().enumerate() {
        if !fit.labels.contains(&old) {
            continue;
        }
        match centroids.iter().position(|kept| squared_l2(kept, c) < 1e-18) {
            Some(existing) => remap[old] = existing,
            None => {
                remap[old] = centroids.len();
                centroids.push(c.clone());
            }
        }
    }
    let labels = fit.labels.iter().map(|&l| remap[l]).collect();
    KMeansFit { centroids, labels, inertia: fit.inertia }
}

//! One pass/fail line per primary acceptance criterion.
//!
//! Run with `cargo test --release -p poachlab-cli --test acceptance -- --nocapture`.
//! Every randomized check uses the same seed, [`SEED`].

use std::process::Command;
use std::time::{Duration, Instant};

use poachlab_core::agents::{pfa_transition, BoundedMemory};
use poachlab_core::analysis::stickiness;
use poachlab_core::equilibrium::maximin_oracle;
use poachlab_core::sim::{run_batch, run_batch_logs, run_game_with, significance_sweep, RunOptions};
use poachlab_core::{run_game, solve_stage_ne, AgentSpec, GameConfig, GameLog, MixedStrategy, RhinoDistribution, Role};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;

fn d(v: &[f64]) -> RhinoDistribution {
    RhinoDistribution::new(v.to_vec()).unwrap()
}

fn spec(s: &str) -> AgentSpec {
    s.parse().unwrap()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn fmt(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("({})", parts.join(", "))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn ne_vs_published() -> Outcome {
    let start = Instant::now();
    let ne = solve_stage_ne(&d(&[0.2, 0.4, 0.6, 0.8]));
    let elapsed = start.elapsed();
    let published = [0.08, 0.22, 0.31, 0.39];
    let off: Vec<usize> = (0..4).filter(|&i| (ne.ranger_strategy.get(i) - published[i]).abs() > 0.005).collect();
    let value_ok = (ne.value - 0.0996).abs() <= 0.005;
    let fast = elapsed < Duration::from_millis(10);
    outcome(
        off.is_empty() && value_ok && fast,
        format!(
            "ranger {} vs {}, value {:.5} vs 0.0996, {:?}; components outside 0.005: {off:?}",
            fmt(ne.ranger_strategy.probs(), 5),
            fmt(&published, 2),
            ne.value,
            elapsed
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_value, mut worst_l1) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let dist = RhinoDistribution::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let ne = solve_stage_ne(&dist);
        let lp = maximin_oracle(&dist).unwrap();
        worst_value = worst_value.max((ne.value - lp.value).abs());
        worst_l1 = worst_l1
            .max(l1(ne.ranger_strategy.probs(), lp.ranger_strategy.probs()))
            .max(l1(ne.poacher_strategy.probs(), lp.poacher_strategy.probs()));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_value <= 1e-3 && worst_l1 <= 0.02 && elapsed < Duration::from_secs(60),
        format!("100 distributions, max value gap {worst_value:.1e}, max strategy L1 {worst_l1:.1e}, {elapsed:.1?}"),
    )
}

fn sweep_matches_published() -> Outcome {
    let rows: [(&[f64], [f64; 5]); 4] = [
        (&[0.2, 0.4, 0.6, 0.8], [0.098, 0.165, 0.188, 0.203, 0.205]),
        (&[0.3, 0.8, 0.7, 0.5], [0.165, 0.233, 0.259, 0.271, 0.275]),
        (&[0.9, 0.9, 0.9], [0.267, 0.375, 0.415, 0.425, 0.435]),
        (&[0.9, 0.6, 0.4, 0.9], [0.509, 0.605, 0.626, 0.641, 0.652]),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (dist, published) in rows {
        let table = significance_sweep(&d(dist), &[0, 1, 2, 3, 4], 1000, 1000, 100, SEED).unwrap();
        let means: Vec<f64> = table.rows.iter().map(|r| r.mean).collect();
        let misses = means.iter().zip(published).filter(|(m, p)| (*m - p).abs() > 0.03).count();
        // one-sided: a drop counts only if it is significant at 95%
        let decreasing = table.rows.windows(2).any(|w| {
            let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            w[1].mean < w[0].mean - 1.645 * se
        });
        pass &= misses == 0 && !decreasing;
        details.push(format!(
            "({}) {} vs {}{}{}",
            d(dist),
            fmt(&means, 3),
            fmt(&published, 3),
            if misses > 0 { format!(" [{misses} cells off]") } else { String::new() },
            if decreasing { " [decreasing]" } else { "" }
        ));
    }
    outcome(pass, format!("poacher PFA(1000,s) vs ranger PFA(1000,0): {}", details.join("; ")))
}

fn stickiness_matches_published() -> Outcome {
    let presets: [&[f64]; 4] = [&[0.9, 0.6, 0.2], &[0.9, 0.6, 0.4, 0.9, 0.1], &[0.8, 0.3, 0.8, 0.3], &[0.3, 0.8, 0.7, 0.5]];
    let rows = [((2, 0), [0.0040, 0.7479, 0.8756]), ((2, 1), [0.0, 0.7416, 0.8653]), ((10, 0), [0.4323, 0.8488, 0.9238]), ((10, 1), [0.1021, 0.8250, 0.9117])];
    let mut pass = true;
    let mut details = Vec::new();
    for ((memory, s), published) in rows {
        let logs: Vec<GameLog> = presets
            .iter()
            .flat_map(|dist| {
                let config = GameConfig::new(d(dist), 100, AgentSpec::pfa(memory, s), AgentSpec::pfa(100, 0), SEED);
                run_batch_logs(&config, 250, SEED).unwrap()
            })
            .collect();
        let table = stickiness(&logs, Role::Poacher).unwrap();
        let got = [-1, 0, 1].map(|u| table.probability(u).unwrap_or(f64::NAN));
        let mut ok = got.iter().zip(published).all(|(g, p)| (g - p).abs() <= 0.05);
        if (memory, s) == (2, 1) {
            ok &= got[0] == 0.0;
        }
        pass &= ok;
        details.push(format!("PFA({memory},{s}) {} vs {}{}", fmt(&got, 4), fmt(&published, 4), if ok { "" } else { " [off]" }));
    }
    outcome(pass, format!("{} games over presets a-d: {}", 4 * 250, details.join("; ")))
}

fn robinson() -> Outcome {
    let dist = d(&[0.2, 0.4, 0.6, 0.8]);
    let ne = solve_stage_ne(&dist);
    let log = run_game(&GameConfig::new(dist, 10_000, spec("fp"), spec("fp"), SEED)).unwrap();
    let poacher = l1(log.frequencies(Role::Poacher).unwrap().probs(), ne.poacher_strategy.probs());
    let ranger = l1(log.frequencies(Role::Ranger).unwrap().probs(), ne.ranger_strategy.probs());
    outcome(poacher < 0.05 && ranger < 0.05, format!("L1 to equilibrium after 10^4 rounds: poacher {poacher:.4}, ranger {ranger:.4}"))
}

fn mean_poacher_frequency(config: &GameConfig, reps: usize) -> Vec<f64> {
    let stats = run_batch(config, reps, SEED).unwrap();
    stats.poacher_frequencies.probs().to_vec()
}

fn memory_drift() -> Outcome {
    let dist = d(&[0.2, 0.4, 0.6, 0.8]);
    let ne = solve_stage_ne(&dist);
    let pm = dist.probability_matching();
    let freq = |m: u32| mean_poacher_frequency(&GameConfig::new(dist.clone(), 1000, AgentSpec::pfa(m, 0), AgentSpec::pfa(m, 0), SEED), 100);
    let small = freq(10);
    let large = freq(1000);
    let (small_pm, small_ne) = (l1(&small, pm.probs()), l1(&small, ne.poacher_strategy.probs()));
    let large_ne = l1(&large, ne.poacher_strategy.probs());
    outcome(
        small_pm < small_ne && large_ne < small_ne,
        format!("M=10 {} L1 to PM {small_pm:.3}, to NE {small_ne:.3}; M=1000 {} L1 to NE {large_ne:.3}", fmt(&small, 3), fmt(&large, 3)),
    )
}

fn adaptive_ranger() -> Outcome {
    let dist = d(&[0.2, 0.4, 0.6, 0.8]);
    let value = solve_stage_ne(&dist).value;
    let batch = |poacher: &str, ranger: &str| {
        run_batch(&GameConfig::new(dist.clone(), 1000, spec(poacher), spec(ranger), SEED), 100, SEED).unwrap()
    };
    let pfa = batch("pfa:M=10,s=1", "fp");
    let ne = batch("ne", "fp");
    let z = (pfa.mean() - ne.mean()) / (pfa.summary.std_error().powi(2) + ne.summary.std_error().powi(2)).sqrt();
    let poachers = ["ne", "fp", "mwu", "um", "pfa:M=100,s=0", "pfa:M=100,s=1", "pfa:M=10,s=0", "pfa:M=10,s=1"];
    let mut worst = (0.0f64, String::new());
    for ranger in ["ne", "pm"] {
        for poacher in poachers {
            let gap = (batch(poacher, ranger).mean() - value).abs();
            if gap > worst.0 {
                worst = (gap, format!("{poacher} vs {ranger}"));
            }
        }
    }
    outcome(
        z > 1.645 && worst.0 <= 0.03,
        format!(
            "vs FP: PFA(10,1) {:.4} vs NE {:.4} (z = {z:.1}); vs NE/PM rangers max |mean - {value:.4}| = {:.4} ({})",
            pfa.mean(),
            ne.mean(),
            worst.0,
            worst.1
        ),
    )
}

fn estimator() -> Outcome {
    let dist = d(&[0.2, 0.3, 0.5]);
    let truth = dist.probability_matching();
    let mut pass = true;
    let mut sds = Vec::new();
    let mut details = Vec::new();
    for m in [10, 100] {
        let config = GameConfig::new(dist.clone(), 1000, AgentSpec::pfa(m, 0), spec("pm"), SEED);
        let log = run_game_with(&config, &RunOptions { record_estimates: true }).unwrap();
        let estimates: Vec<MixedStrategy> =
            log.poacher_estimates.unwrap()[199..].iter().map(|e| e.clone().expect("memory is non-empty")).collect();
        let count = estimates.len() as f64;
        let mean: Vec<f64> = (0..3).map(|i| estimates.iter().map(|e| e.get(i)).sum::<f64>() / count).collect();
        let sd: Vec<f64> = (0..3)
            .map(|i| (estimates.iter().map(|e| (e.get(i) - mean[i]).powi(2)).sum::<f64>() / (count - 1.0)).sqrt())
            .collect();
        let ok = mean.iter().zip(truth.probs()).all(|(m, t)| (m - t).abs() <= 0.02);
        pass &= ok;
        details.push(format!("M={m} mean {} sd {}", fmt(&mean, 3), fmt(&sd, 3)));
        sds.push(sd);
    }
    let wider = (0..3).all(|i| sds[0][i] > sds[1][i]);
    outcome(pass && wider, format!("rounds 200-1000 vs truth (0.2, 0.3, 0.5): {}", details.join("; ")))
}

fn memory_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut violations = 0u64;
    let mut transitions = 0u64;
    while transitions < 1_000_000 {
        let n = rng.random_range(2..=6);
        let capacity = rng.random_range(1..=200u32);
        let s = rng.random_range(0..=4u32);
        let mut memory = BoundedMemory::new(n, capacity).unwrap();
        for _ in 0..1000 {
            let was_full = memory.is_full();
            memory = pfa_transition(&memory, rng.random_range(0..n), rng.random_range(-1..=1), s, &mut rng).unwrap();
            // counts are unsigned, so nonnegativity is checked by construction
            if memory.total() > capacity || (was_full && memory.total() != capacity) {
                violations += 1;
            }
            transitions += 1;
        }
    }
    outcome(violations == 0, format!("{transitions} transitions, {violations} violations"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_poachlab"))
            .args(["run", "--dist", "0.3,0.8,0.7,0.5", "--rounds", "1000", "--poacher", "pfa:M=10,s=1", "--ranger", "mwu"])
            .args(["--seed", &SEED.to_string(), "--out", path.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.jsonl"), run("b.jsonl"));
    outcome(a == b, format!("two runs, {} and {} bytes, identical: {}", a.len(), b.len(), a == b))
}

#[test]
fn primary_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Equilibrium vs published values", ne_vs_published),
        ("Oracle equivalence", oracle_equivalence),
        ("Significance sweep", sweep_matches_published),
        ("Stickiness table", stickiness_matches_published),
        ("Robinson convergence", robinson),
        ("Memory effect", memory_drift),
        ("Adaptive-ranger effect", adaptive_ranger),
        ("Estimator accuracy", estimator),
        ("Memory invariant fuzzing", memory_fuzz),
        ("Determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let result = check();
        println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
        if !result.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

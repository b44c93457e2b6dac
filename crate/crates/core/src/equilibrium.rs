//! The stage game's unique equilibrium, best responses, and an LP oracle.
//!
//! In equilibrium the ranger covers site `i` with `r_i = (d_i - v)/(1 + d_i)`
//! and the poacher visits it with probability proportional to `1/(1 + d_i)`,
//! on the support `{i : d_i > v}`. The support is found by water-filling
//! over sites sorted by rhino probability.

use std::collections::BTreeSet;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{poacher_payoff, ranger_payoff, MixedStrategy, RhinoDistribution, Site};

/// Utilities within this distance of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Probabilities below this are treated as outside an LP solution's support.
const ORACLE_SUPPORT_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub poacher_strategy: MixedStrategy,
    pub ranger_strategy: MixedStrategy,
    /// The poacher's expected utility; the ranger gets `-value`.
    pub value: f64,
    pub support: BTreeSet<Site>,
}

/// Closed-form equilibrium by water-filling, `O(n log n)`.
pub fn solve_stage_ne(d: &RhinoDistribution) -> EquilibriumResult {
    let probs = d.as_slice();
    let n = probs.len();
    let mut order: Vec<Site> = (0..n).collect();
    // stable sort keeps index order among equal probabilities
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));

    let mut weighted_sum = 0.0;
    let mut inverse_sum = 0.0;
    let mut value = f64::NAN;
    let mut support_len = n;
    for (k, &site) in order.iter().enumerate() {
        let di = probs[site];
        weighted_sum += di / (1.0 + di);
        inverse_sum += 1.0 / (1.0 + di);
        // Σ_{i∈S} (d_i - v)/(1 + d_i) = 1
        value = (weighted_sum - 1.0) / inverse_sum;
        let next_excluded = order.get(k + 1).map_or(true, |&next| probs[next] <= value);
        if next_excluded {
            support_len = k + 1;
            break;
        }
    }

    let support: BTreeSet<Site> = order[..support_len].iter().copied().collect();
    let mut ranger = vec![0.0; n];
    let mut poacher = vec![0.0; n];
    for &site in &support {
        let di = probs[site];
        ranger[site] = ((di - value) / (1.0 + di)).max(0.0);
        poacher[site] = 1.0 / (1.0 + di);
    }
    EquilibriumResult {
        poacher_strategy: MixedStrategy::from_weights(poacher),
        ranger_strategy: MixedStrategy::from_weights(ranger),
        value,
        support,
    }
}

/// Maximin strategies of both players from two linear programs over the
/// full payoff matrix, with no use of the closed form.
///
/// The poacher program maximizes `v` subject to `Σ_i p_i A_ij ≥ v` for every
/// ranger column `j`; the ranger program minimizes `w` subject to
/// `Σ_j A_ij r_j ≤ w` for every poacher row `i`. The reported value is the
/// poacher program's optimum; the two optima must agree within `1e-6`.
pub fn maximin_oracle(d: &RhinoDistribution) -> Result<EquilibriumResult> {
    let n = d.sites();
    let payoff = |i: Site, j: Site| if i == j { -1.0 } else { d.get(i) };

    let mut poacher_lp = Problem::new(OptimizationDirection::Maximize);
    let p: Vec<_> = (0..n).map(|_| poacher_lp.add_var(0.0, (0.0, 1.0))).collect();
    let v = poacher_lp.add_var(1.0, (-2.0, 2.0));
    for j in 0..n {
        let mut expr: Vec<_> = (0..n).map(|i| (p[i], payoff(i, j))).collect();
        expr.push((v, -1.0));
        poacher_lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    poacher_lp.add_constraint(p.iter().map(|&x| (x, 1.0)), ComparisonOp::Eq, 1.0);

    let mut ranger_lp = Problem::new(OptimizationDirection::Minimize);
    let r: Vec<_> = (0..n).map(|_| ranger_lp.add_var(0.0, (0.0, 1.0))).collect();
    let w = ranger_lp.add_var(1.0, (-2.0, 2.0));
    for i in 0..n {
        let mut expr: Vec<_> = (0..n).map(|j| (r[j], payoff(i, j))).collect();
        expr.push((w, -1.0));
        ranger_lp.add_constraint(expr, ComparisonOp::Le, 0.0);
    }
    ranger_lp.add_constraint(r.iter().map(|&x| (x, 1.0)), ComparisonOp::Eq, 1.0);

    let solve = |problem: &Problem| {
        problem
            .solve()
            .map_err(|e| Error::Oracle(format!("{e:?}")))?
            .into_solution()
            .map_err(|_| Error::Oracle("solver interrupted".into()))
    };
    let poacher_solution = solve(&poacher_lp)?;
    let ranger_solution = solve(&ranger_lp)?;
    let value = poacher_solution.objective();
    let ranger_value = ranger_solution.objective();
    if (value - ranger_value).abs() > 1e-6 {
        return Err(Error::Oracle(format!(
            "primal {value} and dual {ranger_value} values disagree"
        )));
    }

    let clean = |xs: Vec<f64>| MixedStrategy::from_weights(xs.into_iter().map(|x| x.max(0.0)).collect());
    let poacher_strategy = clean(p.iter().map(|&x| poacher_solution.var_value(x)).collect());
    let ranger_strategy = clean(r.iter().map(|&x| ranger_solution.var_value(x)).collect());
    let support = (0..n)
        .filter(|&i| {
            poacher_strategy.get(i) > ORACLE_SUPPORT_EPS || ranger_strategy.get(i) > ORACLE_SUPPORT_EPS
        })
        .collect();
    Ok(EquilibriumResult { poacher_strategy, ranger_strategy, value, support })
}

/// Sites maximizing the poacher's expected utility against `estimate`.
pub fn best_response_poacher(estimate: &MixedStrategy, d: &RhinoDistribution) -> Result<Vec<Site>> {
    check_len(estimate, d)?;
    Ok(argmax_sites(d.sites(), |i| poacher_payoff(i, estimate.probs(), d.as_slice())))
}

/// Sites maximizing the ranger's expected utility against `estimate`.
pub fn best_response_ranger(estimate: &MixedStrategy, d: &RhinoDistribution) -> Result<Vec<Site>> {
    check_len(estimate, d)?;
    Ok(argmax_sites(d.sites(), |i| ranger_payoff(i, estimate.probs(), d.as_slice())))
}

fn check_len(estimate: &MixedStrategy, d: &RhinoDistribution) -> Result<()> {
    if estimate.sites() != d.sites() {
        return Err(Error::LengthMismatch { expected: d.sites(), got: estimate.sites() });
    }
    Ok(())
}

/// All indices whose score is within [`TIE_TOLERANCE`] of the maximum.
pub(crate) fn argmax_sites(n: usize, mut score: impl FnMut(Site) -> f64) -> Vec<Site> {
    let scores: Vec<f64> = (0..n).map(&mut score).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..n).filter(|&i| scores[i] >= best - TIE_TOLERANCE).collect()
}

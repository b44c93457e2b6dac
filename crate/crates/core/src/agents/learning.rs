//! Non-best-response update rules: exponential weights, utility matching,
//! and the level-2 strategy derived from them.

use crate::game::{poacher_payoff, ranger_payoff, MixedStrategy, RhinoDistribution, Role, Site};

/// Expected utility of each own site against an opponent strategy.
pub fn expected_utilities(estimate: &MixedStrategy, d: &RhinoDistribution, role: Role) -> Vec<f64> {
    (0..d.sites())
        .map(|i| match role {
            Role::Poacher => poacher_payoff(i, estimate.probs(), d.as_slice()),
            Role::Ranger => ranger_payoff(i, estimate.probs(), d.as_slice()),
        })
        .collect()
}

/// Multiplies each weight by `exp(eta · u_i)`, where `u_i` is the expected
/// payoff own site `i` would have earned against the opponent's observed site.
pub fn mwu_update(
    weights: &[f64],
    opponent_site: Site,
    d: &RhinoDistribution,
    role: Role,
    eta: f64,
) -> Vec<f64> {
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u = match role {
                Role::Poacher if i == opponent_site => -1.0,
                Role::Poacher => d.get(i),
                Role::Ranger if i == opponent_site => 1.0,
                Role::Ranger => -d.get(opponent_site),
            };
            w * (eta * u).exp()
        })
        .collect()
}

/// Visits each site with probability proportional to its positive expected
/// utility; uniform when no site has positive utility.
pub fn util_match_distribution(estimate: &MixedStrategy, d: &RhinoDistribution, role: Role) -> MixedStrategy {
    let clamped = expected_utilities(estimate, d, role).into_iter().map(|u| u.max(0.0)).collect();
    MixedStrategy::from_weights(clamped)
}

/// Utility matching against a probability-matching ranger.
pub fn level2_distribution(d: &RhinoDistribution) -> MixedStrategy {
    util_match_distribution(&d.probability_matching(), d, Role::Poacher)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: &[f64]) -> RhinoDistribution {
        RhinoDistribution::new(v.to_vec()).unwrap()
    }

    fn normalized(w: &[f64]) -> Vec<f64> {
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect()
    }

    #[test]
    fn mwu_shrinks_colliding_action() {
        let w = mwu_update(&[1.0; 3], 1, &d(&[0.5; 3]), Role::Poacher, 0.1);
        assert!(w[1] < w[0] && w[0] == w[2]);
        let w = mwu_update(&[1.0; 3], 1, &d(&[0.5; 3]), Role::Ranger, 0.1);
        assert!(w[1] > w[0] && w[0] == w[2]);
    }

    #[test]
    fn mwu_zero_rate_is_identity() {
        let w = [0.3, 1.7, 2.0];
        assert_eq!(mwu_update(&w, 0, &d(&[0.2, 0.4, 0.6]), Role::Poacher, 0.0), w.to_vec());
    }

    #[test]
    fn mwu_two_site_example() {
        let w = mwu_update(&[1.0, 1.0], 0, &d(&[0.5, 0.5]), Role::Poacher, 0.1);
        assert!((w[0] - (-0.1f64).exp()).abs() < 1e-12);
        assert!((w[1] - 0.05f64.exp()).abs() < 1e-12);
        let p = normalized(&w);
        assert!((p[0] - 0.4626).abs() < 1e-4 && (p[1] - 0.5374).abs() < 1e-4);
    }

    #[test]
    fn util_match_examples() {
        let dist = d(&[0.9, 0.6, 0.2]);
        let um = util_match_distribution(&MixedStrategy::pure(3, 2), &dist, Role::Poacher);
        assert!((um.get(0) - 0.6).abs() < 1e-12 && (um.get(1) - 0.4).abs() < 1e-12);
        assert_eq!(um.get(2), 0.0);

        let hopeless = util_match_distribution(&MixedStrategy::uniform(2), &d(&[0.0, 0.0]), Role::Poacher);
        assert_eq!(hopeless.probs(), &[0.5, 0.5]);

        let dist = d(&[0.0, 0.7]);
        let um = util_match_distribution(&MixedStrategy::pure(2, 0), &dist, Role::Poacher);
        assert_eq!(um.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn level2_examples() {
        assert_eq!(level2_distribution(&d(&[0.5, 0.5])).probs(), &[0.5, 0.5]);
        assert_eq!(level2_distribution(&d(&[1.0, 0.0])).probs(), &[0.5, 0.5]);
        // PM ranger (9, 6, 2)/17 leaves utilities (-1.8, 0.6, 1)/17
        let l2 = level2_distribution(&d(&[0.9, 0.6, 0.2]));
        assert_eq!(l2.get(0), 0.0);
        assert!((l2.get(1) - 0.375).abs() < 1e-12 && (l2.get(2) - 0.625).abs() < 1e-12);
    }
}

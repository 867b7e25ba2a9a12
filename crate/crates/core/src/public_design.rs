//! Public signaling: policies broadcast to every participant, their equilibria and design.

use crate::design::{self, DesignMode, DesignOptions, DesignSolution};
use crate::equilibrium;
use crate::error::{Error, Result};
use crate::game;
use crate::scenario::RoutingScenario;

/// `s x m` row-stochastic message matrix `pi(k|w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicPolicy {
    weights: Vec<Vec<f64>>,
}

impl PublicPolicy {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let m = weights.first().map_or(0, |r| r.len());
        if m == 0 {
            return Err(Error::Validation("a public policy needs at least one message".into()));
        }
        game::check_weights(&weights, weights.len(), m)?;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn message_count(&self) -> usize {
        self.weights[0].len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonicalKind {
    FullInformation,
    NoInformation,
}

/// Full information reveals the state; no information always sends the first message.
pub fn canonical_policy(kind: CanonicalKind, s: usize, m: usize) -> Result<PublicPolicy> {
    if s == 0 || m == 0 {
        return Err(Error::Validation("states and messages must be positive".into()));
    }
    let weights = match kind {
        CanonicalKind::FullInformation => {
            if m != s {
                return Err(Error::Validation(format!(
                    "full information needs one message per state ({s}), got {m}"
                )));
            }
            (0..s).map(|w| (0..m).map(|k| if k == w { 1.0 } else { 0.0 }).collect()).collect()
        }
        CanonicalKind::NoInformation => {
            (0..s).map(|_| (0..m).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect()).collect()
        }
    };
    PublicPolicy::new(weights)
}

/// Per-message obedience residuals `x^k_i Delta^k_ij` and Nash residuals `y_i sum_k Delta^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicResiduals {
    /// Indexed `[k][i][j]`.
    pub obedience: Vec<Vec<Vec<f64>>>,
    pub nash: Vec<Vec<f64>>,
}

impl PublicResiduals {
    pub fn max_obedience(&self) -> f64 {
        self.obedience.iter().flatten().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_nash(&self) -> f64 {
        self.nash.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.max_obedience().max(self.max_nash())
    }
}

pub fn public_residuals(
    scenario: &RoutingScenario,
    policy: &PublicPolicy,
    atoms: &[Vec<f64>],
    y: &[f64],
) -> Result<PublicResiduals> {
    game::check_profile(scenario, atoms, policy.weights(), y)?;
    let gaps = game::latency_gaps(scenario, atoms, policy.weights(), y);
    let n = scenario.num_routes();
    let obedience = atoms
        .iter()
        .zip(&gaps)
        .map(|(x, g)| (0..n).map(|i| (0..n).map(|j| x[i] * g[i][j]).collect()).collect())
        .collect();
    let nash = (0..n)
        .map(|i| (0..n).map(|j| y[i] * gaps.iter().map(|g| g[i][j]).sum::<f64>()).collect())
        .collect();
    Ok(PublicResiduals { obedience, nash })
}

/// Social cost of a fixed public policy at its Bayes Nash flow.
pub fn evaluate_public(scenario: &RoutingScenario, policy: &PublicPolicy, nu: f64) -> Result<f64> {
    let eq = equilibrium::bne_indirect(scenario, policy, nu)?;
    equilibrium::social_cost(scenario, &eq.atoms(), policy.weights(), eq.y())
}

/// Best multistart local solution of the public design with `m` messages.
pub fn optimize_public(
    scenario: &RoutingScenario,
    nu: f64,
    m: usize,
    starts: usize,
    seed: u64,
) -> Result<DesignSolution> {
    optimize_public_with(scenario, nu, m, &DesignOptions::new(starts, seed))
}

pub fn optimize_public_with(
    scenario: &RoutingScenario,
    nu: f64,
    m: usize,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    let mut o = opts.clone();
    let mut warm = crate::private_design::canonical_profiles(scenario, nu, m)?;
    warm.extend(opts.warm_starts.iter().filter_map(|p| design::pad_profile(p, m)));
    o.warm_starts = warm;
    design::multistart(scenario, DesignMode::Public, nu, m, &o)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_matrices() {
        let full = canonical_policy(CanonicalKind::FullInformation, 2, 2).unwrap();
        assert_eq!(full.weights(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let none = canonical_policy(CanonicalKind::NoInformation, 2, 1).unwrap();
        assert_eq!(none.weights(), &[vec![1.0], vec![1.0]]);
        let none3 = canonical_policy(CanonicalKind::NoInformation, 3, 2).unwrap();
        assert!(none3.weights().iter().all(|r| r == &vec![1.0, 0.0]));
        assert!(canonical_policy(CanonicalKind::FullInformation, 2, 3).is_err());
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(PublicPolicy::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(PublicPolicy::new(vec![vec![1.2, -0.2]]).is_err());
    }
}

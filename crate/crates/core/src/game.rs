//! Shared evaluation of atom-supported flow profiles: cost and expected latency gaps.

use crate::error::{Error, Result};
use crate::scenario::{RoutingScenario, StateEval};

/// Row-stochastic tolerance for weight matrices.
pub const ROW_TOL: f64 = 1e-9;

pub(crate) fn check_weights(weights: &[Vec<f64>], s: usize, m: usize) -> Result<()> {
    if weights.len() != s {
        return Err(Error::Dimension { expected: s, got: weights.len() });
    }
    for row in weights {
        if row.len() != m {
            return Err(Error::Dimension { expected: m, got: row.len() });
        }
        if row.iter().any(|&p| !p.is_finite() || p < -ROW_TOL) {
            return Err(Error::Validation("weights must be non-negative".into()));
        }
        let total: f64 = row.iter().sum();
        if (total - 1.0).abs() > ROW_TOL {
            return Err(Error::Validation(format!("weight row sums to {total}, not 1")));
        }
    }
    Ok(())
}

pub(crate) fn check_profile(
    scenario: &RoutingScenario,
    atoms: &[Vec<f64>],
    weights: &[Vec<f64>],
    y: &[f64],
) -> Result<()> {
    let n = scenario.num_routes();
    check_weights(weights, scenario.num_states(), atoms.len())?;
    for a in atoms {
        if a.len() != n {
            return Err(Error::Dimension { expected: n, got: a.len() });
        }
    }
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    Ok(())
}

/// Expected total latency `sum_{k,w} pi(k|w) mu0(w) sum_e F_e l_{w,e}(F_e)` at `F = x^k + y`.
pub(crate) fn cost_unchecked(
    scenario: &RoutingScenario,
    atoms: &[Vec<f64>],
    weights: &[Vec<f64>],
    y: &[f64],
) -> f64 {
    let mut ev = StateEval::new(scenario);
    let mut f = vec![0.0; y.len()];
    let mut total = 0.0;
    for (k, x) in atoms.iter().enumerate() {
        for i in 0..f.len() {
            f[i] = x[i] + y[i];
        }
        for (w, &mu) in scenario.prior().iter().enumerate() {
            let p = weights[w][k] * mu;
            if p == 0.0 {
                continue;
            }
            ev.evaluate(scenario, w, &f);
            total += p * ev.total;
        }
    }
    total
}

/// Expected latency gaps `Delta^k_ij = sum_w pi(k|w) mu0(w) (c_{w,i} - c_{w,j})` at `x^k + y`.
pub(crate) fn latency_gaps(
    scenario: &RoutingScenario,
    atoms: &[Vec<f64>],
    weights: &[Vec<f64>],
    y: &[f64],
) -> Vec<Vec<Vec<f64>>> {
    let n = scenario.num_routes();
    let mut ev = StateEval::new(scenario);
    let mut f = vec![0.0; n];
    let mut out = Vec::with_capacity(atoms.len());
    for (k, x) in atoms.iter().enumerate() {
        for i in 0..n {
            f[i] = x[i] + y[i];
        }
        let mut c = vec![0.0; n];
        for (w, &mu) in scenario.prior().iter().enumerate() {
            let p = weights[w][k] * mu;
            if p == 0.0 {
                continue;
            }
            ev.evaluate(scenario, w, &f);
            for i in 0..n {
                c[i] += p * ev.route_lat[i];
            }
        }
        out.push((0..n).map(|i| (0..n).map(|j| c[i] - c[j]).collect()).collect());
    }
    out
}

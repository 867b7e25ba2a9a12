//! Bayes Nash flows as minimizers of convex potentials, and the first-best benchmark.

use crate::error::{Error, Result};
use crate::game;
use crate::private_design::AtomicPrivatePolicy;
use crate::public_design::PublicPolicy;
use crate::scenario::{RouteFlow, RoutingScenario, StateEval};
use crate::simplex::ProductSimplex;
use crate::spg::{self, SpgOptions, SpgResult};
use std::cell::{Cell, RefCell};

/// Weight of the strictly convex regularizer `eps |x / T|^2` selecting a deterministic minimizer.
pub const REGULARIZATION: f64 = 1e-9;
/// Complementarity residual accepted as an equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Solver settings for the potential programs.
#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    pub gradient_tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub regularization: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-11,
            residual_tol: RESIDUAL_TOL,
            max_iter: 200_000,
            regularization: REGULARIZATION,
        }
    }
}

/// Equilibrium flows of every population segment.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    /// Participating flow per message or atom.
    pub participants: Vec<RouteFlow>,
    /// Non-participant flow `y`.
    pub nonparticipants: RouteFlow,
    pub potential: f64,
    /// Largest flow-weighted expected latency gap over segments and route pairs.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub regularization: f64,
}

impl EquilibriumResult {
    pub fn y(&self) -> &[f64] {
        self.nonparticipants.values()
    }

    pub fn atoms(&self) -> Vec<Vec<f64>> {
        self.participants.iter().map(|f| f.values().to_vec()).collect()
    }
}

/// Per-state first-best flows and their expected cost.
#[derive(Debug, Clone)]
pub struct FirstBest {
    pub flows: Vec<RouteFlow>,
    pub state_costs: Vec<f64>,
    pub cost: f64,
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::Validation(format!("participation rate {nu} outside [0, 1]")));
    }
    Ok(())
}

fn uniform(n: usize, mass: f64) -> Vec<f64> {
    vec![mass / n as f64; n]
}

/// Expected social cost of atoms `x^(k)` with weights `pi(k|w)` and non-participant flow `y`.
pub fn social_cost(
    scenario: &RoutingScenario,
    atoms: &[Vec<f64>],
    weights: &[Vec<f64>],
    y: &[f64],
) -> Result<f64> {
    game::check_profile(scenario, atoms, weights, y)?;
    Ok(game::cost_unchecked(scenario, atoms, weights, y))
}

/// Prior-based non-participant flow given a fixed atomic policy.
pub fn nonparticipant_flow(
    scenario: &RoutingScenario,
    policy: &AtomicPrivatePolicy,
    nu: f64,
) -> Result<EquilibriumResult> {
    nonparticipant_flow_with(scenario, policy, nu, &EquilibriumOptions::default())
}

pub fn nonparticipant_flow_with(
    scenario: &RoutingScenario,
    policy: &AtomicPrivatePolicy,
    nu: f64,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    check_nu(nu)?;
    let n = scenario.num_routes();
    let t = scenario.demand();
    let atoms = policy.atom_values();
    let weights = policy.weights();
    game::check_weights(weights, scenario.num_states(), atoms.len())?;
    for a in &atoms {
        RouteFlow::new(nu * t, a.clone())?;
    }
    let mass = (1.0 - nu) * t;
    let mut domain = ProductSimplex::new();
    domain.push(n, mass);
    let eps = Cell::new(opts.regularization / (t * t));
    let mut ev = StateEval::new(scenario);
    let mut f = vec![0.0; n];
    let mut objective = |y: &[f64], g: &mut [f64]| -> f64 {
        let eps = eps.get();
        let mut value = 0.0;
        for i in 0..n {
            g[i] = 2.0 * eps * y[i];
            value += eps * y[i] * y[i];
        }
        for (k, x) in atoms.iter().enumerate() {
            for i in 0..n {
                f[i] = x[i] + y[i];
            }
            for (w, &mu) in scenario.prior().iter().enumerate() {
                let p = weights[w][k] * mu;
                if p == 0.0 {
                    continue;
                }
                ev.evaluate(scenario, w, &f);
                value += p * ev.potential;
                for i in 0..n {
                    g[i] += p * ev.route_lat[i];
                }
            }
        }
        value
    };
    let spg_opts = SpgOptions { max_iter: opts.max_iter, tol: opts.gradient_tol, ..Default::default() };
    let residual_of = |y: &[f64]| nash_residual(&game::latency_gaps(scenario, &atoms, weights, y), y);
    let res = polished(&mut objective, &eps, uniform(n, mass), &domain, &spg_opts, residual_of);
    let residual = residual_of(&res.x);
    let y = res.x;
    if residual > opts.residual_tol {
        return Err(Error::NonConvergence { iterations: res.iterations, residual });
    }
    Ok(EquilibriumResult {
        participants: atoms.into_iter().map(RouteFlow::from_values).collect(),
        nonparticipants: RouteFlow::from_values(y),
        potential: res.value,
        kkt_residual: residual,
        iterations: res.iterations,
        regularization: opts.regularization,
    })
}

/// Solves the regularized problem, then re-solves without the regularizer from its minimizer and
/// keeps whichever point has the smaller residual.
fn polished<F, R>(
    objective: &mut F,
    eps: &Cell<f64>,
    x0: Vec<f64>,
    domain: &ProductSimplex,
    opts: &SpgOptions,
    residual: R,
) -> SpgResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
    R: Fn(&[f64]) -> f64,
{
    let first = spg::minimize(&mut *objective, &x0, domain, opts);
    let eps0 = eps.replace(0.0);
    let second = spg::minimize(&mut *objective, &first.x, domain, opts);
    eps.set(eps0);
    let iterations = first.iterations + second.iterations;
    let mut best = if residual(&second.x) < residual(&first.x) { second } else { first };
    best.iterations = iterations;
    best
}

/// `max_{i,j} y_i sum_k Delta^k_ij`, zero when every term is non-positive.
pub(crate) fn nash_residual(gaps: &[Vec<Vec<f64>>], y: &[f64]) -> f64 {
    let n = y.len();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d: f64 = gaps.iter().map(|g| g[i][j]).sum();
            r = r.max(y[i] * d);
        }
    }
    r
}

/// Bayes Nash flow of participants and non-participants under a public policy.
pub fn bne_indirect(
    scenario: &RoutingScenario,
    policy: &PublicPolicy,
    nu: f64,
) -> Result<EquilibriumResult> {
    bne_indirect_with(scenario, policy, nu, &EquilibriumOptions::default())
}

pub fn bne_indirect_with(
    scenario: &RoutingScenario,
    policy: &PublicPolicy,
    nu: f64,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumResult> {
    check_nu(nu)?;
    let n = scenario.num_routes();
    let t = scenario.demand();
    let weights = policy.weights();
    let m = policy.message_count();
    game::check_weights(weights, scenario.num_states(), m)?;
    let prior = scenario.prior();
    let message_prob: Vec<f64> =
        (0..m).map(|k| (0..prior.len()).map(|w| weights[w][k] * prior[w]).sum()).collect();
    // Messages that are never sent carry no potential; their flow is the regularizer minimizer.
    let active: Vec<usize> = (0..m).filter(|&k| message_prob[k] > 1e-14).collect();
    let scale: Vec<f64> = active.iter().map(|&k| message_prob[k].sqrt()).collect();
    let mut domain = ProductSimplex::new();
    for s in &scale {
        domain.push(n, s * nu * t);
    }
    let y_off = domain.push(n, (1.0 - nu) * t);
    let eps = Cell::new(opts.regularization / (t * t));
    let mut ev = StateEval::new(scenario);
    let mut f = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let mut objective = |v: &[f64], g: &mut [f64]| -> f64 {
        let eps = eps.get();
        let y = &v[y_off..y_off + n];
        let mut value = 0.0;
        for i in 0..n {
            g[y_off + i] = 2.0 * eps * y[i];
            value += eps * y[i] * y[i];
        }
        for (a, &k) in active.iter().enumerate() {
            let sc = scale[a];
            let off = a * n;
            for i in 0..n {
                let x = v[off + i] / sc;
                f[i] = x + y[i];
                gx[i] = 2.0 * eps * x;
                value += eps * x * x;
            }
            for (w, &mu) in prior.iter().enumerate() {
                let p = weights[w][k] * mu;
                if p == 0.0 {
                    continue;
                }
                ev.evaluate(scenario, w, &f);
                value += p * ev.potential;
                for i in 0..n {
                    gx[i] += p * ev.route_lat[i];
                    g[y_off + i] += p * ev.route_lat[i];
                }
            }
            for i in 0..n {
                g[off + i] = gx[i] / sc;
            }
        }
        value
    };
    let mut x0 = Vec::with_capacity(domain.dim());
    for s in &scale {
        x0.extend(uniform(n, s * nu * t));
    }
    x0.extend(uniform(n, (1.0 - nu) * t));
    let spg_opts = SpgOptions { max_iter: opts.max_iter, tol: opts.gradient_tol, ..Default::default() };
    let unpack = |v: &[f64]| {
        let y = v[y_off..y_off + n].to_vec();
        let mut atoms = vec![uniform(n, nu * t); m];
        for (a, &k) in active.iter().enumerate() {
            atoms[k] = v[a * n..(a + 1) * n].iter().map(|x| x / scale[a]).collect();
        }
        (atoms, y)
    };
    let residual_of = |v: &[f64]| {
        let (atoms, y) = unpack(v);
        let gaps = game::latency_gaps(scenario, &atoms, weights, &y);
        public_residual(&gaps, &atoms).max(nash_residual(&gaps, &y))
    };
    let res = polished(&mut objective, &eps, x0, &domain, &spg_opts, residual_of);
    let residual = residual_of(&res.x);
    let (atoms, y) = unpack(&res.x);
    if residual > opts.residual_tol {
        return Err(Error::NonConvergence { iterations: res.iterations, residual });
    }
    Ok(EquilibriumResult {
        participants: atoms.into_iter().map(RouteFlow::from_values).collect(),
        nonparticipants: RouteFlow::from_values(y),
        potential: res.value,
        kkt_residual: residual,
        iterations: res.iterations,
        regularization: opts.regularization,
    })
}

/// `max_{k,i,j} x^k_i Delta^k_ij`.
pub(crate) fn public_residual(gaps: &[Vec<Vec<f64>>], atoms: &[Vec<f64>]) -> f64 {
    let mut r: f64 = 0.0;
    for (g, x) in gaps.iter().zip(atoms) {
        for i in 0..x.len() {
            for j in 0..x.len() {
                r = r.max(x[i] * g[i][j]);
            }
        }
    }
    r
}

/// State-wise system optimum `min_f sum_e F_e l_{w,e}(F_e)` on `P_n(T)`, averaged over the prior.
pub fn first_best(scenario: &RoutingScenario) -> Result<FirstBest> {
    first_best_with(scenario, &EquilibriumOptions::default())
}

pub fn first_best_with(scenario: &RoutingScenario, opts: &EquilibriumOptions) -> Result<FirstBest> {
    let n = scenario.num_routes();
    let t = scenario.demand();
    let mut domain = ProductSimplex::new();
    domain.push(n, t);
    let spg_opts = SpgOptions { max_iter: opts.max_iter, tol: opts.gradient_tol, ..Default::default() };
    let mut flows = Vec::new();
    let mut state_costs = Vec::new();
    for w in 0..scenario.num_states() {
        let eps = Cell::new(opts.regularization / (t * t));
        let ev = RefCell::new(StateEval::new(scenario));
        let mut objective = |f: &[f64], g: &mut [f64]| {
            let eps = eps.get();
            let mut ev = ev.borrow_mut();
            ev.evaluate(scenario, w, f);
            let mut v = ev.total;
            for i in 0..n {
                g[i] = ev.route_marginal[i] + 2.0 * eps * f[i];
                v += eps * f[i] * f[i];
            }
            v
        };
        let gap_of = |f: &[f64]| {
            let mut ev = ev.borrow_mut();
            ev.evaluate(scenario, w, f);
            let best = ev.route_marginal.iter().copied().fold(f64::INFINITY, f64::min);
            (0..n).map(|i| f[i] * (ev.route_marginal[i] - best)).fold(0.0, f64::max)
        };
        let res = polished(&mut objective, &eps, uniform(n, t), &domain, &spg_opts, gap_of);
        let gap = gap_of(&res.x);
        let mut ev = ev.borrow_mut();
        ev.evaluate(scenario, w, &res.x);
        if gap > opts.residual_tol * (1.0 + ev.total) {
            return Err(Error::NonConvergence { iterations: res.iterations, residual: gap });
        }
        state_costs.push(ev.total);
        flows.push(RouteFlow::from_values(res.x));
    }
    let cost = scenario.prior().iter().zip(&state_costs).map(|(p, c)| p * c).sum();
    Ok(FirstBest { flows, state_costs, cost })
}

/// Prior-based equilibrium with nobody receiving signals.
pub fn prior_equilibrium(scenario: &RoutingScenario) -> Result<EquilibriumResult> {
    nonparticipant_flow(scenario, &AtomicPrivatePolicy::empty(scenario), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine() -> RoutingScenario {
        RoutingScenario::parallel(
            vec![0.6, 0.4],
            vec![vec![vec![5.0, 4.0], vec![25.0, 2.0]], vec![vec![20.0, 1.0], vec![15.0, 2.0]]],
            5.0,
        )
        .unwrap()
    }

    #[test]
    fn prior_equilibrium_closed_form() {
        let sc = affine();
        let eq = prior_equilibrium(&sc).unwrap();
        assert!((eq.y()[0] - 25.0 / 6.0).abs() < 1e-7);
        assert!((eq.y()[1] - 5.0 / 6.0).abs() < 1e-7);
        let cost = social_cost(&sc, &[vec![0.0, 0.0]], &[vec![1.0], vec![1.0]], eq.y()).unwrap();
        assert!((cost - 340.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn full_participation_leaves_no_nonparticipants() {
        let sc = affine();
        let policy = AtomicPrivatePolicy::new(
            vec![vec![2.5, 2.5]],
            vec![vec![1.0], vec![1.0]],
            1.0,
        )
        .unwrap();
        let eq = nonparticipant_flow(&sc, &policy, 1.0).unwrap();
        assert_eq!(eq.y(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_nu_above_one() {
        let sc = affine();
        assert!(nonparticipant_flow(&sc, &AtomicPrivatePolicy::empty(&sc), 1.5).is_err());
    }

    #[test]
    fn first_best_two_link_affine_by_hand() {
        // State 1: 5 + 8 f1 = 25 + 4 f2 gives f1 = 10/3; state 2: 20 + 2 f1 = 15 + 4 f2 gives f1 = 5/2.
        let fb = first_best(&affine()).unwrap();
        assert!((fb.state_costs[0] - 325.0 / 3.0).abs() < 1e-6);
        assert!((fb.state_costs[1] - 425.0 / 4.0).abs() < 1e-6);
        assert!((fb.cost - 107.5).abs() < 1e-6);
    }
}

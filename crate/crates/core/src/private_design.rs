//! Atomic and diagonal private signaling: obedience, posteriors, optimization, lifting and
//! the participation-rate extension.

use crate::design::{self, DesignMode, DesignOptions, Profile};
use crate::equilibrium::{self, EquilibriumResult};
use crate::error::{Error, Result};
use crate::game;
use crate::public_design::{self, PublicPolicy};
use crate::scenario::{RouteFlow, RoutingScenario};

pub use crate::design::DesignSolution;

/// Flows below this are treated as zero when deciding supports.
pub const SUPPORT_TOL: f64 = 1e-9;

/// `m` flow atoms on `P_n(nu T)` with an `s x m` row-stochastic recommendation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicPrivatePolicy {
    atoms: Vec<RouteFlow>,
    weights: Vec<Vec<f64>>,
    nu: f64,
}

impl AtomicPrivatePolicy {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<Vec<f64>>, nu: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("a policy needs at least one atom".into()));
        }
        let n = atoms[0].len();
        let mass: f64 = atoms[0].iter().sum();
        let mut flows = Vec::with_capacity(atoms.len());
        for a in atoms {
            if a.len() != n {
                return Err(Error::Dimension { expected: n, got: a.len() });
            }
            flows.push(RouteFlow::new(mass, a)?);
        }
        game::check_weights(&weights, weights.len(), flows.len())?;
        Ok(Self { atoms: flows, weights, nu })
    }

    /// One atom per state with identity weights.
    pub fn diagonal(atoms: Vec<Vec<f64>>, nu: f64) -> Result<Self> {
        let s = atoms.len();
        let weights = (0..s).map(|w| (0..s).map(|k| if k == w { 1.0 } else { 0.0 }).collect()).collect();
        Self::new(atoms, weights, nu)
    }

    /// The policy of a population that receives nothing (`nu = 0`).
    pub fn empty(scenario: &RoutingScenario) -> Self {
        Self {
            atoms: vec![RouteFlow::zeros(scenario.num_routes())],
            weights: vec![vec![1.0]; scenario.num_states()],
            nu: 0.0,
        }
    }

    pub fn atoms(&self) -> &[RouteFlow] {
        &self.atoms
    }

    pub fn atom_values(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.values().to_vec()).collect()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_diagonal(&self) -> bool {
        let s = self.weights.len();
        self.atoms.len() == s
            && self.weights.iter().enumerate().all(|(w, r)| {
                r.iter().enumerate().all(|(k, &p)| p == if k == w { 1.0 } else { 0.0 })
            })
    }
}

impl From<&DesignSolution> for AtomicPrivatePolicy {
    fn from(sol: &DesignSolution) -> Self {
        Self { atoms: sol.atoms.clone(), weights: sol.weights.clone(), nu: sol.nu }
    }
}

/// Obedience residuals `sum_k x^k_i Delta^k_ij` and Nash residuals `y_i sum_k Delta^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObedienceResiduals {
    pub obedience: Vec<Vec<f64>>,
    pub nash: Vec<Vec<f64>>,
}

impl ObedienceResiduals {
    /// Largest off-diagonal obedience entry, floored at zero.
    pub fn max_obedience(&self) -> f64 {
        off_diagonal_max(&self.obedience)
    }

    pub fn max_nash(&self) -> f64 {
        off_diagonal_max(&self.nash)
    }

    pub fn max(&self) -> f64 {
        self.max_obedience().max(self.max_nash())
    }
}

fn off_diagonal_max(m: &[Vec<f64>]) -> f64 {
    let mut r: f64 = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j {
                r = r.max(v);
            }
        }
    }
    r
}

pub fn obedience_residuals(
    scenario: &RoutingScenario,
    policy: &AtomicPrivatePolicy,
    y: &[f64],
) -> Result<ObedienceResiduals> {
    let atoms = policy.atom_values();
    game::check_profile(scenario, &atoms, policy.weights(), y)?;
    let gaps = game::latency_gaps(scenario, &atoms, policy.weights(), y);
    let n = scenario.num_routes();
    let mut obedience = vec![vec![0.0; n]; n];
    let mut nash = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            obedience[i][j] = atoms.iter().zip(&gaps).map(|(x, g)| x[i] * g[i][j]).sum();
            nash[i][j] = y[i] * gaps.iter().map(|g| g[i][j]).sum::<f64>();
        }
    }
    Ok(ObedienceResiduals { obedience, nash })
}

/// Joint posteriors over (atom, state).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    /// Per recommended route, `table[k][w]`; `None` when the route is never recommended.
    pub recommendations: Vec<Option<Vec<Vec<f64>>>>,
    /// Posterior of an agent outside the signaled population, `pi(k|w) mu0(w)`.
    pub nonrecipient: Vec<Vec<f64>>,
}

pub fn posteriors(scenario: &RoutingScenario, policy: &AtomicPrivatePolicy) -> Result<PosteriorTable> {
    let atoms = policy.atom_values();
    let m = atoms.len();
    let n = scenario.num_routes();
    game::check_weights(policy.weights(), scenario.num_states(), m)?;
    if atoms.iter().any(|a| a.len() != n) {
        return Err(Error::Dimension { expected: n, got: atoms[0].len() });
    }
    let prior = scenario.prior();
    let w = policy.weights();
    let nonrecipient: Vec<Vec<f64>> =
        (0..m).map(|k| (0..prior.len()).map(|s| w[s][k] * prior[s]).collect()).collect();
    let mut recommendations = Vec::with_capacity(n);
    for i in 0..n {
        let table: Vec<Vec<f64>> = (0..m)
            .map(|k| {
                let x = if atoms[k][i] > SUPPORT_TOL { atoms[k][i] } else { 0.0 };
                (0..prior.len()).map(|s| x * w[s][k] * prior[s]).collect()
            })
            .collect();
        let z: f64 = table.iter().flatten().sum();
        if z > 0.0 {
            recommendations.push(Some(
                table.into_iter().map(|r| r.into_iter().map(|v| v / z).collect()).collect(),
            ));
        } else {
            recommendations.push(None);
        }
    }
    Ok(PosteriorTable { recommendations, nonrecipient })
}

/// Atom count `s * C(D + n, D + 1)` sufficient for optimal private policies.
pub fn atom_bound(s: usize, n: usize, d: usize) -> u128 {
    let (top, k) = ((d + n) as u128, (d + 1) as u128);
    let k = k.min(top - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (top - i) / (i + 1);
    }
    s as u128 * c
}

/// No-information and (when `m >= s`) full-information profiles at `nu`, padded to `m` atoms.
pub(crate) fn canonical_profiles(scenario: &RoutingScenario, nu: f64, m: usize) -> Result<Vec<Profile>> {
    let s = scenario.num_states();
    let mut out = Vec::new();
    let no_info = public_design::canonical_policy(public_design::CanonicalKind::NoInformation, s, 1)?;
    let eq = equilibrium::bne_indirect(scenario, &no_info, nu)?;
    out.extend(design::pad_profile(&profile_of(&no_info, &eq), m));
    if m >= s {
        let full = public_design::canonical_policy(public_design::CanonicalKind::FullInformation, s, s)?;
        let eq = equilibrium::bne_indirect(scenario, &full, nu)?;
        out.extend(design::pad_profile(&profile_of(&full, &eq), m));
    }
    Ok(out)
}

pub(crate) fn profile_of(policy: &PublicPolicy, eq: &EquilibriumResult) -> Profile {
    Profile { atoms: eq.atoms(), weights: policy.weights().to_vec(), y: eq.y().to_vec() }
}

/// Best multistart local solution of the atomic private design with `m` atoms.
pub fn optimize_private(
    scenario: &RoutingScenario,
    nu: f64,
    m: usize,
    starts: usize,
    seed: u64,
) -> Result<DesignSolution> {
    optimize_private_with(scenario, nu, m, &DesignOptions::new(starts, seed))
}

/// As [`optimize_private`], trying `opts.warm_starts` after the canonical policies.
pub fn optimize_private_with(
    scenario: &RoutingScenario,
    nu: f64,
    m: usize,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    let mut o = opts.clone();
    let mut warm = canonical_profiles(scenario, nu, m)?;
    warm.extend(opts.warm_starts.iter().filter_map(|p| design::pad_profile(p, m)));
    o.warm_starts = warm;
    design::multistart(scenario, DesignMode::Private, nu, m, &o)
}

/// Best multistart local solution over diagonal policies (one atom per state, identity weights).
pub fn optimize_diagonal(scenario: &RoutingScenario, nu: f64, starts: usize, seed: u64) -> Result<DesignSolution> {
    optimize_diagonal_with(scenario, nu, &DesignOptions::new(starts, seed))
}

pub fn optimize_diagonal_with(scenario: &RoutingScenario, nu: f64, opts: &DesignOptions) -> Result<DesignSolution> {
    let s = scenario.num_states();
    let mut o = opts.clone();
    let mut warm = Vec::new();
    for p in canonical_profiles(scenario, nu, s)? {
        warm.push(diagonalize(&p, s));
    }
    warm.extend(opts.warm_starts.iter().cloned());
    o.warm_starts = warm;
    design::multistart(scenario, DesignMode::Diagonal, nu, s, &o)
}

/// Replaces a profile's weights by the identity, keeping the first `s` atoms.
fn diagonalize(p: &Profile, s: usize) -> Profile {
    let atoms: Vec<Vec<f64>> = (0..s)
        .map(|w| {
            // Atom recommended in state w with the largest weight.
            let k = (0..p.atoms.len())
                .fold(0, |best, k| if p.weights[w][k] > p.weights[w][best] { k } else { best });
            p.atoms[k].clone()
        })
        .collect();
    let weights = (0..s).map(|w| (0..s).map(|k| if k == w { 1.0 } else { 0.0 }).collect()).collect();
    Profile { atoms, weights, y: p.y.clone() }
}

/// Reinterprets a public policy with its equilibrium flows as a private policy on the same atoms.
pub fn lift_public_to_private(
    scenario: &RoutingScenario,
    policy: &PublicPolicy,
    flows: &EquilibriumResult,
    nu: f64,
) -> Result<(AtomicPrivatePolicy, RouteFlow)> {
    let atoms = flows.atoms();
    let y = flows.y().to_vec();
    game::check_profile(scenario, &atoms, policy.weights(), &y)?;
    let r = public_design::public_residuals(scenario, policy, &atoms, &y)?;
    let cost = game::cost_unchecked(scenario, &atoms, policy.weights(), &y);
    if r.max() > design::feasibility_tolerance(cost) {
        return Err(Error::Infeasible(format!(
            "public flows violate the equilibrium conditions by {:e}",
            r.max()
        )));
    }
    let private = AtomicPrivatePolicy::new(atoms, policy.weights().to_vec(), nu)?;
    Ok((private, RouteFlow::from_values(y)))
}

/// Moves participation from `nu1` to `nu2 >= nu1`, shifting `eps (nu2 - nu1) T` of the
/// non-participant flow into every atom with `eps = y / ((1 - nu1) T)`.
pub fn extend_policy(scenario: &RoutingScenario, solution: &DesignSolution, nu2: f64) -> Result<DesignSolution> {
    let nu1 = solution.nu;
    if nu2 < nu1 {
        return Err(Error::Validation(format!("cannot extend from {nu1} down to {nu2}")));
    }
    if nu2 > 1.0 {
        return Err(Error::Validation(format!("participation rate {nu2} outside [0, 1]")));
    }
    if nu2 == nu1 {
        return Ok(solution.clone());
    }
    if nu1 >= 1.0 {
        return Err(Error::Validation("full participation cannot be extended".into()));
    }
    let ratio = (1.0 - nu2) / (1.0 - nu1);
    let y1 = solution.y.values();
    let y2: Vec<f64> = y1.iter().map(|&v| v * ratio).collect();
    let shift: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - b).collect();
    let atoms: Vec<Vec<f64>> = solution
        .atoms
        .iter()
        .map(|a| a.values().iter().zip(&shift).map(|(x, d)| x + d).collect())
        .collect();
    let profile = Profile { atoms, weights: solution.weights.clone(), y: y2 };
    let cost = game::cost_unchecked(scenario, &profile.atoms, &profile.weights, &profile.y);
    let r = design::residuals(scenario, solution.mode, &profile, nu2);
    Ok(DesignSolution {
        mode: solution.mode,
        nu: nu2,
        atoms: profile.atoms.into_iter().map(RouteFlow::from_values).collect(),
        weights: profile.weights,
        y: RouteFlow::from_values(profile.y),
        cost,
        max_obedience_residual: r.obedience,
        max_nash_residual: r.nash,
        lower_bound: None,
        gap: None,
        starts_used: solution.starts_used,
        seed: solution.seed,
    })
}

/// Design family swept over participation rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Diagonal,
    Atomic(usize),
    Public(usize),
}

/// One grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub nu: f64,
    pub solution: std::result::Result<DesignSolution, String>,
    /// Participation rate whose extended solution replaced the local optimum, if any.
    pub extended_from: Option<f64>,
}

/// Solves each grid point; private modes are post-processed with [`extend_policy`] so the
/// reported cost never increases with `nu`.
pub fn sweep_nu(
    scenario: &RoutingScenario,
    grid: &[f64],
    mode: SweepMode,
    starts: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    sweep_nu_with(scenario, grid, mode, &DesignOptions::new(starts, seed), |_| Vec::new())
}

/// As [`sweep_nu`] with per-point warm starts supplied by `warm(nu)`.
pub fn sweep_nu_with<F>(
    scenario: &RoutingScenario,
    grid: &[f64],
    mode: SweepMode,
    opts: &DesignOptions,
    warm: F,
) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64) -> Vec<Profile>,
{
    if let Some(bad) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Validation(format!("grid value {bad} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut points: Vec<Option<SweepPoint>> = vec![None; grid.len()];
    let mut carried: Option<DesignSolution> = None;
    for idx in order {
        let nu = grid[idx];
        let mut o = opts.clone();
        o.warm_starts.extend(warm(nu));
        let solved = match mode {
            SweepMode::Diagonal => optimize_diagonal_with(scenario, nu, &o),
            SweepMode::Atomic(m) => optimize_private_with(scenario, nu, m, &o),
            SweepMode::Public(m) => public_design::optimize_public_with(scenario, nu, m, &o),
        };
        let mut point = SweepPoint { nu, solution: solved.map_err(|e| e.to_string()), extended_from: None };
        if !matches!(mode, SweepMode::Public(_)) {
            if let Some(prev) = &carried {
                if let Ok(ext) = extend_policy(scenario, prev, nu) {
                    let better = match &point.solution {
                        Ok(own) => ext.cost < own.cost,
                        Err(_) => true,
                    };
                    if better && ext.max_residual() <= design::feasibility_tolerance(ext.cost) {
                        point.extended_from = Some(prev.nu);
                        point.solution = Ok(ext);
                    }
                }
            }
            if let Ok(sol) = &point.solution {
                carried = Some(sol.clone());
            }
        }
        points[idx] = Some(point);
    }
    Ok(points.into_iter().map(|p| p.expect("every grid point solved")).collect())
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
    fn atom_bound_values() {
        assert_eq!(atom_bound(2, 2, 1), 6);
        assert_eq!(atom_bound(2, 2, 4), 12);
        assert_eq!(atom_bound(1, 2, 1), 3);
        assert_eq!(atom_bound(2, 3, 2), 20);
    }

    #[test]
    fn posterior_of_single_full_support_atom_is_prior() {
        let sc = affine();
        let p = AtomicPrivatePolicy::new(vec![vec![3.0, 2.0]], vec![vec![1.0], vec![1.0]], 1.0).unwrap();
        let t = posteriors(&sc, &p).unwrap();
        for rec in t.recommendations.iter().flatten() {
            assert!((rec[0][0] - 0.6).abs() < 1e-12);
            assert!((rec[0][1] - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_of_diagonal_policy_by_hand() {
        let sc = affine();
        let p = AtomicPrivatePolicy::diagonal(vec![vec![4.0, 1.0], vec![2.0, 3.0]], 1.0).unwrap();
        let t = posteriors(&sc, &p).unwrap();
        let rec = t.recommendations[0].as_ref().unwrap();
        // 4*0.6 = 2.4 and 2*0.4 = 0.8 normalize to 0.75 and 0.25.
        assert!((rec[0][0] - 0.75).abs() < 1e-12);
        assert!((rec[1][1] - 0.25).abs() < 1e-12);
        assert_eq!(rec[0][1], 0.0);
        let never = AtomicPrivatePolicy::diagonal(vec![vec![5.0, 0.0], vec![5.0, 0.0]], 1.0).unwrap();
        assert!(posteriors(&sc, &never).unwrap().recommendations[1].is_none());
    }

    #[test]
    fn all_on_dominated_route_violates_obedience() {
        // Route 1 costs more than route 2 in both states at every relevant flow.
        let sc = RoutingScenario::parallel(
            vec![0.5, 0.5],
            vec![vec![vec![10.0, 1.0], vec![1.0, 1.0]], vec![vec![12.0, 1.0], vec![2.0, 1.0]]],
            1.0,
        )
        .unwrap();
        let p = AtomicPrivatePolicy::diagonal(vec![vec![1.0, 0.0], vec![1.0, 0.0]], 1.0).unwrap();
        let r = obedience_residuals(&sc, &p, &[0.0, 0.0]).unwrap();
        // 0.5 * 1 * (11 - 1) + 0.5 * 1 * (13 - 2) = 10.5
        assert!((r.obedience[0][1] - 10.5).abs() < 1e-12);
        assert!(r.max() > 0.0);
    }

    #[test]
    fn extension_keeps_aggregates_and_cost() {
        let sc = affine();
        let sol = optimize_diagonal(&sc, 0.5, 8, 3).unwrap();
        let ext = extend_policy(&sc, &sol, 0.75).unwrap();
        assert!((ext.cost - sol.cost).abs() < 1e-12);
        for (a, b) in sol.atoms.iter().zip(&ext.atoms) {
            for i in 0..2 {
                let before = a.values()[i] + sol.y.values()[i];
                let after = b.values()[i] + ext.y.values()[i];
                assert!((before - after).abs() < 1e-12);
            }
        }
        assert!(ext.max_residual() <= design::feasibility_tolerance(ext.cost));
        assert_eq!(extend_policy(&sc, &sol, 0.5).unwrap(), sol);
        assert!(extend_policy(&sc, &sol, 0.25).is_err());
    }
}

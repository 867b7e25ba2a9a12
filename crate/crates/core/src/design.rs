//! Multistart augmented-Lagrangian solver shared by the private, diagonal and public designs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game;
use crate::scenario::{RouteFlow, RoutingScenario, StateEval};
use crate::simplex::{sample_simplex, ProductSimplex};
use crate::spg::{self, SpgOptions};

/// Which design program is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    /// Atomic private policy, one obedience constraint per route pair.
    Private,
    /// One atom per state with identity weights.
    Diagonal,
    /// Public policy, obedience per message.
    Public,
}

impl DesignMode {
    pub fn name(self) -> &'static str {
        match self {
            DesignMode::Private => "private",
            DesignMode::Diagonal => "diagonal",
            DesignMode::Public => "public",
        }
    }
}

/// Augmented-Lagrangian settings.
#[derive(Debug, Clone)]
pub struct AlOptions {
    pub max_outer: usize,
    pub inner_iter: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
    /// Constraint violation target in normalized units.
    pub feasibility_tol: f64,
    pub final_inner_tol: f64,
}

impl Default for AlOptions {
    fn default() -> Self {
        Self {
            max_outer: 60,
            inner_iter: 4000,
            initial_penalty: 10.0,
            max_penalty: 1e12,
            feasibility_tol: 1e-11,
            final_inner_tol: 1e-10,
        }
    }
}

/// Multistart settings.
#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub starts: usize,
    pub seed: u64,
    pub al: AlOptions,
    /// Extra deterministic starting points tried before the random ones.
    pub warm_starts: Vec<Profile>,
}

impl DesignOptions {
    pub fn new(starts: usize, seed: u64) -> Self {
        Self { starts, seed, al: AlOptions::default(), warm_starts: Vec::new() }
    }
}

/// Atoms, weights and non-participant flow of a candidate design.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Optimized design with its feasibility diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSolution {
    pub mode: DesignMode,
    pub nu: f64,
    pub atoms: Vec<RouteFlow>,
    /// `s x m` weights `pi(k|w)`.
    pub weights: Vec<Vec<f64>>,
    pub y: RouteFlow,
    pub cost: f64,
    pub max_obedience_residual: f64,
    pub max_nash_residual: f64,
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
    pub starts_used: usize,
    pub seed: u64,
}

impl DesignSolution {
    pub fn atom_values(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.values().to_vec()).collect()
    }

    pub fn profile(&self) -> Profile {
        Profile { atoms: self.atom_values(), weights: self.weights.clone(), y: self.y.values().to_vec() }
    }

    /// Records a lower bound and the resulting gap.
    pub fn certify(&mut self, bound: f64) {
        self.lower_bound = Some(bound);
        self.gap = Some(self.cost - bound);
    }

    pub fn max_residual(&self) -> f64 {
        self.max_obedience_residual.max(self.max_nash_residual)
    }
}

/// Feasibility tolerance `1e-6 (1 + |cost|)` applied to returned designs.
pub fn feasibility_tolerance(cost: f64) -> f64 {
    1e-6 * (1.0 + cost.abs())
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    Private { i: usize, j: usize },
    Public { k: usize, i: usize, j: usize },
    Nash { i: usize, j: usize },
}

/// Obedience and Nash residuals of a profile under a design mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub obedience: f64,
    pub nash: f64,
}

pub(crate) fn residuals(
    scenario: &RoutingScenario,
    mode: DesignMode,
    p: &Profile,
    nu: f64,
) -> Residuals {
    let gaps = game::latency_gaps(scenario, &p.atoms, &p.weights, &p.y);
    let n = scenario.num_routes();
    let mut ob: f64 = 0.0;
    if nu > 0.0 {
        for i in 0..n {
            for j in 0..n {
                match mode {
                    DesignMode::Public => {
                        for (k, x) in p.atoms.iter().enumerate() {
                            ob = ob.max(x[i] * gaps[k][i][j]);
                        }
                    }
                    _ => {
                        let v: f64 = p.atoms.iter().zip(&gaps).map(|(x, g)| x[i] * g[i][j]).sum();
                        ob = ob.max(v);
                    }
                }
            }
        }
    }
    let nash = if nu < 1.0 { crate::equilibrium::nash_residual(&gaps, &p.y) } else { 0.0 };
    Residuals { obedience: ob, nash }
}

/// Variable layout and evaluation of one design program.
pub(crate) struct Problem<'a> {
    scenario: &'a RoutingScenario,
    mode: DesignMode,
    nu: f64,
    m: usize,
    n: usize,
    s: usize,
    atom_off: Option<usize>,
    y_off: Option<usize>,
    w_off: Option<usize>,
    fixed_weights: Vec<Vec<f64>>,
    domain: ProductSimplex,
    constraints: Vec<Constraint>,
    scale: f64,
}

struct Workspace {
    ev: StateEval,
    f: Vec<f64>,
    /// `c[k][w][i]` route latencies.
    c: Vec<Vec<Vec<f64>>>,
    /// `C[k][i]` weighted expected latencies.
    cexp: Vec<Vec<f64>>,
    /// `dC[k][i][l]`.
    dcexp: Vec<Vec<Vec<f64>>>,
    /// `total[k][w]` and `marg[k][w][i]`.
    total: Vec<Vec<f64>>,
    marg: Vec<Vec<Vec<f64>>>,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a RoutingScenario, mode: DesignMode, nu: f64, m: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::Validation(format!("participation rate {nu} outside [0, 1]")));
        }
        if m == 0 {
            return Err(Error::Validation("at least one atom or message required".into()));
        }
        let n = scenario.num_routes();
        let s = scenario.num_states();
        let t = scenario.demand();
        if mode == DesignMode::Diagonal && m != s {
            return Err(Error::Validation("diagonal policies have one atom per state".into()));
        }
        let mut domain = ProductSimplex::new();
        let mut atom_off = None;
        let mut y_off = None;
        let mut w_off = None;
        if nu > 0.0 {
            let off = domain.dim();
            for _ in 0..m {
                domain.push(n, nu * t);
            }
            atom_off = Some(off);
        }
        if nu < 1.0 {
            y_off = Some(domain.push(n, (1.0 - nu) * t));
        }
        let fixed_weights = if mode == DesignMode::Diagonal {
            (0..s).map(|w| (0..m).map(|k| if k == w { 1.0 } else { 0.0 }).collect()).collect()
        } else {
            let mut rows = vec![vec![0.0; m]; s];
            rows.iter_mut().for_each(|r| r[0] = 1.0);
            rows
        };
        if nu > 0.0 && mode != DesignMode::Diagonal && m > 1 {
            let off = domain.dim();
            for _ in 0..s {
                domain.push(m, 1.0);
            }
            w_off = Some(off);
        }
        let mut constraints = Vec::new();
        if nu > 0.0 {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    match mode {
                        DesignMode::Public => {
                            for k in 0..m {
                                constraints.push(Constraint::Public { k, i, j });
                            }
                        }
                        _ => constraints.push(Constraint::Private { i, j }),
                    }
                }
            }
        }
        if nu < 1.0 {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        constraints.push(Constraint::Nash { i, j });
                    }
                }
            }
        }
        let mut p = Self {
            scenario,
            mode,
            nu,
            m,
            n,
            s,
            atom_off,
            y_off,
            w_off,
            fixed_weights,
            domain,
            constraints,
            scale: 1.0,
        };
        // Normalize by the cost of spreading demand evenly, a start-independent scale.
        let even = vec![t / n as f64; n];
        let mut c = 0.0;
        for (w, &mu) in scenario.prior().iter().enumerate() {
            c += mu * scenario.state_total_latency(w, &even)?;
        }
        p.scale = c.abs().max(1.0);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn unpack(&self, v: &[f64]) -> Profile {
        let n = self.n;
        let atoms = match self.atom_off {
            Some(off) => (0..self.m).map(|k| v[off + k * n..off + (k + 1) * n].to_vec()).collect(),
            None => vec![vec![0.0; n]; self.m],
        };
        let y = match self.y_off {
            Some(off) => v[off..off + n].to_vec(),
            None => vec![0.0; n],
        };
        let weights = match self.w_off {
            Some(off) => (0..self.s).map(|w| v[off + w * self.m..off + (w + 1) * self.m].to_vec()).collect(),
            None => self.fixed_weights.clone(),
        };
        Profile { atoms, weights, y }
    }

    /// Packs a profile; `None` when its shape does not fit this program.
    pub fn pack(&self, p: &Profile) -> Option<Vec<f64>> {
        let n = self.n;
        if p.atoms.len() != self.m || p.weights.len() != self.s || p.y.len() != n {
            return None;
        }
        let mut v = vec![0.0; self.dim()];
        if let Some(off) = self.atom_off {
            for (k, a) in p.atoms.iter().enumerate() {
                v[off + k * n..off + (k + 1) * n].copy_from_slice(a);
            }
        }
        if let Some(off) = self.y_off {
            v[off..off + n].copy_from_slice(&p.y);
        }
        if let Some(off) = self.w_off {
            for (w, row) in p.weights.iter().enumerate() {
                v[off + w * self.m..off + (w + 1) * self.m].copy_from_slice(row);
            }
        }
        self.domain.project(&mut v);
        Some(v)
    }

    pub fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        for b in self.domain.blocks() {
            v[b.offset..b.offset + b.len].copy_from_slice(&sample_simplex(rng, b.len, b.mass));
        }
        v
    }

    fn workspace(&self) -> Workspace {
        let (m, s, n) = (self.m, self.s, self.n);
        Workspace {
            ev: StateEval::new(self.scenario),
            f: vec![0.0; n],
            c: vec![vec![vec![0.0; n]; s]; m],
            cexp: vec![vec![0.0; n]; m],
            dcexp: vec![vec![vec![0.0; n]; n]; m],
            total: vec![vec![0.0; s]; m],
            marg: vec![vec![vec![0.0; n]; s]; m],
        }
    }

    fn weight(&self, v: &[f64], w: usize, k: usize) -> f64 {
        match self.w_off {
            Some(off) => v[off + w * self.m + k],
            None => self.fixed_weights[w][k],
        }
    }

    fn atom(&self, v: &[f64], k: usize, i: usize) -> f64 {
        self.atom_off.map_or(0.0, |off| v[off + k * self.n + i])
    }

    fn yv(&self, v: &[f64], i: usize) -> f64 {
        self.y_off.map_or(0.0, |off| v[off + i])
    }

    fn fill(&self, v: &[f64], ws: &mut Workspace) {
        let (n, sc) = (self.n, self.scenario);
        for k in 0..self.m {
            for i in 0..n {
                ws.f[i] = self.atom(v, k, i) + self.yv(v, i);
            }
            ws.cexp[k].iter_mut().for_each(|x| *x = 0.0);
            ws.dcexp[k].iter_mut().flatten().for_each(|x| *x = 0.0);
            for (w, &mu) in sc.prior().iter().enumerate() {
                ws.ev.evaluate(sc, w, &ws.f);
                ws.total[k][w] = ws.ev.total;
                ws.c[k][w].copy_from_slice(&ws.ev.route_lat);
                ws.marg[k][w].copy_from_slice(&ws.ev.route_marginal);
                let p = self.weight(v, w, k) * mu;
                for i in 0..n {
                    ws.cexp[k][i] += p * ws.ev.route_lat[i];
                    if p != 0.0 {
                        for l in 0..n {
                            ws.dcexp[k][i][l] += p * ws.ev.route_jacobian(sc, i, l);
                        }
                    }
                }
            }
        }
    }

    fn cost_and_grad(&self, v: &[f64], ws: &Workspace, g: &mut [f64]) -> f64 {
        let mut j = 0.0;
        g.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..self.m {
            for (w, &mu) in self.scenario.prior().iter().enumerate() {
                let p = self.weight(v, w, k) * mu;
                j += p * ws.total[k][w];
                for i in 0..self.n {
                    if let Some(off) = self.atom_off {
                        g[off + k * self.n + i] += p * ws.marg[k][w][i];
                    }
                    if let Some(off) = self.y_off {
                        g[off + i] += p * ws.marg[k][w][i];
                    }
                }
                if let Some(off) = self.w_off {
                    g[off + w * self.m + k] += mu * ws.total[k][w];
                }
            }
        }
        j
    }

    fn constraint_value(&self, c: Constraint, v: &[f64], ws: &Workspace) -> f64 {
        match c {
            Constraint::Private { i, j } => {
                (0..self.m).map(|k| self.atom(v, k, i) * (ws.cexp[k][i] - ws.cexp[k][j])).sum()
            }
            Constraint::Public { k, i, j } => self.atom(v, k, i) * (ws.cexp[k][i] - ws.cexp[k][j]),
            Constraint::Nash { i, j } => {
                self.yv(v, i) * (0..self.m).map(|k| ws.cexp[k][i] - ws.cexp[k][j]).sum::<f64>()
            }
        }
    }

    /// Adds `coef * grad(constraint)` to `g`.
    fn add_constraint_grad(&self, c: Constraint, coef: f64, v: &[f64], ws: &Workspace, g: &mut [f64]) {
        let n = self.n;
        let prior = self.scenario.prior();
        // (multiplier of atom k's gap, index of multiplied coordinate)
        let add_gap_terms = |k: usize, mult: f64, i: usize, j: usize, g: &mut [f64]| {
            if mult == 0.0 {
                return;
            }
            for l in 0..n {
                let d = mult * (ws.dcexp[k][i][l] - ws.dcexp[k][j][l]);
                if let Some(off) = self.atom_off {
                    g[off + k * n + l] += coef * d;
                }
                if let Some(off) = self.y_off {
                    g[off + l] += coef * d;
                }
            }
            if let Some(off) = self.w_off {
                for (w, &mu) in prior.iter().enumerate() {
                    g[off + w * self.m + k] += coef * mult * mu * (ws.c[k][w][i] - ws.c[k][w][j]);
                }
            }
        };
        match c {
            Constraint::Private { i, j } => {
                for k in 0..self.m {
                    if let Some(off) = self.atom_off {
                        g[off + k * n + i] += coef * (ws.cexp[k][i] - ws.cexp[k][j]);
                    }
                    add_gap_terms(k, self.atom(v, k, i), i, j, g);
                }
            }
            Constraint::Public { k, i, j } => {
                if let Some(off) = self.atom_off {
                    g[off + k * n + i] += coef * (ws.cexp[k][i] - ws.cexp[k][j]);
                }
                add_gap_terms(k, self.atom(v, k, i), i, j, g);
            }
            Constraint::Nash { i, j } => {
                let total: f64 = (0..self.m).map(|k| ws.cexp[k][i] - ws.cexp[k][j]).sum();
                if let Some(off) = self.y_off {
                    g[off + i] += coef * total;
                }
                let yi = self.yv(v, i);
                for k in 0..self.m {
                    add_gap_terms(k, yi, i, j, g);
                }
            }
        }
    }

    fn constraint_values(&self, v: &[f64], ws: &mut Workspace) -> Vec<f64> {
        self.fill(v, ws);
        self.constraints.iter().map(|&c| self.constraint_value(c, v, ws)).collect()
    }

    /// Augmented Lagrangian in normalized units.
    fn lagrangian(&self, v: &[f64], g: &mut [f64], lambda: &[f64], rho: f64, ws: &mut Workspace) -> f64 {
        self.fill(v, ws);
        let inv = 1.0 / self.scale;
        let mut value = self.cost_and_grad(v, ws, g) * inv;
        g.iter_mut().for_each(|x| *x *= inv);
        for (idx, &c) in self.constraints.iter().enumerate() {
            let gc = self.constraint_value(c, v, ws) * inv;
            let shifted = gc + lambda[idx] / rho;
            if shifted > 0.0 {
                value += 0.5 * rho * (shifted * shifted - (lambda[idx] / rho).powi(2));
                self.add_constraint_grad(c, rho * shifted * inv, v, ws, g);
            } else {
                value -= 0.5 * lambda[idx] * lambda[idx] / rho;
            }
        }
        value
    }

    /// Local solve from `v0`; returns the final point.
    pub fn local_solve(&self, v0: &[f64], opts: &AlOptions) -> Vec<f64> {
        let mut ws = self.workspace();
        let mut v = v0.to_vec();
        self.domain.project(&mut v);
        if self.dim() == 0 {
            return v;
        }
        let nc = self.constraints.len();
        let mut lambda = vec![0.0; nc];
        let mut rho = opts.initial_penalty;
        let mut inner_tol = 1e-4;
        let mut prev_viol = f64::INFINITY;
        for _ in 0..opts.max_outer {
            let spg_opts = SpgOptions {
                max_iter: opts.inner_iter,
                tol: inner_tol,
                memory: 10,
                ..Default::default()
            };
            let res = spg::minimize(
                |x, g| self.lagrangian(x, g, &lambda, rho, &mut ws),
                &v,
                &self.domain,
                &spg_opts,
            );
            v = res.x;
            let vals = self.constraint_values(&v, &mut ws);
            let mut viol: f64 = 0.0;
            let mut compl: f64 = 0.0;
            for (idx, gc) in vals.iter().enumerate() {
                let gc = gc / self.scale;
                viol = viol.max(gc);
                lambda[idx] = (lambda[idx] + rho * gc).max(0.0);
                compl = compl.max((gc * lambda[idx]).abs());
            }
            if viol <= opts.feasibility_tol && compl <= opts.feasibility_tol && inner_tol <= opts.final_inner_tol {
                break;
            }
            if viol > 0.25 * prev_viol && viol > opts.feasibility_tol {
                rho = (rho * 10.0).min(opts.max_penalty);
            }
            prev_viol = viol;
            inner_tol = (inner_tol * 0.1).max(opts.final_inner_tol);
        }
        v
    }

    pub fn cost(&self, p: &Profile) -> f64 {
        game::cost_unchecked(self.scenario, &p.atoms, &p.weights, &p.y)
    }

    pub fn residuals(&self, p: &Profile) -> Residuals {
        residuals(self.scenario, self.mode, p, self.nu)
    }
}

struct Candidate {
    profile: Profile,
    cost: f64,
    residual: f64,
}

/// Runs warm starts then `starts` random starts and keeps the cheapest feasible local solution.
pub(crate) fn multistart(
    scenario: &RoutingScenario,
    mode: DesignMode,
    nu: f64,
    m: usize,
    opts: &DesignOptions,
) -> Result<DesignSolution> {
    let problem = Problem::new(scenario, mode, nu, m)?;
    let warm: Vec<Vec<f64>> = opts.warm_starts.iter().filter_map(|p| problem.pack(p)).collect();
    let n_warm = warm.len();
    let total = n_warm + opts.starts;
    let evaluate = |v: &[f64]| -> Candidate {
        let profile = problem.unpack(v);
        let cost = problem.cost(&profile);
        let r = problem.residuals(&profile);
        Candidate { profile, cost, residual: r.obedience.max(r.nash) }
    };
    let results: Vec<Vec<Candidate>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let start = if idx < n_warm {
                warm[idx].clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream((idx - n_warm) as u64);
                problem.random_start(&mut rng)
            };
            let solved = problem.local_solve(&start, &opts.al);
            if idx < n_warm {
                vec![evaluate(&start), evaluate(&solved)]
            } else {
                vec![evaluate(&solved)]
            }
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for cand in results.into_iter().flatten() {
        if cand.residual > feasibility_tolerance(cand.cost) || !cand.cost.is_finite() {
            continue;
        }
        if best.as_ref().map_or(true, |b| cand.cost < b.cost) {
            best = Some(cand);
        }
    }
    let best = best.ok_or_else(|| Error::Infeasible("no feasible design found over all starts".into()))?;
    let r = problem.residuals(&best.profile);
    Ok(DesignSolution {
        mode,
        nu,
        atoms: best.profile.atoms.iter().map(|a| RouteFlow::from_values(a.clone())).collect(),
        weights: best.profile.weights,
        y: RouteFlow::from_values(best.profile.y),
        cost: best.cost,
        max_obedience_residual: r.obedience,
        max_nash_residual: r.nash,
        lower_bound: None,
        gap: None,
        starts_used: total,
        seed: opts.seed,
    })
}

/// Pads a profile with zero-weight copies of its first atom up to `m` atoms.
pub(crate) fn pad_profile(p: &Profile, m: usize) -> Option<Profile> {
    let have = p.atoms.len();
    if have > m || have == 0 {
        return None;
    }
    let mut atoms = p.atoms.clone();
    while atoms.len() < m {
        atoms.push(p.atoms[0].clone());
    }
    let weights = p
        .weights
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.resize(m, 0.0);
            r
        })
        .collect();
    Some(Profile { atoms, weights, y: p.y.clone() })
}

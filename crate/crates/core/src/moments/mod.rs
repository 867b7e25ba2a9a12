//! First-level moment relaxations of private information design and their solution.
//!
//! A [`MomentProgram`] minimizes a functional that is linear in the moments of one or more
//! measures, subject to linear moment constraints. Three programs are provided:
//!
//! * [`build_diagonal_sdp`]: one measure on the joint point `(x^{w_1}, ..., x^{w_s}, y)` of a
//!   diagonal atomic policy, with moment matrix of size `(s + 1) n + 1`;
//! * [`build_gpm_fixed_y`]: one measure per state on recommended flows, non-participants fixed;
//! * [`build_two_link_univariate`]: the same for two routes, written in the single variable
//!   `x_1` with interval support encoded by localizing matrices, which makes it exact.
//!
//! Every program is generated from polynomials, so its matrices (objective `C`, obedience
//! `A^{(i,j)}`, Nash `B^{(i,j)}`, simplex `S` and second-moment `T`) are the canonical symmetric
//! Gram matrices of those polynomials in the monomial basis.

pub mod poly;
mod tms;

pub use tms::{check_rank1, DiagonalLayout, TmsCheck, TmsVerdict};

use crate::error::{Error, Result};
use crate::scenario::RoutingScenario;
use crate::sdp::{self, sdpa::SdpaProblem, Equality, Lmi, LmiBlock, SdpOptions};
use nalgebra::DMatrix;
use poly::{basis_degree, monomials, Exponent, Polynomial};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProgramKind {
    DiagonalAtomic,
    FixedNonparticipants,
    TwoLinkUnivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintLabel {
    /// Recommendation `i` is weakly better than route `j`: `A^{(i,j)}`.
    Obedience { i: usize, j: usize },
    /// Non-participants on route `i` do not prefer route `j`: `B^{(i,j)}`.
    Nash { i: usize, j: usize },
    /// Participating flow of atom or state `k` has total mass `nu T`: `S_x^{(k)}`.
    ParticipantMass { k: usize },
    /// Non-participating flow has total mass `(1 - nu) T`: `S_y`.
    NonparticipantMass,
    /// `x_i (sum_j x_j - nu T) = 0` for atom or state `k`: `T_x^{(i,k)}`.
    ParticipantMoment { i: usize, k: usize },
    /// `y_i (sum_j y_j - (1 - nu) T) = 0`: `T_y^{(i)}`.
    NonparticipantMoment { i: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    NonNegative,
    Zero,
}

/// `sum_m L_m(polys[m]) >= 0` or `= 0`, with `L_m` the moment functional of measure `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraint {
    pub label: ConstraintLabel,
    pub sense: Sense,
    pub polys: Vec<Polynomial>,
}

/// A probability measure whose moments up to degree `2 * degree` are program variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub name: String,
    pub nvars: usize,
    pub degree: u32,
    /// Polynomials known to be non-negative on the support.
    pub localizers: Vec<Polynomial>,
    /// Whether the support lies in the non-negative orthant, making every moment non-negative.
    pub nonnegative_orthant: bool,
    /// Affine images of the variables in a lower-dimensional chart of the support.
    chart: Vec<Polynomial>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentProgram {
    kind: ProgramKind,
    measures: Vec<Measure>,
    objective: Vec<Polynomial>,
    constraints: Vec<MomentConstraint>,
    layout: Option<DiagonalLayout>,
    /// Typical flow magnitude, used to scale the chart before solving.
    flow_scale: f64,
}

impl MomentProgram {
    pub fn kind(&self) -> ProgramKind {
        self.kind
    }

    pub fn measures(&self) -> &[Measure] {
        &self.measures
    }

    pub fn objective(&self) -> &[Polynomial] {
        &self.objective
    }

    pub fn constraints(&self) -> &[MomentConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, label: ConstraintLabel) -> Option<&MomentConstraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    /// Block structure of the diagonal program.
    pub fn layout(&self) -> Option<&DiagonalLayout> {
        self.layout.as_ref()
    }

    /// Size of the first measure's moment matrix.
    pub fn dimension(&self) -> usize {
        self.basis(0).len()
    }

    /// Monomial basis of measure `m`'s moment matrix.
    pub fn basis(&self, m: usize) -> Vec<Exponent> {
        monomials(self.measures[m].nvars, self.measures[m].degree)
    }

    /// Canonical symmetric matrix `G` with `z^T G z = p` in the basis of measure `m`: each
    /// monomial sits on the first basis pair producing it, split evenly off the diagonal.
    pub fn gram(&self, m: usize, p: &Polynomial) -> DMatrix<f64> {
        let basis = self.basis(m);
        let mut first: HashMap<Exponent, (usize, usize)> = HashMap::new();
        for a in 0..basis.len() {
            for b in a..basis.len() {
                first.entry(add_exp(&basis[a], &basis[b])).or_insert((a, b));
            }
        }
        let mut g = DMatrix::zeros(basis.len(), basis.len());
        for (e, c) in p.terms() {
            let &(a, b) = first.get(e).expect("polynomial degree exceeds the moment basis");
            if a == b {
                g[(a, a)] += c;
            } else {
                g[(a, b)] += c / 2.0;
                g[(b, a)] += c / 2.0;
            }
        }
        g
    }

    /// `C` for measure `m`.
    pub fn objective_matrix(&self, m: usize) -> DMatrix<f64> {
        self.gram(m, &self.objective[m])
    }

    /// Matrix of constraint `label` on measure `m`.
    pub fn constraint_matrix(&self, label: ConstraintLabel, m: usize) -> Option<DMatrix<f64>> {
        self.constraint(label).map(|c| self.gram(m, &c.polys[m]))
    }

    /// Objective and constraint values when every measure is a Dirac mass at `points[m]`.
    pub fn evaluate_at(&self, points: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let obj = self.objective.iter().zip(points).map(|(p, x)| p.eval(x)).sum();
        let cons = self
            .constraints
            .iter()
            .map(|c| c.polys.iter().zip(points).map(|(p, x)| p.eval(x)).sum())
            .collect();
        (obj, cons)
    }

    /// Largest violation of the program's constraints by Dirac masses at `points`, including
    /// support conditions.
    pub fn dirac_violation(&self, points: &[Vec<f64>]) -> f64 {
        let (_, values) = self.evaluate_at(points);
        let mut worst: f64 = 0.0;
        for (c, v) in self.constraints.iter().zip(values) {
            worst = worst.max(match c.sense {
                Sense::NonNegative => -v,
                Sense::Zero => v.abs(),
            });
        }
        for (meas, x) in self.measures.iter().zip(points) {
            if meas.nonnegative_orthant {
                worst = worst.max(x.iter().fold(0.0, |w, &v| w.max(-v)));
            }
            for g in &meas.localizers {
                worst = worst.max(-g.eval(x));
            }
        }
        worst
    }

    /// LMI over the raw moments of every measure, equalities kept as equalities.
    pub fn to_lmi(&self) -> Lmi {
        self.assemble(false).0
    }

    /// Sparse SDPA form of [`Self::to_lmi`] with equalities split into paired inequalities.
    pub fn to_sdpa(&self) -> SdpaProblem {
        let mut comments = vec![format!("infodesign moment relaxation: {:?}", self.kind)];
        let mut offset = 1;
        for meas in &self.measures {
            let count = monomials(meas.nvars, 2 * meas.degree).len();
            comments.push(format!(
                "variables {}..{}: moments of measure {} ({} variables, degree <= {})",
                offset,
                offset + count - 1,
                meas.name,
                meas.nvars,
                2 * meas.degree
            ));
            offset += count;
        }
        SdpaProblem::from_lmi(&self.to_lmi(), comments)
    }

    /// Builds the LMI. With `chart` the support equalities are eliminated by substitution and
    /// flows are rescaled, which yields a strictly feasible problem for the interior-point method.
    fn assemble(&self, chart: bool) -> (Lmi, MomentIndex) {
        let index = MomentIndex::new(self, chart);
        let mut lmi = Lmi::new(index.num_vars);
        let mut lp_rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let normalize = |row: Vec<(usize, f64)>| -> Option<Vec<(usize, f64)>> {
            let scale = row.iter().fold(0.0f64, |s, &(_, c)| s.max(c.abs()));
            if scale <= 1e-13 {
                None
            } else if chart {
                Some(row.into_iter().map(|(i, c)| (i, c / scale)).collect())
            } else {
                Some(row)
            }
        };
        for (m, meas) in self.measures.iter().enumerate() {
            let r = index.chart_vars[m];
            let off = index.offsets[m];
            lmi.equalities.push(Equality { coeffs: vec![(off, 1.0)], rhs: 1.0 });
            let basis = monomials(r, meas.degree);
            if basis.len() > 1 {
                let mut blk = LmiBlock::new(basis.len(), false);
                for a in 0..basis.len() {
                    for b in a..basis.len() {
                        blk.push(Some(off + index.maps[m][&add_exp(&basis[a], &basis[b])]), a, b, 1.0);
                    }
                }
                lmi.blocks.push(blk);
            }
            for g in &meas.localizers {
                let half = (g.degree() + 1) / 2;
                if half > meas.degree {
                    continue;
                }
                let lb = monomials(r, meas.degree - half);
                let gc = index.image(m, g);
                if lb.len() == 1 {
                    if let Some(row) = normalize(index.form(m, &gc)) {
                        lp_rows.push(row);
                    }
                    continue;
                }
                let mut blk = LmiBlock::new(lb.len(), false);
                for a in 0..lb.len() {
                    for b in a..lb.len() {
                        let mut mono = Polynomial::zero(r);
                        mono.add_term(add_exp(&lb[a], &lb[b]), 1.0);
                        for (i, c) in index.form(m, &gc.mul(&mono)) {
                            blk.push(Some(i), a, b, c);
                        }
                    }
                }
                if !blk.entries.is_empty() {
                    lmi.blocks.push(blk);
                }
            }
            if meas.nonnegative_orthant {
                for e in monomials(meas.nvars, 2 * meas.degree).into_iter().skip(1) {
                    let mut mono = Polynomial::zero(meas.nvars);
                    mono.add_term(e, 1.0);
                    if let Some(row) = normalize(index.form(m, &index.image(m, &mono))) {
                        lp_rows.push(row);
                    }
                }
            }
            if !chart {
                // Support equalities of degree one, multiplied by monomials beyond degree one.
                for c in &self.constraints {
                    let p = &c.polys[m];
                    if c.sense != Sense::Zero || p.is_zero() || p.degree() != 1 || self.only_on(c) != Some(m) {
                        continue;
                    }
                    for e in monomials(meas.nvars, 2 * meas.degree - 1).into_iter().filter(|e| e.iter().sum::<u32>() >= 2) {
                        let mut mono = Polynomial::zero(meas.nvars);
                        mono.add_term(e, 1.0);
                        let row = index.form(m, &p.mul(&mono));
                        if !row.is_empty() {
                            lmi.equalities.push(Equality { coeffs: row, rhs: 0.0 });
                        }
                    }
                }
            }
        }
        for c in &self.constraints {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (m, p) in c.polys.iter().enumerate() {
                row.extend(index.form(m, &index.image(m, p)));
            }
            let row = merge_row(row);
            if chart && row.iter().all(|(i, _)| index.offsets.contains(i)) {
                // Data-only rows: the unit masses turn them into numbers, checked up to rounding.
                let value: f64 = row.iter().map(|&(_, c)| c).sum();
                let size: f64 = c.polys.iter().map(|p| p.max_abs_coefficient()).sum::<f64>()
                    * (1.0 + self.flow_scale).powi(c.polys.iter().map(|p| p.degree()).max().unwrap_or(0) as i32);
                let slack = match c.sense {
                    Sense::NonNegative => -value,
                    Sense::Zero => value.abs(),
                };
                if slack <= 1e-10 * size {
                    continue;
                }
            }
            match c.sense {
                Sense::NonNegative => {
                    if let Some(row) = normalize(row) {
                        lp_rows.push(row);
                    }
                }
                Sense::Zero => {
                    if let Some(row) = normalize(row) {
                        lmi.equalities.push(Equality { coeffs: row, rhs: 0.0 });
                    }
                }
            }
        }
        if !lp_rows.is_empty() {
            let mut blk = LmiBlock::new(lp_rows.len(), true);
            for (k, row) in lp_rows.iter().enumerate() {
                for &(i, c) in row {
                    blk.push(Some(i), k, k, c);
                }
            }
            lmi.blocks.push(blk);
        }
        let mut obj = vec![0.0; index.num_vars];
        for (m, p) in self.objective.iter().enumerate() {
            for (i, c) in index.form(m, &index.image(m, p)) {
                obj[i] += c;
            }
        }
        lmi.objective = obj;
        (lmi, index)
    }

    /// The single measure a constraint involves, if any.
    fn only_on(&self, c: &MomentConstraint) -> Option<usize> {
        let nz: Vec<usize> = c.polys.iter().enumerate().filter(|(_, p)| !p.is_zero()).map(|(m, _)| m).collect();
        (nz.len() == 1).then(|| nz[0])
    }
}

fn add_exp(a: &[u32], b: &[u32]) -> Exponent {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn merge_row(row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (i, c) in row {
        *acc.entry(i).or_insert(0.0) += c;
    }
    acc.into_iter().filter(|&(_, c)| c != 0.0).collect()
}

/// Maps moments of each measure (in chart coordinates) to LMI variables.
struct MomentIndex {
    offsets: Vec<usize>,
    maps: Vec<HashMap<Exponent, usize>>,
    chart_vars: Vec<usize>,
    images: Vec<Vec<Polynomial>>,
    num_vars: usize,
}

impl MomentIndex {
    fn new(program: &MomentProgram, chart: bool) -> Self {
        let mut offsets = Vec::new();
        let mut maps = Vec::new();
        let mut chart_vars = Vec::new();
        let mut images = Vec::new();
        let mut total = 0;
        for meas in &program.measures {
            let img: Vec<Polynomial> = if chart {
                let r = meas.chart.first().map_or(0, |p| p.nvars());
                let scale: Vec<Polynomial> =
                    (0..r).map(|j| Polynomial::var(r, j).scaled(program.flow_scale)).collect();
                meas.chart.iter().map(|p| if r == 0 { p.clone() } else { p.substitute(&scale) }).collect()
            } else {
                (0..meas.nvars).map(|i| Polynomial::var(meas.nvars, i)).collect()
            };
            let r = img.first().map_or(0, |p| p.nvars());
            let monos = monomials(r, 2 * meas.degree);
            let map: HashMap<Exponent, usize> = monos.iter().cloned().enumerate().map(|(k, e)| (e, k)).collect();
            offsets.push(total);
            total += monos.len();
            maps.push(map);
            chart_vars.push(r);
            images.push(img);
        }
        Self { offsets, maps, chart_vars, images, num_vars: total }
    }

    /// `p` in chart coordinates of measure `m`.
    fn image(&self, m: usize, p: &Polynomial) -> Polynomial {
        if p.is_zero() {
            return Polynomial::zero(self.chart_vars[m]);
        }
        let q = p.substitute(&self.images[m]);
        q.pruned(1e-14 * q.max_abs_coefficient())
    }

    /// Linear form of `L_m(q)` for `q` already in chart coordinates.
    fn form(&self, m: usize, q: &Polynomial) -> Vec<(usize, f64)> {
        q.terms()
            .map(|(e, c)| {
                let k = *self.maps[m].get(e).expect("polynomial degree exceeds the relaxation order");
                (self.offsets[m] + k, c)
            })
            .collect()
    }
}

/// Result of [`solve_moment_sdp`].
#[derive(Debug, Clone)]
pub struct MomentSolution {
    /// Optimal value of the relaxation.
    pub value: f64,
    /// Certified lower bound from the dual iterate.
    pub dual_bound: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    /// Moment matrix of each measure in its original basis.
    pub moment_matrices: Vec<DMatrix<f64>>,
    /// Moments up to twice the basis degree of each measure, in [`poly::monomials`] order.
    pub moments: Vec<Vec<f64>>,
    /// Rank-one check of the first moment matrix (diagonal programs only).
    pub tms: Option<TmsCheck>,
    /// Rank-one check of the matrix rebuilt from the first moments, when that matrix is also
    /// feasible and optimal while the solver's matrix is not rank one.
    pub rounded: Option<TmsCheck>,
}

impl MomentSolution {
    /// Admissible rank-one point: the direct extraction if available, else the rounded one.
    pub fn extracted_point(&self) -> Option<&[f64]> {
        [self.tms.as_ref(), self.rounded.as_ref()]
            .into_iter()
            .flatten()
            .find(|t| t.verdict == TmsVerdict::Rank1Admissible)
            .and_then(|t| t.extracted_point.as_deref())
    }
}

/// Solves the relaxation with the built-in interior-point method.
pub fn solve_moment_sdp(program: &MomentProgram) -> Result<MomentSolution> {
    solve_moment_sdp_with(program, &SdpOptions::default())
}

pub fn solve_moment_sdp_with(program: &MomentProgram, opts: &SdpOptions) -> Result<MomentSolution> {
    let (mut lmi, index) = program.assemble(true);
    let obj_scale = lmi.objective.iter().fold(0.0f64, |s, c| s.max(c.abs())).max(1e-300);
    for c in &mut lmi.objective {
        *c /= obj_scale;
    }
    let sol = sdp::solve(&lmi, opts)?;
    let value = sol.value * obj_scale;
    let dual_bound = sol.dual_value * obj_scale;
    let mut moments = Vec::new();
    let mut matrices = Vec::new();
    for (m, meas) in program.measures.iter().enumerate() {
        let eval = |p: &Polynomial| -> f64 {
            index.form(m, &index.image(m, p)).iter().map(|&(i, c)| c * sol.x[i]).sum()
        };
        let mono_poly = |e: &Exponent| {
            let mut p = Polynomial::zero(meas.nvars);
            p.add_term(e.clone(), 1.0);
            p
        };
        let all = monomials(meas.nvars, 2 * meas.degree);
        let values: Vec<f64> = all.iter().map(|e| eval(&mono_poly(e))).collect();
        let pos: HashMap<&Exponent, usize> = all.iter().enumerate().map(|(k, e)| (e, k)).collect();
        let basis = monomials(meas.nvars, meas.degree);
        let mat = DMatrix::from_fn(basis.len(), basis.len(), |a, b| values[pos[&add_exp(&basis[a], &basis[b])]]);
        moments.push(values);
        matrices.push(mat);
    }
    let (tms, rounded) = match &program.layout {
        Some(layout) => {
            let check = check_rank1(&matrices[0], layout);
            let rounded = if check.verdict == TmsVerdict::Rank1Admissible {
                None
            } else {
                round_to_rank1(program, layout, &matrices[0], value)
            };
            (Some(check), rounded)
        }
        None => (None, None),
    };
    Ok(MomentSolution {
        value,
        dual_bound,
        relative_gap: (value - dual_bound).abs() / (1.0 + value.abs() + dual_bound.abs()),
        iterations: sol.iterations,
        moment_matrices: matrices,
        moments,
        tms,
        rounded,
    })
}

/// `[1, eta][1, eta]^T` from the first row of `m`, kept when it satisfies every constraint and
/// attains the relaxation value.
fn round_to_rank1(program: &MomentProgram, layout: &DiagonalLayout, m: &DMatrix<f64>, value: f64) -> Option<TmsCheck> {
    let eta: Vec<f64> = (1..m.ncols()).map(|j| m[(0, j)]).collect();
    let tol = 1e-6 * (1.0 + value.abs());
    let (obj, _) = program.evaluate_at(std::slice::from_ref(&eta));
    if program.dirac_violation(std::slice::from_ref(&eta)) > tol || obj > value + tol {
        return None;
    }
    let mut v = vec![1.0];
    v.extend(&eta);
    let n = v.len();
    let outer = DMatrix::from_fn(n, n, |a, b| v[a] * v[b]);
    Some(check_rank1(&outer, layout))
}

fn check_nu(nu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&nu) || !nu.is_finite() {
        return Err(Error::Validation(format!("participation rate {nu} outside [0, 1]")));
    }
    Ok(())
}

/// Route latency polynomials `c_{w,i}(f)` for route-flow polynomials `f`.
fn route_latency_polys(sc: &RoutingScenario, w: usize, f: &[Polynomial]) -> Vec<Polynomial> {
    let link = link_flow_polys(sc, f);
    let lat: Vec<Polynomial> = (0..sc.num_links()).map(|e| latency_poly(sc, w, e, &link[e])).collect();
    sc.routes()
        .iter()
        .map(|r| {
            let mut p = Polynomial::zero(f[0].nvars());
            for &e in r {
                p.add_assign(&lat[e]);
            }
            p
        })
        .collect()
}

fn link_flow_polys(sc: &RoutingScenario, f: &[Polynomial]) -> Vec<Polynomial> {
    let nv = f[0].nvars();
    let mut link = vec![Polynomial::zero(nv); sc.num_links()];
    for (i, r) in sc.routes().iter().enumerate() {
        for &e in r {
            link[e].add_assign(&f[i]);
        }
    }
    link
}

fn latency_poly(sc: &RoutingScenario, w: usize, e: usize, flow: &Polynomial) -> Polynomial {
    let mut p = Polynomial::zero(flow.nvars());
    for (d, &a) in sc.latency(w, e).coefficients().iter().enumerate() {
        if a != 0.0 {
            p.add_assign(&flow.pow(d as u32).scaled(a));
        }
    }
    p
}

/// `sum_e F_e l_{w,e}(F_e)`.
fn total_latency_poly(sc: &RoutingScenario, w: usize, f: &[Polynomial]) -> Polynomial {
    let link = link_flow_polys(sc, f);
    let mut p = Polynomial::zero(f[0].nvars());
    for (e, fe) in link.iter().enumerate() {
        p.add_assign(&fe.mul(&latency_poly(sc, w, e, fe)));
    }
    p
}

/// Chart of the simplex `{x >= 0, sum x = mass}` on variables `block`: the last coordinate is
/// eliminated; a zero mass pins the block to zero.
fn simplex_chart(nvars: usize, blocks: &[(usize, usize, f64)]) -> Vec<Polynomial> {
    let r: usize = blocks.iter().map(|&(_, len, mass)| if mass == 0.0 { 0 } else { len - 1 }).sum();
    let mut chart = vec![Polynomial::zero(r); nvars];
    let mut col = 0;
    for &(off, len, mass) in blocks {
        if mass == 0.0 {
            continue;
        }
        let mut last = Polynomial::constant(r, mass);
        for i in 0..len - 1 {
            let v = Polynomial::var(r, col + i);
            chart[off + i] = v.clone();
            last = last.sub(&v);
        }
        chart[off + len - 1] = last;
        col += len - 1;
    }
    chart
}

fn sum_of(vars: &[Polynomial]) -> Polynomial {
    let mut s = Polynomial::zero(vars[0].nvars());
    for v in vars {
        s.add_assign(v);
    }
    s
}

/// Moment relaxation of diagonal atomic design: one measure on
/// `z = (x^{w_1}, ..., x^{w_s}, y)` with moments of degree at most two.
pub fn build_diagonal_sdp(scenario: &RoutingScenario, nu: f64) -> Result<MomentProgram> {
    check_nu(nu)?;
    let t = scenario.demand();
    build_diagonal_sdp_with_masses(scenario, nu * t, (1.0 - nu) * t)
}

/// As [`build_diagonal_sdp`] with explicit participant and non-participant masses; masses that
/// do not add up to the demand, or negative ones, produce programs without feasible points.
pub fn build_diagonal_sdp_with_masses(
    scenario: &RoutingScenario,
    participant_mass: f64,
    nonparticipant_mass: f64,
) -> Result<MomentProgram> {
    if scenario.degree() != 1 {
        return Err(Error::Unsupported(format!(
            "the diagonal relaxation needs affine latencies, got degree {}",
            scenario.degree()
        )));
    }
    let s = scenario.num_states();
    let n = scenario.num_routes();
    let nv = (s + 1) * n;
    let var = |i: usize| Polynomial::var(nv, i);
    let xs: Vec<Vec<Polynomial>> = (0..s).map(|w| (0..n).map(|i| var(w * n + i)).collect()).collect();
    let ys: Vec<Polynomial> = (0..n).map(|i| var(s * n + i)).collect();
    let prior = scenario.prior();
    let mut objective = Polynomial::zero(nv);
    let mut lat = Vec::with_capacity(s);
    for w in 0..s {
        let f: Vec<Polynomial> = (0..n).map(|i| {
            let mut p = xs[w][i].clone();
            p.add_assign(&ys[i]);
            p
        }).collect();
        objective.add_assign(&total_latency_poly(scenario, w, &f).scaled(prior[w]));
        lat.push(route_latency_polys(scenario, w, &f));
    }
    let mut constraints = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let mut p = Polynomial::zero(nv);
            for w in 0..s {
                p.add_assign(&xs[w][i].mul(&lat[w][j].sub(&lat[w][i])).scaled(prior[w]));
            }
            constraints.push(MomentConstraint { label: ConstraintLabel::Obedience { i, j }, sense: Sense::NonNegative, polys: vec![p] });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut p = Polynomial::zero(nv);
            for w in 0..s {
                p.add_assign(&ys[i].mul(&lat[w][j].sub(&lat[w][i])).scaled(prior[w]));
            }
            constraints.push(MomentConstraint { label: ConstraintLabel::Nash { i, j }, sense: Sense::NonNegative, polys: vec![p] });
        }
    }
    for k in 0..s {
        let excess = sum_of(&xs[k]).sub(&Polynomial::constant(nv, participant_mass));
        constraints.push(MomentConstraint { label: ConstraintLabel::ParticipantMass { k }, sense: Sense::Zero, polys: vec![excess] });
    }
    let y_excess = sum_of(&ys).sub(&Polynomial::constant(nv, nonparticipant_mass));
    constraints.push(MomentConstraint { label: ConstraintLabel::NonparticipantMass, sense: Sense::Zero, polys: vec![y_excess.clone()] });
    for k in 0..s {
        let excess = sum_of(&xs[k]).sub(&Polynomial::constant(nv, participant_mass));
        for i in 0..n {
            constraints.push(MomentConstraint {
                label: ConstraintLabel::ParticipantMoment { i, k },
                sense: Sense::Zero,
                polys: vec![xs[k][i].mul(&excess)],
            });
        }
    }
    for i in 0..n {
        constraints.push(MomentConstraint {
            label: ConstraintLabel::NonparticipantMoment { i },
            sense: Sense::Zero,
            polys: vec![ys[i].mul(&y_excess)],
        });
    }
    let mut blocks: Vec<(usize, usize, f64)> = (0..s).map(|w| (w * n, n, participant_mass)).collect();
    blocks.push((s * n, n, nonparticipant_mass));
    let measure = Measure {
        name: "joint diagonal point".into(),
        nvars: nv,
        degree: 1,
        localizers: Vec::new(),
        nonnegative_orthant: true,
        chart: simplex_chart(nv, &blocks),
    };
    Ok(MomentProgram {
        kind: ProgramKind::DiagonalAtomic,
        measures: vec![measure],
        objective: vec![objective],
        constraints,
        layout: Some(DiagonalLayout::new(s, n, participant_mass, nonparticipant_mass)),
        flow_scale: scenario.demand(),
    })
}

fn check_nonparticipants(scenario: &RoutingScenario, y: &[f64]) -> Result<f64> {
    let n = scenario.num_routes();
    if y.len() != n {
        return Err(Error::Dimension { expected: n, got: y.len() });
    }
    if y.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Validation("non-participant flow must be non-negative".into()));
    }
    let t = scenario.demand();
    let mass: f64 = y.iter().sum();
    if mass > t * (1.0 + 1e-12) {
        return Err(Error::Validation(format!("non-participant flow {mass} exceeds the demand {t}")));
    }
    Ok((t - mass).max(0.0))
}

/// Relaxation of private design with the non-participant flow fixed at `y`: one measure per state
/// on the recommended flow `x` in `P_n(T - sum y)`, moments up to twice the basis degree.
pub fn build_gpm_fixed_y(scenario: &RoutingScenario, y: &[f64]) -> Result<MomentProgram> {
    let xm = check_nonparticipants(scenario, y)?;
    let s = scenario.num_states();
    let n = scenario.num_routes();
    let d = basis_degree(scenario.degree());
    let prior = scenario.prior();
    let mut objective = Vec::with_capacity(s);
    let mut lat = Vec::with_capacity(s);
    let xs: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    for w in 0..s {
        let f: Vec<Polynomial> = (0..n).map(|i| {
            let mut p = xs[i].clone();
            p.add_assign(&Polynomial::constant(n, y[i]));
            p
        }).collect();
        objective.push(total_latency_poly(scenario, w, &f).scaled(prior[w]));
        lat.push(route_latency_polys(scenario, w, &f));
    }
    let mut constraints = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let polys = (0..s).map(|w| xs[i].mul(&lat[w][j].sub(&lat[w][i])).scaled(prior[w])).collect();
            constraints.push(MomentConstraint { label: ConstraintLabel::Obedience { i, j }, sense: Sense::NonNegative, polys });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let polys = (0..s).map(|w| lat[w][j].sub(&lat[w][i]).scaled(prior[w] * y[i])).collect();
            constraints.push(MomentConstraint { label: ConstraintLabel::Nash { i, j }, sense: Sense::NonNegative, polys });
        }
    }
    let excess = sum_of(&xs).sub(&Polynomial::constant(n, xm));
    let only = |k: usize, p: Polynomial| (0..s).map(|w| if w == k { p.clone() } else { Polynomial::zero(n) }).collect();
    for k in 0..s {
        constraints.push(MomentConstraint { label: ConstraintLabel::ParticipantMass { k }, sense: Sense::Zero, polys: only(k, excess.clone()) });
    }
    for k in 0..s {
        for i in 0..n {
            constraints.push(MomentConstraint {
                label: ConstraintLabel::ParticipantMoment { i, k },
                sense: Sense::Zero,
                polys: only(k, xs[i].mul(&excess)),
            });
        }
    }
    let measures = (0..s)
        .map(|w| Measure {
            name: format!("recommendations in state {}", scenario.states()[w]),
            nvars: n,
            degree: d,
            localizers: if d > 1 { xs.clone() } else { Vec::new() },
            nonnegative_orthant: true,
            chart: simplex_chart(n, &[(0, n, xm)]),
        })
        .collect();
    Ok(MomentProgram {
        kind: ProgramKind::FixedNonparticipants,
        measures,
        objective,
        constraints,
        layout: None,
        flow_scale: scenario.demand(),
    })
}

/// Two-route relaxation in the single variable `x_1` on `[0, T - sum y]` (`x_2` substituted),
/// with moments up to degree `2 ceil((D + 1) / 2)` and interval support encoded by the localizing
/// matrix of `x_1 (T - sum y - x_1)`.
pub fn build_two_link_univariate(scenario: &RoutingScenario, y: &[f64], nu: f64) -> Result<MomentProgram> {
    check_nu(nu)?;
    if scenario.num_routes() != 2 {
        return Err(Error::Validation(format!(
            "the univariate relaxation needs two routes, got {}",
            scenario.num_routes()
        )));
    }
    let xm = check_nonparticipants(scenario, y)?;
    let t = scenario.demand();
    if (xm - nu * t).abs() > 1e-9 * (1.0 + t) {
        return Err(Error::Validation(format!("non-participant mass {} does not match nu = {nu}", t - xm)));
    }
    let s = scenario.num_states();
    let degree = scenario.degree();
    let k = (degree as u32 + 2) / 2;
    let prior = scenario.prior();
    let x1 = Polynomial::var(1, 0);
    let x2 = Polynomial::constant(1, xm).sub(&x1);
    let xs = [x1.clone(), x2];
    let f: Vec<Polynomial> = (0..2).map(|i| {
        let mut p = xs[i].clone();
        p.add_assign(&Polynomial::constant(1, y[i]));
        p
    }).collect();
    let mut objective = Vec::with_capacity(s);
    let mut lat = Vec::with_capacity(s);
    for w in 0..s {
        objective.push(total_latency_poly(scenario, w, &f).scaled(prior[w]));
        lat.push(route_latency_polys(scenario, w, &f));
    }
    let mut constraints = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            let polys = (0..s).map(|w| xs[i].mul(&lat[w][j].sub(&lat[w][i])).scaled(prior[w])).collect();
            constraints.push(MomentConstraint { label: ConstraintLabel::Obedience { i, j }, sense: Sense::NonNegative, polys });
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            let polys = (0..s).map(|w| lat[w][j].sub(&lat[w][i]).scaled(prior[w] * y[i])).collect();
            constraints.push(MomentConstraint { label: ConstraintLabel::Nash { i, j }, sense: Sense::NonNegative, polys });
        }
    }
    let interval = x1.mul(&Polynomial::constant(1, xm).sub(&x1));
    let chart = if xm == 0.0 { vec![Polynomial::zero(0)] } else { vec![Polynomial::var(1, 0)] };
    let measures = (0..s)
        .map(|w| Measure {
            name: format!("route-1 recommendation in state {}", scenario.states()[w]),
            nvars: 1,
            degree: k,
            localizers: vec![interval.clone()],
            nonnegative_orthant: false,
            chart: chart.clone(),
        })
        .collect();
    Ok(MomentProgram {
        kind: ProgramKind::TwoLinkUnivariate,
        measures,
        objective,
        constraints,
        layout: None,
        flow_scale: scenario.demand(),
    })
}

/// Optimal value and per-state moments `(eta_w^0, ..., eta_w^{D+1})` of the exact two-route
/// program with fixed non-participants.
#[derive(Debug, Clone)]
pub struct UnivariateBound {
    pub value: f64,
    pub moments: Vec<Vec<f64>>,
    pub relative_gap: f64,
}

pub fn two_link_univariate_sdp(scenario: &RoutingScenario, y: &[f64], nu: f64) -> Result<UnivariateBound> {
    let program = build_two_link_univariate(scenario, y, nu)?;
    let sol = solve_moment_sdp(&program)?;
    let keep = scenario.degree() + 2;
    Ok(UnivariateBound {
        value: sol.value,
        moments: sol.moments.iter().map(|m| m[..keep].to_vec()).collect(),
        relative_gap: sol.relative_gap,
    })
}

/// Writes `program` in sparse SDPA format.
pub fn export_sdpa(program: &MomentProgram, path: impl AsRef<Path>) -> Result<()> {
    program.to_sdpa().write(path)
}

pub fn import_sdpa(path: impl AsRef<Path>) -> Result<SdpaProblem> {
    SdpaProblem::read(path)
}

//! Dense primal-dual interior-point method for small linear matrix inequalities.
//!
//! Problems are posed as
//!
//! ```text
//! minimize    c^T v + c0
//! subject to  F_0 + sum_i v_i F_i  >= 0   (block diagonal, PSD or entrywise)
//!             E v = f
//! ```
//!
//! Equalities are removed through an SVD null-space parametrization. The remaining LMI is the
//! dual of a standard-form SDP, which is solved with Nesterov-Todd scaling and a Mehrotra
//! predictor-corrector.

pub mod sdpa;

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};

/// One entry `(var, row, col, value)` of an LMI block; `var = None` marks the constant term.
/// Only `row <= col` is stored; the lower triangle mirrors it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub var: Option<usize>,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub size: usize,
    /// A diagonal block holds `size` scalar inequalities.
    pub diagonal: bool,
    pub entries: Vec<BlockEntry>,
}

impl LmiBlock {
    pub fn new(size: usize, diagonal: bool) -> Self {
        Self { size, diagonal, entries: Vec::new() }
    }

    pub fn push(&mut self, var: Option<usize>, row: usize, col: usize, value: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        debug_assert!(col < self.size && (!self.diagonal || row == col));
        if value != 0.0 {
            self.entries.push(BlockEntry { var, row, col, value });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lmi {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub blocks: Vec<LmiBlock>,
    pub equalities: Vec<Equality>,
}

impl Lmi {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: vec![0.0; num_vars], ..Default::default() }
    }

    /// `F(v)` for block `b`, dense.
    pub fn block_value(&self, b: usize, v: &[f64]) -> DMatrix<f64> {
        let blk = &self.blocks[b];
        let mut m = DMatrix::zeros(blk.size, blk.size);
        for e in &blk.entries {
            let s = e.var.map_or(1.0, |i| v[i]);
            m[(e.row, e.col)] += s * e.value;
            if e.row != e.col {
                m[(e.col, e.row)] += s * e.value;
            }
        }
        m
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(v).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Largest violation of the block inequalities and equalities at `v`.
    pub fn violation(&self, v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..self.blocks.len() {
            let m = self.block_value(b, v);
            let low = if self.blocks[b].diagonal {
                m.diagonal().iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            };
            worst = worst.max(-low);
        }
        for eq in &self.equalities {
            let lhs: f64 = eq.coeffs.iter().map(|&(i, c)| c * v[i]).sum();
            worst = worst.max((lhs - eq.rhs).abs());
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Relative duality gap target.
    pub gap_tol: f64,
    /// Relative primal and dual residual target.
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Minimizer in the original variables.
    pub x: Vec<f64>,
    /// Objective at `x`.
    pub value: f64,
    /// Dual bound on the optimal value.
    pub dual_value: f64,
    /// `|value - dual_value| / (1 + |value| + |dual_value|)`.
    pub relative_gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
}

/// Symmetric block value: dense or diagonal.
#[derive(Debug, Clone)]
enum Sym {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Sym {
    fn zeros_like(blk: &LmiBlock) -> Self {
        if blk.diagonal {
            Sym::Diag(DVector::zeros(blk.size))
        } else {
            Sym::Dense(DMatrix::zeros(blk.size, blk.size))
        }
    }

    fn identity(blk: &LmiBlock, s: f64) -> Self {
        if blk.diagonal {
            Sym::Diag(DVector::from_element(blk.size, s))
        } else {
            Sym::Dense(DMatrix::identity(blk.size, blk.size) * s)
        }
    }

    fn dot(&self, other: &Sym) -> f64 {
        match (self, other) {
            (Sym::Dense(a), Sym::Dense(b)) => a.dot(b),
            (Sym::Diag(a), Sym::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds differ"),
        }
    }

    fn axpy(&mut self, a: f64, x: &Sym) {
        match (self, x) {
            (Sym::Dense(m), Sym::Dense(v)) => *m += v * a,
            (Sym::Diag(m), Sym::Diag(v)) => *m += v * a,
            _ => unreachable!("block kinds differ"),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    fn add_entry(&mut self, row: usize, col: usize, v: f64) {
        match self {
            Sym::Dense(m) => {
                m[(row, col)] += v;
                if row != col {
                    m[(col, row)] += v;
                }
            }
            Sym::Diag(d) => d[row] += v,
        }
    }
}

/// Nesterov-Todd scaling of one block: `G^T Z G = G^{-1} X G^{-T} = diag(d)`, `H = G^{-T}`.
enum Scaling {
    Dense { g: DMatrix<f64>, h: DMatrix<f64>, d: DVector<f64> },
    Diag { g: DVector<f64>, d: DVector<f64> },
}

impl Scaling {
    fn new(x: &Sym, z: &Sym) -> Option<Self> {
        match (x, z) {
            (Sym::Dense(x), Sym::Dense(z)) => {
                let lx = Cholesky::new(x.clone())?.l();
                let lz = Cholesky::new(z.clone())?.l();
                let svd = SVD::new(lz.transpose() * &lx, true, true);
                let u = svd.u?;
                let vt = svd.v_t?;
                let s = svd.singular_values;
                if s.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                    return None;
                }
                let inv_sqrt = DMatrix::from_diagonal(&s.map(|v| 1.0 / v.sqrt()));
                let g = &lx * vt.transpose() * &inv_sqrt;
                let h = &lz * u * &inv_sqrt;
                Some(Scaling::Dense { g, h, d: s })
            }
            (Sym::Diag(x), Sym::Diag(z)) => {
                if x.iter().chain(z.iter()).any(|&v| !(v > 0.0)) {
                    return None;
                }
                let g = x.zip_map(z, |a, b| (a / b).sqrt().sqrt());
                let d = x.zip_map(z, |a, b| (a * b).sqrt());
                Some(Scaling::Diag { g, d })
            }
            _ => None,
        }
    }

    /// `G^T A G`.
    fn congruence(&self, a: &Sym) -> Sym {
        match (self, a) {
            (Scaling::Dense { g, .. }, Sym::Dense(a)) => Sym::Dense(g.transpose() * a * g),
            (Scaling::Diag { g, .. }, Sym::Diag(a)) => Sym::Diag(a.component_mul(g).component_mul(g)),
            _ => unreachable!("block kinds differ"),
        }
    }

    fn d(&self) -> &DVector<f64> {
        match self {
            Scaling::Dense { d, .. } | Scaling::Diag { d, .. } => d,
        }
    }

    /// Maps scaled directions back: `dX = G dX~ G^T`, `dZ = H dZ~ H^T`.
    fn unscale(&self, dx: &Sym, dz: &Sym) -> (Sym, Sym) {
        match (self, dx, dz) {
            (Scaling::Dense { g, h, .. }, Sym::Dense(dx), Sym::Dense(dz)) => {
                (Sym::Dense(g * dx * g.transpose()), Sym::Dense(h * dz * h.transpose()))
            }
            (Scaling::Diag { g, .. }, Sym::Diag(dx), Sym::Diag(dz)) => (
                Sym::Diag(dx.component_mul(g).component_mul(g)),
                Sym::Diag(dz.zip_map(g, |v, s| v / (s * s))),
            ),
            _ => unreachable!("block kinds differ"),
        }
    }
}

/// Largest `a <= 1` with `diag(d) + a * dm` positive semidefinite.
fn max_step(d: &DVector<f64>, dm: &Sym) -> f64 {
    let low = match dm {
        Sym::Dense(m) => {
            let n = d.len();
            let mut s = m.clone();
            for i in 0..n {
                for j in 0..n {
                    s[(i, j)] /= (d[i] * d[j]).sqrt();
                }
            }
            SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
        }
        Sym::Diag(v) => v.iter().zip(d.iter()).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min),
    };
    if low >= 0.0 {
        1.0
    } else {
        (-1.0 / low).min(1.0)
    }
}

/// Scaled complementarity right-hand side: `(2 (s mu I - D^2) - (dX dZ + dZ dX))_ij / (d_i + d_j)`.
fn complementarity_rhs(d: &DVector<f64>, target: f64, second: Option<(&Sym, &Sym)>) -> Sym {
    let n = d.len();
    match second {
        Some((Sym::Dense(a), Sym::Dense(b))) => {
            let prod = a * b;
            let mut r = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = -(prod[(i, j)] + prod[(j, i)]);
                    if i == j {
                        v += 2.0 * (target - d[i] * d[i]);
                    }
                    r[(i, j)] = v / (d[i] + d[j]);
                }
            }
            Sym::Dense(r)
        }
        Some((Sym::Diag(a), Sym::Diag(b))) => Sym::Diag(DVector::from_fn(n, |i, _| {
            (target - d[i] * d[i] - a[i] * b[i]) / d[i]
        })),
        None => Sym::Diag(DVector::from_fn(n, |i, _| (target - d[i] * d[i]) / d[i])),
        _ => unreachable!("block kinds differ"),
    }
}

/// Dense data of the equality-free problem `min b~ . w + k  s.t.  C - sum_j w_j A_j >= 0` is
/// represented through `C = F_0 + sum v0_i F_i` and `A_j = -sum_i N_ij F_i`.
struct Reduced {
    c: Vec<Sym>,
    a: Vec<Vec<Sym>>,
    /// Objective of the maximization `b^T w`.
    b: DVector<f64>,
    v0: DVector<f64>,
    null: DMatrix<f64>,
}

fn dense_blocks(lmi: &Lmi) -> (Vec<Sym>, Vec<Vec<Sym>>) {
    let mut f0: Vec<Sym> = lmi.blocks.iter().map(Sym::zeros_like).collect();
    let mut fi: Vec<Vec<Sym>> = (0..lmi.num_vars).map(|_| lmi.blocks.iter().map(Sym::zeros_like).collect()).collect();
    for (b, blk) in lmi.blocks.iter().enumerate() {
        for e in &blk.entries {
            match e.var {
                None => f0[b].add_entry(e.row, e.col, e.value),
                Some(i) => fi[i][b].add_entry(e.row, e.col, e.value),
            }
        }
    }
    (f0, fi)
}

fn reduce(lmi: &Lmi) -> Result<Reduced> {
    let p = lmi.num_vars;
    let q = lmi.equalities.len();
    let (f0, fi) = dense_blocks(lmi);
    let (v0, null) = if q == 0 {
        (DVector::zeros(p), DMatrix::identity(p, p))
    } else {
        let rows = q.max(p);
        let mut e = DMatrix::zeros(rows, p);
        let mut f = DVector::zeros(rows);
        for (k, eq) in lmi.equalities.iter().enumerate() {
            for &(i, c) in &eq.coeffs {
                e[(k, i)] += c;
            }
            f[k] = eq.rhs;
        }
        let svd = SVD::new(e.clone(), true, true);
        let smax: f64 = svd.singular_values.max();
        let tol = 1e-10 * smax.max(1.0);
        let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
        let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD failed".into()))?;
        let mut v0 = DVector::zeros(p);
        let mut kernel = Vec::new();
        for k in 0..p {
            let s = svd.singular_values[k];
            let vk = vt.row(k).transpose();
            if s > tol {
                v0 += &vk * (u.column(k).dot(&f) / s);
            } else {
                kernel.push(vk);
            }
        }
        let resid = (&e * &v0 - &f).norm();
        if resid > 1e-9 * (1.0 + f.norm()) {
            return Err(Error::Infeasible(format!("inconsistent equality constraints (residual {resid:e})")));
        }
        let null = if kernel.is_empty() { DMatrix::zeros(p, 0) } else { DMatrix::from_columns(&kernel) };
        (v0, null)
    };
    let nb = lmi.blocks.len();
    let mut c = f0;
    for i in 0..p {
        if v0[i] != 0.0 {
            for b in 0..nb {
                c[b].axpy(v0[i], &fi[i][b]);
            }
        }
    }
    let r = null.ncols();
    let mut a: Vec<Vec<Sym>> = (0..r).map(|_| lmi.blocks.iter().map(Sym::zeros_like).collect()).collect();
    for j in 0..r {
        for i in 0..p {
            let nij = null[(i, j)];
            if nij != 0.0 {
                for b in 0..nb {
                    a[j][b].axpy(-nij, &fi[i][b]);
                }
            }
        }
    }
    let cvec = DVector::from_column_slice(&lmi.objective);
    let b = -(null.transpose() * cvec);
    Ok(Reduced { c, a, b, v0, null })
}

/// Solves `lmi` to the tolerances in `opts`.
pub fn solve(lmi: &Lmi, opts: &SdpOptions) -> Result<SdpSolution> {
    if lmi.objective.len() != lmi.num_vars {
        return Err(Error::Dimension { expected: lmi.num_vars, got: lmi.objective.len() });
    }
    for blk in &lmi.blocks {
        for e in &blk.entries {
            if e.col >= blk.size || e.var.is_some_and(|i| i >= lmi.num_vars) || (blk.diagonal && e.row != e.col) {
                return Err(Error::Validation("LMI entry out of range".into()));
            }
        }
    }
    let red = reduce(lmi)?;
    let finish = |w: &DVector<f64>, dual: f64, pinf: f64, dinf: f64, it: usize| {
        let v = &red.v0 + &red.null * w;
        let x: Vec<f64> = v.iter().copied().collect();
        let value = lmi.objective_value(&x);
        let dual_value = lmi.objective_constant + lmi.objective.iter().zip(red.v0.iter()).map(|(c, v)| c * v).sum::<f64>() + dual;
        SdpSolution {
            relative_gap: (value - dual_value).abs() / (1.0 + value.abs() + dual_value.abs()),
            x,
            value,
            dual_value,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            iterations: it,
        }
    };
    let m = red.b.len();
    if m == 0 {
        let w = DVector::zeros(0);
        let x: Vec<f64> = red.v0.iter().copied().collect();
        let viol = lmi.violation(&x);
        if viol > 1e-9 {
            return Err(Error::Infeasible(format!("unique equality solution violates the LMI by {viol:e}")));
        }
        return Ok(finish(&w, 0.0, 0.0, 0.0, 0));
    }
    ipm(&red, lmi, opts).map(|(w, dual, pinf, dinf, it)| finish(&w, dual, pinf, dinf, it))
}

type IpmOutput = (DVector<f64>, f64, f64, f64, usize);

/// Primal: `min <C,X>  s.t. <A_j,X> = b_j, X >= 0`. Dual: `max b^T w  s.t. C - sum w_j A_j = Z >= 0`.
/// Returns the dual iterate `w`, the primal objective (a bound for the LMI after sign change) and
/// the final residuals.
fn ipm(red: &Reduced, lmi: &Lmi, opts: &SdpOptions) -> Result<IpmOutput> {
    let blocks = &lmi.blocks;
    let nb = blocks.len();
    let m = red.b.len();
    let n_total: usize = blocks.iter().map(|b| b.size).sum();
    let a_of = |x: &[Sym]| -> DVector<f64> {
        DVector::from_fn(m, |j, _| (0..nb).map(|b| red.a[j][b].dot(&x[b])).sum())
    };
    let at_of = |w: &DVector<f64>| -> Vec<Sym> {
        let mut out: Vec<Sym> = blocks.iter().map(Sym::zeros_like).collect();
        for j in 0..m {
            if w[j] != 0.0 {
                for b in 0..nb {
                    out[b].axpy(w[j], &red.a[j][b]);
                }
            }
        }
        out
    };
    let norm_c = red.c.iter().map(Sym::norm_sq).sum::<f64>().sqrt();
    let norm_b = red.b.norm();
    let a_norms: Vec<f64> = (0..m).map(|j| red.a[j].iter().map(Sym::norm_sq).sum::<f64>().sqrt()).collect();
    let nsqrt = (n_total as f64).sqrt();
    let xi = (0..m)
        .map(|j| n_total as f64 * (1.0 + red.b[j].abs()) / (1.0 + a_norms[j]))
        .fold(10.0f64.max(nsqrt), f64::max);
    let eta = a_norms.iter().copied().fold(10.0f64.max(nsqrt).max(norm_c), f64::max);
    let mut x: Vec<Sym> = blocks.iter().map(|b| Sym::identity(b, xi)).collect();
    let mut z: Vec<Sym> = blocks.iter().map(|b| Sym::identity(b, eta)).collect();
    let mut w = DVector::zeros(m);
    // Without strict feasibility the residuals stall near the optimum; the best iterate is kept.
    let mut best: Option<(f64, IpmOutput)> = None;
    let mut since_best = 0;
    for it in 0..opts.max_iter {
        let ax = a_of(&x);
        let rp = &red.b - &ax;
        let atw = at_of(&w);
        let mut rd: Vec<Sym> = red.c.clone();
        for b in 0..nb {
            rd[b].axpy(-1.0, &z[b]);
            rd[b].axpy(-1.0, &atw[b]);
        }
        let pobj: f64 = (0..nb).map(|b| red.c[b].dot(&x[b])).sum();
        let dobj = red.b.dot(&w);
        let xz: f64 = (0..nb).map(|b| x[b].dot(&z[b])).sum();
        let mu = xz / n_total as f64;
        let pinf = rp.norm() / (1.0 + norm_b);
        let dinf = rd.iter().map(Sym::norm_sq).sum::<f64>().sqrt() / (1.0 + norm_c);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            return Ok((w, -pobj, pinf, dinf, it));
        }
        let merit = (gap / opts.gap_tol).max(pinf / opts.feas_tol).max(dinf / opts.feas_tol);
        if best.as_ref().map_or(true, |(m, _)| merit < *m) {
            best = Some((merit, (w.clone(), -pobj, pinf, dinf, it)));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STALL_ITERATIONS {
                break;
            }
        }
        // Farkas rays: a primal ray certifies an infeasible LMI, a dual ray an unbounded one.
        if pobj < 0.0 && ax.norm() / -pobj < opts.feas_tol * 1e-2 && xz.is_finite() {
            return Err(Error::Infeasible("the semidefinite constraints admit no feasible point".into()));
        }
        if dobj > 0.0 {
            let ray: f64 = (0..nb)
                .map(|b| {
                    let mut s = z[b].clone();
                    s.axpy(1.0, &atw[b]);
                    s.norm_sq()
                })
                .sum::<f64>()
                .sqrt();
            if ray / dobj < opts.feas_tol * 1e-2 && dobj > 1e8 * (1.0 + norm_c) {
                return Err(Error::Infeasible("the objective is unbounded below".into()));
            }
        }
        let scal: Vec<Scaling> = match (0..nb).map(|b| Scaling::new(&x[b], &z[b])).collect::<Option<Vec<_>>>() {
            Some(s) => s,
            None => break,
        };
        let at: Vec<Vec<Sym>> = (0..m).map(|j| (0..nb).map(|b| scal[b].congruence(&red.a[j][b])).collect()).collect();
        let rdt: Vec<Sym> = (0..nb).map(|b| scal[b].congruence(&rd[b])).collect();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v: f64 = (0..nb).map(|b| at[i][b].dot(&at[j][b])).sum();
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let diag_max = schur.diagonal().iter().copied().fold(0.0, f64::max);
        let chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let mut s = schur;
                for i in 0..m {
                    s[(i, i)] += 1e-14 * diag_max.max(1.0);
                }
                match Cholesky::new(s) {
                    Some(c) => c,
                    None => break,
                }
            }
        };
        let direction = |rs: &[Sym]| -> (DVector<f64>, Vec<Sym>, Vec<Sym>) {
            let rhs = DVector::from_fn(m, |j, _| {
                rp[j] + (0..nb).map(|b| {
                    let mut t = rdt[b].clone();
                    t.axpy(-1.0, &rs[b]);
                    at[j][b].dot(&t)
                }).sum::<f64>()
            });
            let dw = chol.solve(&rhs);
            let mut dzt = rdt.clone();
            for j in 0..m {
                for b in 0..nb {
                    dzt[b].axpy(-dw[j], &at[j][b]);
                }
            }
            let dxt: Vec<Sym> = (0..nb)
                .map(|b| {
                    let mut t = rs[b].clone();
                    t.axpy(-1.0, &dzt[b]);
                    t
                })
                .collect();
            (dw, dxt, dzt)
        };
        let steps = |dxt: &[Sym], dzt: &[Sym]| -> (f64, f64) {
            let ap = (0..nb).map(|b| max_step(scal[b].d(), &dxt[b])).fold(1.0, f64::min);
            let ad = (0..nb).map(|b| max_step(scal[b].d(), &dzt[b])).fold(1.0, f64::min);
            (ap, ad)
        };
        let pred_rs: Vec<Sym> = (0..nb).map(|b| as_kind(&blocks[b], complementarity_rhs(scal[b].d(), 0.0, None))).collect();
        let (_, dxa, dza) = direction(&pred_rs);
        let (ap, ad) = steps(&dxa, &dza);
        let mut mu_aff = 0.0;
        for b in 0..nb {
            let d = scal[b].d();
            let mut xs = diag_sym(&blocks[b], d);
            xs.axpy(ap, &dxa[b]);
            let mut zs = diag_sym(&blocks[b], d);
            zs.axpy(ad, &dza[b]);
            mu_aff += xs.dot(&zs);
        }
        mu_aff /= n_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr_rs: Vec<Sym> = (0..nb)
            .map(|b| as_kind(&blocks[b], complementarity_rhs(scal[b].d(), sigma * mu, Some((&dxa[b], &dza[b])))))
            .collect();
        let (dw, dxt, dzt) = direction(&corr_rs);
        let (ap, ad) = steps(&dxt, &dzt);
        let gamma = 0.9 + 0.09 * ap.min(ad);
        let (ap, ad) = ((gamma * ap).min(1.0), (gamma * ad).min(1.0));
        for b in 0..nb {
            let (dx, dz) = scal[b].unscale(&dxt[b], &dzt[b]);
            x[b].axpy(ap, &dx);
            z[b].axpy(ad, &dz);
            symmetrize(&mut x[b]);
            symmetrize(&mut z[b]);
        }
        w += dw * ad;
    }
    match best {
        Some((merit, out)) if merit <= STALL_ACCEPT => Ok(out),
        Some((merit, out)) => Err(Error::NonConvergence {
            iterations: out.4,
            residual: merit * opts.gap_tol.max(opts.feas_tol),
        }),
        None => Err(Error::NonConvergence { iterations: 0, residual: f64::INFINITY }),
    }
}

/// Iterations without a better iterate before the method gives up.
const STALL_ITERATIONS: usize = 8;
/// A stalled run is accepted when its residuals are within this factor of the tolerances.
const STALL_ACCEPT: f64 = 100.0;

fn diag_sym(blk: &LmiBlock, d: &DVector<f64>) -> Sym {
    if blk.diagonal {
        Sym::Diag(d.clone())
    } else {
        Sym::Dense(DMatrix::from_diagonal(d))
    }
}

/// The predictor right-hand side is built as a vector; dense blocks need it as a matrix.
fn as_kind(blk: &LmiBlock, s: Sym) -> Sym {
    match (blk.diagonal, s) {
        (false, Sym::Diag(d)) => Sym::Dense(DMatrix::from_diagonal(&d)),
        (_, s) => s,
    }
}

fn symmetrize(s: &mut Sym) {
    if let Sym::Dense(m) = s {
        let t = m.transpose();
        *m += t;
        *m *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min x0 + x1 s.t. [[x0, 1], [1, x1]] >= 0: optimum 2 at (1, 1).
    fn two_by_two() -> Lmi {
        let mut lmi = Lmi::new(2);
        lmi.objective = vec![1.0, 1.0];
        let mut b = LmiBlock::new(2, false);
        b.push(Some(0), 0, 0, 1.0);
        b.push(Some(1), 1, 1, 1.0);
        b.push(None, 0, 1, 1.0);
        lmi.blocks.push(b);
        lmi
    }

    #[test]
    fn solves_small_lmi() {
        let s = solve(&two_by_two(), &SdpOptions::default()).unwrap();
        assert!((s.value - 2.0).abs() < 1e-7, "{s:?}");
        assert!((s.x[0] - 1.0).abs() < 1e-5 && (s.x[1] - 1.0).abs() < 1e-5);
        assert!(s.relative_gap <= 1e-8);
    }

    #[test]
    fn equality_and_linear_block() {
        // min -x0 - 2 x1 s.t. x0 + x1 = 1, x >= 0, [[1, x0], [x0, 1]] >= 0 -> x1 = 1.
        let mut lmi = two_by_two();
        lmi.objective = vec![-1.0, -2.0];
        lmi.blocks.clear();
        let mut lp = LmiBlock::new(2, true);
        lp.push(Some(0), 0, 0, 1.0);
        lp.push(Some(1), 1, 1, 1.0);
        lmi.blocks.push(lp);
        let mut b = LmiBlock::new(2, false);
        b.push(None, 0, 0, 1.0);
        b.push(None, 1, 1, 1.0);
        b.push(Some(0), 0, 1, 1.0);
        lmi.blocks.push(b);
        lmi.equalities.push(Equality { coeffs: vec![(0, 1.0), (1, 1.0)], rhs: 1.0 });
        let s = solve(&lmi, &SdpOptions::default()).unwrap();
        assert!((s.value + 2.0).abs() < 1e-7, "{s:?}");
        assert!(lmi.violation(&s.x) < 1e-7);
    }

    #[test]
    fn detects_infeasible_lmi() {
        // x >= 1 and -x >= 0.
        let mut lmi = Lmi::new(1);
        lmi.objective = vec![1.0];
        let mut lp = LmiBlock::new(2, true);
        lp.push(Some(0), 0, 0, 1.0);
        lp.push(None, 0, 0, -1.0);
        lp.push(Some(0), 1, 1, -1.0);
        lmi.blocks.push(lp);
        assert!(matches!(solve(&lmi, &SdpOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn detects_inconsistent_equalities() {
        let mut lmi = two_by_two();
        lmi.equalities.push(Equality { coeffs: vec![(0, 1.0)], rhs: 1.0 });
        lmi.equalities.push(Equality { coeffs: vec![(0, 2.0)], rhs: 1.0 });
        assert!(matches!(solve(&lmi, &SdpOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn eigenvalue_minimization() {
        // max t s.t. A - t I >= 0 gives lambda_min(A).
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let mut lmi = Lmi::new(1);
        lmi.objective = vec![-1.0];
        let mut b = LmiBlock::new(3, false);
        for i in 0..3 {
            for j in i..3 {
                b.push(None, i, j, a[i][j]);
            }
            b.push(Some(0), i, i, -1.0);
        }
        lmi.blocks.push(b);
        let s = solve(&lmi, &SdpOptions::default()).unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| a[i][j]);
        let lmin = SymmetricEigen::new(m).eigenvalues.min();
        assert!((s.x[0] - lmin).abs() < 1e-6, "{} vs {lmin}", s.x[0]);
    }
}

//! Sparse multivariate polynomials with real coefficients.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

/// Exponent vector, one entry per variable.
pub type Exponent = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    /// `sum_i coeffs[i] x_i + constant`.
    pub fn affine(constant: f64, coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let mut p = Self::constant(n, constant);
        for (i, &c) in coeffs.iter().enumerate() {
            p.add_assign(&Self::var(n, i).scaled(c));
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exponent: Exponent, c: f64) {
        debug_assert_eq!(exponent.len(), self.nvars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(exponent) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn coefficient(&self, exponent: &[u32]) -> f64 {
        self.terms.get(exponent).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.nvars, other.nvars);
        for (e, &c) in &other.terms {
            self.add_term(e.clone(), c);
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut p = self.clone();
        p.add_assign(&other.scaled(-1.0));
        p
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        let mut p = Self::zero(self.nvars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let e = a.iter().zip(b).map(|(x, y)| x + y).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut p = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            p = p.mul(self);
        }
        p
    }

    /// Composition `p(q_1, ..., q_n)` with every `q_i` over a common variable set.
    pub fn substitute(&self, images: &[Polynomial]) -> Self {
        assert_eq!(images.len(), self.nvars);
        let target = images.first().map_or(0, |q| q.nvars);
        let mut out = Self::zero(target);
        let mut powers: Vec<Vec<Polynomial>> = images.iter().map(|q| vec![Self::constant(target, 1.0), q.clone()]).collect();
        for (e, &c) in &self.terms {
            let mut term = Self::constant(target, c);
            for (i, &k) in e.iter().enumerate() {
                while powers[i].len() <= k as usize {
                    let next = powers[i].last().unwrap().mul(&images[i]);
                    powers[i].push(next);
                }
                if k > 0 {
                    term = term.mul(&powers[i][k as usize]);
                }
            }
            out.add_assign(&term);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, &c)| c * monomial_value(e, x)).sum()
    }

    /// Drops coefficients below `tol` in absolute value.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if c.abs() > tol {
                p.add_term(e.clone(), c);
            }
        }
        p
    }
}

pub fn monomial_value(e: &[u32], x: &[f64]) -> f64 {
    e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product()
}

/// All monomials of degree at most `max_degree`, by degree and then lexicographically with the
/// first variable leading: `1, x_1, ..., x_n, x_1^2, x_1 x_2, ..., x_n^2, ...`.
pub fn monomials(nvars: usize, max_degree: u32) -> Vec<Exponent> {
    let mut out = vec![vec![0; nvars]];
    for d in 1..=max_degree {
        let mut layer = Vec::new();
        of_degree(nvars, d, 0, &mut vec![0; nvars], &mut layer);
        out.extend(layer);
    }
    out
}

fn of_degree(nvars: usize, remaining: u32, from: usize, cur: &mut Exponent, out: &mut Vec<Exponent>) {
    if remaining == 0 {
        out.push(cur.clone());
        return;
    }
    for i in from..nvars {
        cur[i] += 1;
        of_degree(nvars, remaining - 1, i, cur, out);
        cur[i] -= 1;
    }
}

/// Ordered products of variables up to `max_degree` factors, listing `x_1 x_2` and `x_2 x_1`
/// separately: `1 + n + n^2 + ...` entries.
pub fn ordered_products(nvars: usize, max_degree: u32) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_degree {
        layer = layer
            .iter()
            .flat_map(|w| (0..nvars).map(move |i| {
                let mut v = w.clone();
                v.push(i);
                v
            }))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Half the degree of the moment basis for latencies of degree `d`: `(d + 1) / 2` for odd `d`
/// and `d / 2 + 1` for even `d`.
pub fn basis_degree(latency_degree: usize) -> u32 {
    if latency_degree % 2 == 1 {
        (latency_degree as u32 + 1) / 2
    } else {
        latency_degree as u32 / 2 + 1
    }
}

//! Rank-one test for the diagonal moment matrix.

use nalgebra::{DMatrix, SymmetricEigen};

/// Block structure of `z = (x^{w_1}, ..., x^{w_s}, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalLayout {
    pub states: usize,
    pub routes: usize,
    pub participant_mass: f64,
    pub nonparticipant_mass: f64,
}

impl DiagonalLayout {
    pub fn new(states: usize, routes: usize, participant_mass: f64, nonparticipant_mass: f64) -> Self {
        Self { states, routes, participant_mass, nonparticipant_mass }
    }

    pub fn dimension(&self) -> usize {
        (self.states + 1) * self.routes + 1
    }

    fn blocks(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..=self.states).map(move |k| {
            let mass = if k < self.states { self.participant_mass } else { self.nonparticipant_mass };
            (1 + k * self.routes, mass)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmsVerdict {
    /// Rank one and the extracted point satisfies the support constraints.
    Rank1Admissible,
    NotRank1,
    /// Rank one but the point violates a support constraint.
    ConstraintViolated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmsCheck {
    pub moment_matrix: DMatrix<f64>,
    pub mass_tolerance: f64,
    /// Largest admissible ratio `lambda_2 / lambda_1`.
    pub eigen_ratio_threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub verdict: TmsVerdict,
    pub reason: String,
    /// First moments when admissible.
    pub extracted_point: Option<Vec<f64>>,
}

/// Decides whether `m` is the moment matrix of a single admissible point.
pub fn check_rank1(m: &DMatrix<f64>, layout: &DiagonalLayout) -> TmsCheck {
    let mass_tolerance = 1e-6;
    let eigen_ratio_threshold = 1e-6;
    let mut eig: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let result = |verdict, reason: String, point| TmsCheck {
        moment_matrix: m.clone(),
        mass_tolerance,
        eigen_ratio_threshold,
        eigenvalues: eig.clone(),
        verdict,
        reason,
        extracted_point: point,
    };
    if m.nrows() != layout.dimension() || m.ncols() != m.nrows() {
        return result(
            TmsVerdict::ConstraintViolated,
            format!("matrix is {}x{}, layout needs {}", m.nrows(), m.ncols(), layout.dimension()),
            None,
        );
    }
    let top = eig.first().copied().unwrap_or(0.0);
    let scale = top.max(1.0);
    if eig.last().is_some_and(|&l| l < -1e-8 * scale) {
        return result(TmsVerdict::NotRank1, format!("negative eigenvalue {:e}", eig[eig.len() - 1]), None);
    }
    let second = eig.get(1).copied().unwrap_or(0.0).max(0.0);
    if top <= 0.0 || second > eigen_ratio_threshold * top {
        return result(TmsVerdict::NotRank1, format!("eigenvalue ratio {:e}", second / top.max(f64::MIN_POSITIVE)), None);
    }
    if (m[(0, 0)] - 1.0).abs() > mass_tolerance {
        return result(TmsVerdict::ConstraintViolated, format!("total mass {}", m[(0, 0)]), None);
    }
    let point: Vec<f64> = (1..m.ncols()).map(|j| m[(0, j)]).collect();
    let entry_floor = -1e-8 * m.amax().max(1.0);
    if let Some((k, v)) = point.iter().enumerate().find(|(_, &v)| v < entry_floor) {
        return result(TmsVerdict::ConstraintViolated, format!("negative flow {v:e} at coordinate {k}"), None);
    }
    let n = layout.routes;
    for (off, mass) in layout.blocks() {
        let tol = mass_tolerance * (1.0 + mass.abs());
        let sum: f64 = (off..off + n).map(|j| m[(0, j)]).sum();
        if (sum - mass).abs() > tol {
            return result(TmsVerdict::ConstraintViolated, format!("block at {off} carries {sum}, expected {mass}"), None);
        }
        for i in off..off + n {
            let second: f64 = (off..off + n).map(|j| m[(i, j)]).sum();
            if (second - mass * m[(0, i)]).abs() > tol * (1.0 + mass.abs()) {
                return result(TmsVerdict::ConstraintViolated, format!("second-moment row {i} off by {:e}", second - mass * m[(0, i)]), None);
            }
        }
    }
    result(TmsVerdict::Rank1Admissible, "rank one with admissible support".into(), Some(point))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outer(v: &[f64]) -> DMatrix<f64> {
        let mut z = vec![1.0];
        z.extend_from_slice(v);
        DMatrix::from_fn(z.len(), z.len(), |a, b| z[a] * z[b])
    }

    #[test]
    fn accepts_a_dirac_point() {
        let layout = DiagonalLayout::new(1, 2, 0.5, 0.5);
        let c = check_rank1(&outer(&[0.2, 0.3, 0.5, 0.0]), &layout);
        assert_eq!(c.verdict, TmsVerdict::Rank1Admissible, "{}", c.reason);
        assert_eq!(c.extracted_point.unwrap(), vec![0.2, 0.3, 0.5, 0.0]);
    }

    #[test]
    fn rejects_mixtures_and_infeasible_points() {
        let layout = DiagonalLayout::new(1, 2, 0.5, 0.5);
        let mix = (outer(&[0.5, 0.0, 0.5, 0.0]) + outer(&[0.0, 0.5, 0.0, 0.5])) * 0.5;
        assert_eq!(check_rank1(&mix, &layout).verdict, TmsVerdict::NotRank1);
        let off_mass = check_rank1(&outer(&[0.2, 0.2, 0.5, 0.0]), &layout);
        assert_eq!(off_mass.verdict, TmsVerdict::ConstraintViolated);
        let negative = check_rank1(&outer(&[0.7, -0.2, 0.5, 0.0]), &layout);
        assert_eq!(negative.verdict, TmsVerdict::ConstraintViolated);
        let wrong = check_rank1(&outer(&[0.5, 0.0]), &layout);
        assert_eq!(wrong.verdict, TmsVerdict::ConstraintViolated);
    }
}

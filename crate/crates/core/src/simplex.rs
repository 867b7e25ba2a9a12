//! Scaled simplices `P_n(mass)`, their products, projection and sampling.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Euclidean projection of `v` onto `{x >= 0, sum x = mass}` (sort-based).
pub fn project_simplex(v: &mut [f64], mass: f64) {
    if v.is_empty() {
        return;
    }
    if mass <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let t = (cumsum - mass) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    // Restore the exact mass lost to rounding on the largest entry.
    let total: f64 = v.iter().sum();
    let (imax, _) = v.iter().enumerate().fold((0, f64::MIN), |acc, (i, &x)| {
        if x > acc.1 {
            (i, x)
        } else {
            acc
        }
    });
    v[imax] = (v[imax] + mass - total).max(0.0);
}

/// Flat Dirichlet sample scaled to `mass`.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize, mass: f64) -> Vec<f64> {
    let gamma = Gamma::new(1.0, 1.0).expect("valid gamma");
    let mut v: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x *= mass / total);
    } else {
        v.iter_mut().for_each(|x| *x = mass / n as f64);
    }
    v
}

/// One simplex factor inside a flat variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexBlock {
    pub offset: usize,
    pub len: usize,
    pub mass: f64,
}

/// Product of simplices laid out contiguously in one vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProductSimplex {
    blocks: Vec<SimplexBlock>,
    dim: usize,
}

impl ProductSimplex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a factor and returns its offset.
    pub fn push(&mut self, len: usize, mass: f64) -> usize {
        let offset = self.dim;
        self.blocks.push(SimplexBlock { offset, len, mass });
        self.dim += len;
        offset
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[SimplexBlock] {
        &self.blocks
    }

    pub fn project(&self, v: &mut [f64]) {
        for b in &self.blocks {
            project_simplex(&mut v[b.offset..b.offset + b.len], b.mass);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for b in &self.blocks {
            v[b.offset..b.offset + b.len].copy_from_slice(&sample_simplex(rng, b.len, b.mass));
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn projection_examples() {
        let mut v = vec![0.5, 0.5];
        project_simplex(&mut v, 1.0);
        assert_eq!(v, vec![0.5, 0.5]);
        let mut v = vec![3.0, -1.0];
        project_simplex(&mut v, 2.0);
        assert_eq!(v, vec![2.0, 0.0]);
        let mut v = vec![1.0, 1.0, 1.0];
        project_simplex(&mut v, 0.0);
        assert_eq!(v, vec![0.0; 3]);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-10.0f64..10.0, 1..8), mass in 0.0f64..10.0) {
            let mut p = v.clone();
            project_simplex(&mut p, mass);
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - mass).abs() < 1e-12 * (1.0 + mass));
        }

        #[test]
        fn projection_is_nearest(v in prop::collection::vec(-5.0f64..5.0, 2..6), seed in 0u64..1000) {
            let mut p = v.clone();
            project_simplex(&mut p, 1.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let q = sample_simplex(&mut rng, v.len(), 1.0);
            let d = |a: &[f64]| a.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
            prop_assert!(d(&p) <= d(&q) + 1e-12);
        }

        #[test]
        fn samples_on_simplex(seed in 0u64..1000, n in 1usize..6, mass in 0.1f64..5.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = sample_simplex(&mut rng, n, mass);
            prop_assert!(v.iter().all(|&x| x >= 0.0));
            prop_assert!((v.iter().sum::<f64>() - mass).abs() < 1e-12 * (1.0 + mass));
        }
    }
}

//! Spectral projected gradient on a product of simplices.

use crate::simplex::ProductSimplex;

#[derive(Debug, Clone)]
pub struct SpgOptions {
    pub max_iter: usize,
    /// Stop when `|P(x - g) - x|_inf` falls below this.
    pub tol: f64,
    /// Non-monotone memory; 1 gives a monotone line search.
    pub memory: usize,
    pub step_min: f64,
    pub step_max: f64,
}

impl Default for SpgOptions {
    fn default() -> Self {
        Self { max_iter: 200_000, tol: 1e-9, memory: 1, step_min: 1e-12, step_max: 1e12 }
    }
}

#[derive(Debug, Clone)]
pub struct SpgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
    pub converged: bool,
}

fn pg_norm(domain: &ProductSimplex, x: &[f64], g: &[f64], buf: &mut [f64]) -> f64 {
    for i in 0..x.len() {
        buf[i] = x[i] - g[i];
    }
    domain.project(buf);
    buf.iter().zip(x).map(|(p, v)| (p - v).abs()).fold(0.0, f64::max)
}

/// `g . d` for feasible directions `d`, whose block sums vanish. Centering each block of `g`
/// first removes the cancellation between large, nearly equal route costs.
fn slope(domain: &ProductSimplex, g: &[f64], d: &[f64]) -> f64 {
    let mut total = 0.0;
    for b in domain.blocks() {
        let r = b.offset..b.offset + b.len;
        let mean = g[r.clone()].iter().sum::<f64>() / b.len as f64;
        total += g[r.clone()].iter().zip(&d[r]).map(|(a, v)| (a - mean) * v).sum::<f64>();
    }
    total
}

/// Minimizes `f` over `domain` from `x0`. `f(x, grad)` returns the value and fills `grad`.
pub fn minimize<F>(mut f: F, x0: &[f64], domain: &ProductSimplex, opts: &SpgOptions) -> SpgResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    domain.project(&mut x);
    let mut g = vec![0.0; dim];
    let mut fx = f(&x, &mut g);
    let mut buf = vec![0.0; dim];
    let mut pg = pg_norm(domain, &x, &g, &mut buf);
    let mut history = vec![fx];
    let mut step = if pg > 0.0 { (1.0 / pg).clamp(opts.step_min, opts.step_max) } else { 1.0 };
    let mut xn = vec![0.0; dim];
    let mut gn = vec![0.0; dim];
    let mut d = vec![0.0; dim];
    let mut it = 0;
    while it < opts.max_iter && pg > opts.tol && dim > 0 {
        it += 1;
        for i in 0..dim {
            d[i] = x[i] - step * g[i];
        }
        domain.project(&mut d);
        for i in 0..dim {
            d[i] -= x[i];
        }
        let gtd = slope(domain, &g, &d);
        if gtd >= 0.0 {
            break;
        }
        let fmax = history.iter().copied().fold(f64::MIN, f64::max);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..dim {
                xn[i] = x[i] + lambda * d[i];
            }
            let fnew = f(&xn, &mut gn);
            let armijo = fnew <= fmax + 1e-4 * lambda * gtd;
            // Near the optimum value differences drown in rounding; a non-positive slope at the
            // trial point still certifies descent for convex objectives.
            let flat = fnew <= fmax + 1e-13 * (1.0 + fmax.abs())
                && slope(domain, &gn, &d) <= 0.0;
            if fnew.is_finite() && (armijo || flat) {
                let mut sy = 0.0;
                let mut ss = 0.0;
                for i in 0..dim {
                    let si = xn[i] - x[i];
                    sy += si * (gn[i] - g[i]);
                    ss += si * si;
                }
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut g, &mut gn);
                fx = fnew;
                step = if sy > 0.0 { (ss / sy).clamp(opts.step_min, opts.step_max) } else { opts.step_max };
                accepted = true;
                break;
            }
            // Safeguarded quadratic interpolation.
            let denom = 2.0 * (fnew - fx - lambda * gtd);
            let trial = if fnew.is_finite() && denom > 0.0 { -gtd * lambda * lambda / denom } else { 0.5 * lambda };
            lambda = trial.clamp(0.1 * lambda, 0.5 * lambda);
        }
        if !accepted {
            break;
        }
        history.push(fx);
        if history.len() > opts.memory.max(1) {
            history.remove(0);
        }
        pg = pg_norm(domain, &x, &g, &mut buf);
    }
    SpgResult { x, value: fx, iterations: it, pg_norm: pg, converged: pg <= opts.tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_on_simplex() {
        let mut dom = ProductSimplex::new();
        dom.push(3, 1.0);
        let target = [0.8, 0.5, -0.3];
        let r = minimize(
            |x, g| {
                let mut v = 0.0;
                for i in 0..3 {
                    g[i] = x[i] - target[i];
                    v += 0.5 * g[i] * g[i];
                }
                v
            },
            &[1.0 / 3.0; 3],
            &dom,
            &SpgOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 0.65).abs() < 1e-9);
        assert!((r.x[1] - 0.35).abs() < 1e-9);
        assert!(r.x[2].abs() < 1e-12);
    }
}

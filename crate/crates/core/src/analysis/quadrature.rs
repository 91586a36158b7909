//! Expectations of functions of a standard normal variate.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Gauss-Hermite rule normalized for the standard normal density:
/// `E[h(Z)] ~ sum_i w_i h(z_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch: the nodes are eigenvalues of the Jacobi matrix of the
    /// Hermite recurrence and the weights come from the first eigenvector rows.
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "a quadrature rule needs at least one node");
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eigen = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = eigen
            .eigenvalues
            .iter()
            .zip(eigen.eigenvectors.row(0).iter())
            .map(|(&x, &v)| (std::f64::consts::SQRT_2 * x, v * v))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrize to remove eigen-solver noise
        let len = pairs.len();
        for i in 0..len / 2 {
            let j = len - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if len % 2 == 1 {
            pairs[len / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expectation<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * h(z))
            .sum()
    }
}

/// Node counts tried by [`doubling_expectation`].
pub const DOUBLING_LEVELS: [usize; 5] = [16, 32, 64, 128, 256];

fn cached_rule(level: usize) -> &'static GaussHermite {
    static RULES: [OnceLock<GaussHermite>; DOUBLING_LEVELS.len()] =
        [const { OnceLock::new() }; DOUBLING_LEVELS.len()];
    RULES[level].get_or_init(|| GaussHermite::new(DOUBLING_LEVELS[level]))
}

/// `E[h(Z)]` by Gauss-Hermite rules of 16, 32, ... nodes, stopping when two
/// successive rules agree within `rel_tol`. `None` if they never do.
pub fn doubling_expectation<F: Fn(f64) -> f64>(h: F, rel_tol: f64) -> Option<f64> {
    let mut prev = cached_rule(0).expectation(&h);
    for level in 1..DOUBLING_LEVELS.len() {
        let cur = cached_rule(level).expectation(&h);
        if (cur - prev).abs() <= rel_tol * cur.abs() {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

const TANH_SINH_T_MAX: f64 = 4.0;
const TANH_SINH_MAX_LEVEL: u32 = 12;

/// Tanh-sinh (double exponential) quadrature of `f` over `[a, b]`.
///
/// Tolerates algebraic endpoint behaviour such as `|z - a|^p`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Option<f64> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cu * cu);
        if !(w > 0.0) {
            return 0.0;
        }
        let x = (center + half * u.tanh()).clamp(a, b);
        w * f(x)
    };

    let mut step = 1.0;
    let n0 = (TANH_SINH_T_MAX / step) as i64;
    let mut sum = term(0.0);
    for k in 1..=n0 {
        let t = k as f64 * step;
        sum += term(t) + term(-t);
    }
    let mut prev = sum * step * half;
    for _ in 1..=TANH_SINH_MAX_LEVEL {
        step *= 0.5;
        let n = (TANH_SINH_T_MAX / step) as i64;
        let mut k = 1;
        while k <= n {
            let t = k as f64 * step;
            sum += term(t) + term(-t);
            k += 2;
        }
        let cur = sum * step * half;
        if (cur - prev).abs() <= rel_tol * cur.abs() {
            return Some(cur);
        }
        prev = cur;
    }
    None
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

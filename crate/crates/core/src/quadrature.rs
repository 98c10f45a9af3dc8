//! Gauss–Legendre rules and adaptive bisection on top of them.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on Pₙ from the Chebyshev guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
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

    /// ∫ₐᵇ f.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// Adaptive bisection: an interval is accepted once the rule on it agrees
    /// with the sum over its two halves to `rel_tol` relative (or an absolute
    /// floor scaled from the running magnitude).
    pub fn integrate_adaptive(&self, a: f64, b: f64, rel_tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let whole = self.integrate(a, b, &mut f);
        self.refine(a, b, whole, rel_tol, whole.abs(), 0, &mut f)
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(&self, a: f64, b: f64, whole: f64, rel_tol: f64, scale: f64, depth: u32, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.integrate(a, mid, &mut *f);
        let right = self.integrate(mid, b, &mut *f);
        let split = left + right;
        let tol = rel_tol * split.abs().max(scale * 1e-3);
        if depth >= 40 || (split - whole).abs() <= tol {
            return split;
        }
        self.refine(a, mid, left, rel_tol, scale, depth + 1, f)
            + self.refine(mid, b, right, rel_tol, scale, depth + 1, f)
    }
}

/// Pₙ(x) and P'ₙ(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

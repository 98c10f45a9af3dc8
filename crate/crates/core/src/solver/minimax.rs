use alloc::vec;
use alloc::vec::Vec;

use super::descent::{dot, max_abs, normalize_in_place, normalized, precondition, sufficient};
use super::{EigenPair, SolverConfig, STALL_PATIENCE};
use crate::energy::{residual_norm, Problem};
use crate::{Error, Result};

/// Angles sampled on [0, π) before the golden-section refinement.
pub const THETA_SAMPLES: usize = 64;

const GOLDEN_TOL: f64 = 1e-9;

struct Level {
    value: f64,
    theta: f64,
    z: Vec<f64>,
}

fn circle_point(u1: &[f64], w: &[f64], theta: f64) -> Vec<f64> {
    let (s, c) = libm::sincos(theta);
    u1.iter().zip(w).map(|(a, b)| c * a + s * b).collect()
}

fn quotient(prob: &Problem, z: &[f64]) -> f64 {
    let parts = prob.evaluate(z, None);
    if parts.weight > 0.0 {
        parts.numerator() / parts.weight
    } else {
        f64::INFINITY
    }
}

/// max over θ of R(cos θ u₁ + sin θ w). R is even, so [0, π) covers the circle.
fn level(prob: &Problem, u1: &[f64], w: &[f64]) -> Level {
    let dt = core::f64::consts::PI / THETA_SAMPLES as f64;
    let mut best = Level { value: f64::NEG_INFINITY, theta: 0.0, z: Vec::new() };
    for k in 0..THETA_SAMPLES {
        let theta = k as f64 * dt;
        let z = circle_point(u1, w, theta);
        let r = quotient(prob, &z);
        if r > best.value {
            best = Level { value: r, theta, z };
        }
    }
    let inv = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut a, mut b) = (best.theta - dt, best.theta + dt);
    let mut x1 = b - inv * (b - a);
    let mut x2 = a + inv * (b - a);
    let mut f1 = quotient(prob, &circle_point(u1, w, x1));
    let mut f2 = quotient(prob, &circle_point(u1, w, x2));
    while b - a > GOLDEN_TOL {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv * (b - a);
            f1 = quotient(prob, &circle_point(u1, w, x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv * (b - a);
            f2 = quotient(prob, &circle_point(u1, w, x2));
        }
    }
    let (theta, value) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if value > best.value {
        best = Level { value, theta, z: circle_point(u1, w, theta) };
    }
    best
}

/// Removes the g-weighted component along `u1` and rescales to unit weight.
fn orthonormalize(prob: &Problem, u1: &[f64], w: &mut [f64]) -> bool {
    let g = prob.weight();
    let num: f64 = (0..w.len()).map(|i| g[i] * u1[i] * w[i]).sum();
    let den: f64 = (0..w.len()).map(|i| g[i] * u1[i] * u1[i]).sum();
    if den > 0.0 {
        let c = num / den;
        w.iter_mut().zip(u1).for_each(|(v, a)| *v -= c * a);
    }
    normalize_in_place(prob, w)
}

struct Point {
    w: Vec<f64>,
    level: Level,
    /// Normalized z, its eigen-residual and ∂F/∂w.
    z: Vec<f64>,
    lambda: f64,
    residual: f64,
    /// ∇N − λ∇D at the normalized z.
    raw: Vec<f64>,
    /// ∂F/∂w = factor · raw.
    factor: f64,
    grad: Vec<f64>,
}

fn point(prob: &Problem, u1: &[f64], w: Vec<f64>) -> Option<Point> {
    let level = level(prob, u1, &w);
    let mut z = level.z.clone();
    let raw = super::descent::weight_term(prob, &z);
    if !normalize_in_place(prob, &mut z) {
        return None;
    }
    let scale = libm::pow(raw, -1.0 / prob.p());
    let n = z.len();
    let mut gn = vec![0.0; n];
    let mut gd = vec![0.0; n];
    let parts = prob.evaluate(&z, Some((&mut gn, &mut gd)));
    let lambda = parts.numerator() / parts.weight;
    let residual = residual_norm(&gn, &gd, lambda);
    let factor = libm::sin(level.theta) * scale;
    let raw: Vec<f64> = gn.iter().zip(&gd).map(|(a, b)| a - lambda * b).collect();
    let grad = raw.iter().map(|r| factor * r).collect();
    Some(Point { w, level, z, lambda, residual, raw, factor, grad })
}

fn changes_sign(z: &[f64]) -> bool {
    let floor = 1e-12 * max_abs(z);
    z.iter().any(|&v| v > floor) && z.iter().any(|&v| v < -floor)
}

/// Preconditioned descent of F(w) = max_θ R(cos θ u₁ + sin θ w) from one
/// start, with the numerator Hessian taken at the maximizing z.
fn descend_level(prob: &Problem, u1: &[f64], start: Vec<f64>, cfg: &SolverConfig) -> Option<(Point, Vec<f64>, usize, bool)> {
    let mut w = start;
    if !orthonormalize(prob, u1, &mut w) {
        return None;
    }
    let mut cur = point(prob, u1, w)?;
    let mut trace = vec![cur.level.value];
    let mut converged = cur.residual <= cfg.tol_residual;
    let step = cfg.step0 * (prob.p() - 1.0);
    let mut iterations = 0;
    let mut stalled = 0;
    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let mut dir = precondition(prob, &cur.z, &cur.raw, None);
        let slope = dot(&cur.raw, &dir);
        dir.iter_mut().for_each(|d| *d /= cur.factor);
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = cur.w.iter().zip(&dir).map(|(v, d)| v - alpha * d).collect();
            if orthonormalize(prob, u1, &mut trial) {
                if let Some(next) = point(prob, u1, trial) {
                    if sufficient(cur.level.value, next.level.value, cfg.armijo * alpha * slope, &cur.grad, &next.grad) {
                        accepted = Some(next);
                        break;
                    }
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some(next) = accepted else { break };
        let decrease = (cur.level.value - next.level.value) / next.level.value.abs().max(f64::MIN_POSITIVE);
        stalled = if decrease < cfg.tol_quotient { stalled + 1 } else { 0 };
        cur = next;
        trace.push(cur.level.value);
        converged = cur.residual <= cfg.tol_residual;
        if stalled >= STALL_PATIENCE {
            break;
        }
    }
    Some((cur, trace, iterations, converged))
}

/// Upper estimate of the second eigenvalue as the smallest level
/// max_θ R(cos θ u₁ + sin θ w) reachable by descent in w.
///
/// Starts are u₁ modulated by a linear profile along each axis; the lowest
/// level wins. At a stationary point the maximizing combination z is an
/// eigenfunction, and `residual` is its eigen-residual. Fails when the first
/// pair is unconverged, when the level does not exceed λ₁, or when z keeps
/// one sign.
pub fn solve_second(prob: &Problem, first: &EigenPair, cfg: &SolverConfig) -> Result<EigenPair> {
    cfg.validate()?;
    if !first.converged {
        return Err(Error::PrincipalNotConverged);
    }
    let u1 = normalized(prob, &first.u)?;
    let grid = prob.grid();
    let mut best: Option<(Point, Vec<f64>, usize, bool)> = None;
    for axis in 0..grid.dim() {
        let start: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&u1)
            .map(|(x, a)| a * (grid.normalized(x)[axis] - 0.5))
            .collect();
        if let Some(run) = descend_level(prob, &u1, start, cfg) {
            if best.as_ref().is_none_or(|b| run.0.level.value < b.0.level.value) {
                best = Some(run);
            }
        }
    }
    let Some((pt, trace, iterations, converged)) = best else {
        return Err(Error::NoSecondLevel { lambda1: first.lambda, best: f64::NAN });
    };
    let margin = 1e-8 * first.lambda.abs().max(1.0);
    if !(pt.lambda > first.lambda + margin) || !changes_sign(&pt.z) {
        return Err(Error::NoSecondLevel { lambda1: first.lambda, best: pt.lambda });
    }
    let mut pair = EigenPair { lambda: pt.lambda, u: pt.z.into(), residual: pt.residual, iterations, converged, trace };
    pair.canonicalize();
    Ok(pair)
}

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{chol, EigenPair, SolverConfig, STALL_PATIENCE};
use crate::energy::{residual_norm, Problem};
use crate::mesh::Field;
use crate::{Error, Result};

/// State of one descent: a normalized iterate and its quotient gradient.
pub(super) struct Iterate {
    pub u: Vec<f64>,
    pub lambda: f64,
    /// ∇N − λ∇D at the normalized iterate (zero outside the mask).
    pub grad: Vec<f64>,
    pub residual: f64,
}

pub(super) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weight term ∫g|u|^p.
pub(super) fn weight_term(prob: &Problem, u: &[f64]) -> f64 {
    let pw = prob.power();
    let g = prob.weight();
    let s: f64 = (0..u.len()).map(|i| g[i] * pw.abs(u[i])).sum();
    s * prob.grid().cell_measure()
}

/// Normalizes `u` in place; `false` if it vanishes.
pub(super) fn normalize_in_place(prob: &Problem, u: &mut [f64]) -> bool {
    let w = weight_term(prob, u);
    if !(w > 0.0 && w.is_finite()) {
        return false;
    }
    let c = libm::pow(w, -1.0 / prob.p());
    u.iter_mut().for_each(|v| *v *= c);
    true
}

/// Evaluates quotient and projected gradient at an already normalized `u`.
pub(super) fn evaluate(prob: &Problem, u: Vec<f64>, mask: Option<&[bool]>, gn: &mut [f64], gd: &mut [f64]) -> Iterate {
    let parts = prob.evaluate(&u, Some((&mut *gn, &mut *gd)));
    let lambda = parts.numerator() / parts.weight;
    let mut grad: Vec<f64> = gn.iter().zip(gd.iter()).map(|(a, b)| a - lambda * b).collect();
    if let Some(mask) = mask {
        grad.iter_mut().zip(mask).filter(|(_, &m)| !m).for_each(|(g, _)| *g = 0.0);
    }
    let residual = residual_norm(&grad, &vec![0.0; grad.len()], lambda);
    Iterate { u, lambda, grad, residual }
}

/// Relative smoothing of the |t|^{p−2} factors in the preconditioner.
const HESSIAN_DELTA: f64 = 1e-8;

/// Direction P⁻¹ grad with P the smoothed numerator Hessian at `u`, restricted
/// to the mask. Falls back to `grad` when P cannot be factored.
pub(super) fn precondition(prob: &Problem, u: &[f64], grad: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let n = u.len();
    let mut hess = prob.numerator_hessian(u, HESSIAN_DELTA * max_abs(u));
    if let Some(mask) = mask {
        for i in (0..n).filter(|&i| !mask[i]) {
            for j in 0..n {
                hess[i * n + j] = 0.0;
                hess[j * n + i] = 0.0;
            }
            hess[i * n + i] = 1.0;
        }
    }
    let mut dir = grad.to_vec();
    if chol::factor(&mut hess, n) {
        chol::solve(&hess, n, &mut dir);
    }
    dir
}

/// Preconditioned projected gradient descent on the quotient from `start`.
///
/// The direction is the quotient gradient ∇N − R∇D mapped through the inverse
/// of the (smoothed) numerator Hessian; the first trial step p − 1 turns a
/// full step into one inverse-power update. Trial steps shrink by `backtrack`
/// until the Armijo condition holds, so accepted quotient values never
/// increase. Every iterate is renormalized to unit weight.
pub(super) fn descend(prob: &Problem, start: Vec<f64>, mask: Option<&[bool]>, cfg: &SolverConfig) -> Result<EigenPair> {
    let n = prob.len();
    let mut u = start;
    if let Some(mask) = mask {
        u.iter_mut().zip(mask).filter(|(_, &m)| !m).for_each(|(v, _)| *v = 0.0);
    }
    if !normalize_in_place(prob, &mut u) {
        return Err(Error::ZeroDenominator);
    }
    let mut gn = vec![0.0; n];
    let mut gd = vec![0.0; n];
    let mut cur = evaluate(prob, u, mask, &mut gn, &mut gd);
    let mut trace = vec![cur.lambda];
    let mut converged = cur.residual <= cfg.tol_residual;
    let mut iterations = 0;
    let mut stalled = 0;
    let step = cfg.step0 * (prob.p() - 1.0);

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let dir = precondition(prob, &cur.u, &cur.grad, mask);
        let slope = dot(&cur.grad, &dir);
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..60 {
            let mut trial: Vec<f64> = cur.u.iter().zip(&dir).map(|(v, d)| v - alpha * d).collect();
            if normalize_in_place(prob, &mut trial) {
                let next = evaluate(prob, trial, mask, &mut gn, &mut gd);
                if sufficient(cur.lambda, next.lambda, cfg.armijo * alpha * slope, &cur.grad, &next.grad) {
                    accepted = Some(next);
                    break;
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some(next) = accepted else { break };
        let decrease = (cur.lambda - next.lambda) / next.lambda.abs().max(f64::MIN_POSITIVE);
        stalled = if decrease < cfg.tol_quotient { stalled + 1 } else { 0 };
        cur = next;
        trace.push(cur.lambda);
        converged = cur.residual <= cfg.tol_residual;
        if stalled >= STALL_PATIENCE {
            break;
        }
    }

    let mut pair = EigenPair {
        lambda: cur.lambda,
        u: cur.u.into(),
        residual: cur.residual,
        iterations,
        converged,
        trace,
    };
    pair.canonicalize();
    Ok(pair)
}

/// Armijo decrease, or (once the decrease drops below the resolution of the
/// quotient) no increase together with a smaller gradient.
pub(super) fn sufficient(old: f64, new: f64, decrease: f64, old_grad: &[f64], new_grad: &[f64]) -> bool {
    new <= old - decrease || (new <= old && max_abs(new_grad) < max_abs(old_grad))
}

fn random_start(n: usize, mask: Option<&[bool]>, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = rng.gen_range(0.5..1.5);
            if mask.is_none_or(|m| m[i]) {
                v
            } else {
                0.0
            }
        })
        .collect()
}

/// One descent per restart, each from its own random nonnegative start.
pub fn solve_principal_restarts(prob: &Problem, cfg: &SolverConfig) -> Result<Vec<EigenPair>> {
    restarts_on(prob, None, cfg)
}

fn restarts_on(prob: &Problem, mask: Option<&[bool]>, cfg: &SolverConfig) -> Result<Vec<EigenPair>> {
    cfg.validate()?;
    (0..cfg.restarts)
        .map(|k| descend(prob, random_start(prob.len(), mask, cfg.restart_seed(k)), mask, cfg))
        .collect()
}

fn best(pairs: Vec<EigenPair>) -> EigenPair {
    pairs
        .into_iter()
        .reduce(|a, b| if b.lambda < a.lambda { b } else { a })
        .expect("at least one restart")
}

/// λ₁ = min R, attained by descent from `restarts` random nonnegative
/// starts. The lowest quotient wins; `u` is returned with Σu ≥ 0.
pub fn solve_principal(prob: &Problem, cfg: &SolverConfig) -> Result<EigenPair> {
    Ok(best(solve_principal_restarts(prob, cfg)?))
}

/// λ₁ of the subdomain selected by `mask`: the same descent over fields that
/// vanish outside the mask.
pub fn solve_principal_on_subdomain(prob: &Problem, mask: &[bool], cfg: &SolverConfig) -> Result<EigenPair> {
    if mask.len() != prob.len() {
        return Err(Error::LengthMismatch { expected: prob.len(), found: mask.len() });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyNodalDomain);
    }
    Ok(best(restarts_on(prob, Some(mask), cfg)?))
}

/// Weight-normalized copy of a field, used by callers holding a `Field`.
pub(super) fn normalized(prob: &Problem, u: &Field) -> Result<Vec<f64>> {
    let mut v = u.to_vec();
    if normalize_in_place(prob, &mut v) {
        Ok(v)
    } else {
        Err(Error::ZeroDenominator)
    }
}

use alloc::format;
use alloc::vec::Vec;

use super::{digest_with, PropertyReport};
use crate::energy::Problem;
use crate::mesh::{nodal_measure, restrict_to_nodal_domain, Sign};
use crate::solver::{solve_principal_on_subdomain, solve_principal_restarts, EigenPair, SolverConfig};

/// Relative agreement demanded of restarts in the simplicity check.
pub const SIMPLICITY_TOL: f64 = 1e-3;

/// The principal eigenfunction, in canonical sign, is strictly positive at
/// every node.
pub fn check_positivity(pair: &EigenPair, prob: &Problem) -> PropertyReport {
    let mut r = PropertyReport::new("positivity", digest_with(prob, &[&pair.u]));
    let flip = if pair.u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let min = pair.u.iter().map(|v| flip * v).fold(f64::INFINITY, f64::min);
    let max = pair.u.iter().map(|v| flip * v).fold(f64::NEG_INFINITY, f64::max);
    r.measure("lambda", pair.lambda).measure("min_u", min).measure("max_u", max);
    r.measure("margin", if max > 0.0 { min / max } else { 0.0 });
    if !pair.converged {
        r.fail(format!("pair not converged (residual {:.3e})", pair.residual));
    }
    if !(min > 0.0) {
        r.fail("eigenfunction is not strictly positive");
    }
    r
}

/// An eigenfunction above λ₁ has nonempty positive and negative nodal sets.
pub fn check_sign_change(pair: &EigenPair, lambda1: f64, prob: &Problem) -> PropertyReport {
    let mut r = PropertyReport::new("sign_change", digest_with(prob, &[&pair.u]));
    let gap = pair.lambda - lambda1;
    r.measure("lambda", pair.lambda).measure("lambda1", lambda1).measure("gap", gap);
    if !(gap > 1e-8 * lambda1.abs().max(1.0)) {
        r.not_applicable("eigenvalue does not exceed the principal one");
        return r;
    }
    let pos = nodal_measure(prob.grid(), &pair.u, Sign::Positive);
    let neg = nodal_measure(prob.grid(), &pair.u, Sign::Negative);
    r.measure("measure_positive", pos).measure("measure_negative", neg);
    if !(pos > 0.0 && neg > 0.0) {
        r.fail("eigenfunction keeps one sign");
    }
    r
}

/// ν > λ₁(Ω₊) and ν > λ₁(Ω₋) for a sign-changing eigenpair (ν, v), with the
/// constants ν·|Ω±|^{(p−sp)/(N−sp)} reported alongside.
pub fn check_nodal_inequalities(pair: &EigenPair, prob: &Problem, cfg: &SolverConfig) -> PropertyReport {
    let mut r = PropertyReport::new("nodal_inequalities", digest_with(prob, &[&pair.u]));
    let nu = pair.lambda;
    r.measure("nu", nu);
    let n = prob.grid().dim() as f64;
    let (p, sp) = (prob.p(), prob.s() * prob.p());
    let exponent = if n > sp { Some((p - sp) / (n - sp)) } else { None };
    for (sign, tag) in [(Sign::Positive, "plus"), (Sign::Negative, "minus")] {
        let mask = match restrict_to_nodal_domain(&pair.u, sign) {
            Ok(mask) => mask,
            Err(e) => {
                r.fail(format!("{tag}: {e}"));
                continue;
            }
        };
        let measure = nodal_measure(prob.grid(), &pair.u, sign);
        r.measure(&format!("measure_{tag}"), measure);
        match solve_principal_on_subdomain(prob, &mask, cfg) {
            Ok(sub) => {
                r.measure(&format!("lambda1_{tag}"), sub.lambda);
                r.measure(&format!("margin_{tag}"), nu - sub.lambda);
                if !sub.converged {
                    // Descent values are upper bounds of the subdomain
                    // minimum, so a strict margin still decides the check.
                    r.note(format!("{tag}: subdomain solve unconverged (residual {:.3e})", sub.residual));
                }
                if !(nu > sub.lambda) {
                    r.fail(format!("{tag}: nu does not exceed the subdomain principal eigenvalue"));
                }
            }
            Err(e) => {
                r.fail(format!("{tag}: {e}"));
            }
        }
        if let Some(e) = exponent {
            r.measure(&format!("implied_constant_{tag}"), nu * libm::pow(measure, e));
        }
    }
    if exponent.is_none() {
        r.note("measure bound not evaluated: needs sp < N");
    }
    r
}

/// Runs the principal solve from every restart seed and compares them.
pub fn check_simplicity(prob: &Problem, cfg: &SolverConfig) -> PropertyReport {
    match solve_principal_restarts(prob, cfg) {
        Ok(pairs) => check_simplicity_of(prob, &pairs, cfg),
        Err(e) => PropertyReport::errored("simplicity", digest_with(prob, &[]), &e),
    }
}

/// Simplicity verdict on already computed restarts: every restart converged,
/// eigenvalues agree to `SIMPLICITY_TOL` relative, and canonical normalized
/// eigenfunctions agree to `SIMPLICITY_TOL` in the discrete Lᵖ distance.
pub fn check_simplicity_of(prob: &Problem, pairs: &[EigenPair], cfg: &SolverConfig) -> PropertyReport {
    let fields: Vec<&[f64]> = pairs.iter().map(|p| &p.u[..]).collect();
    let mut r = PropertyReport::new("simplicity", digest_with(prob, &fields));
    r.measure("restarts", pairs.len() as f64).measure("seed", cfg.seed as f64);
    let Some(best) = pairs.iter().min_by(|a, b| a.lambda.total_cmp(&b.lambda)) else {
        r.fail("no restarts");
        return r;
    };
    let pw = prob.power();
    let cell = prob.grid().cell_measure();
    let mut spread = 0.0f64;
    let mut distance = 0.0f64;
    for (k, pair) in pairs.iter().enumerate() {
        if !pair.converged {
            r.fail(format!(
                "restart {k} not converged after {} iterations (residual {:.3e}, last quotient {:.12e})",
                pair.iterations,
                pair.residual,
                pair.trace.last().copied().unwrap_or(f64::NAN)
            ));
        }
        spread = spread.max((pair.lambda - best.lambda).abs() / best.lambda.abs());
        let sum: f64 = pair.u.iter().zip(best.u.iter()).map(|(a, b)| pw.abs(a - b)).sum();
        distance = distance.max(libm::pow(sum * cell, 1.0 / prob.p()));
    }
    r.measure("lambda1", best.lambda).measure("lambda_spread", spread).measure("lp_distance", distance);
    if !(spread < SIMPLICITY_TOL) {
        r.fail("restarts disagree on the eigenvalue");
    }
    if !(distance < SIMPLICITY_TOL) {
        r.fail("restarts disagree on the eigenfunction");
    }
    r
}

use alloc::format;
use alloc::vec::Vec;

use super::{digest_with, PropertyReport};
use crate::energy::Problem;
use crate::mesh::{Field, Point};
use crate::solver::EigenPair;

/// δ values of the logarithmic energy check, four decades.
pub const DEFAULT_DELTAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// Truncation levels n = 0..=MOSER_LEVELS.
pub const MOSER_LEVELS: usize = 10;

const MOSER_DECAY: f64 = 1e-6;
const LOG_RATIO: f64 = 10.0;

/// Critical exponent p* = Np/(N − sp) and β = (p − sp)/(N − sp), defined for
/// N > p and N > sp.
pub fn moser_exponents(n: usize, p: f64, s: f64) -> Option<(f64, f64)> {
    let n = n as f64;
    let sp = s * p;
    if n > p && n > sp {
        Some((n * p / (n - sp), (p - sp) / (n - sp)))
    } else {
        None
    }
}

fn canonical(u: &Field) -> Vec<f64> {
    let flip = if u.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    u.iter().map(|x| flip * x).collect()
}

/// t_n = ‖(c·u − (1 − 2⁻ⁿ))₊‖ in the discrete L^{p*} norm.
fn truncation_norms(u: &[f64], c: f64, p_star: f64, cell: f64) -> [f64; MOSER_LEVELS + 1] {
    core::array::from_fn(|n| {
        let level = 1.0 - libm::exp2(-(n as f64));
        let sum: f64 = u.iter().map(|x| libm::pow((c * x - level).max(0.0), p_star)).sum();
        libm::pow(sum * cell, 1.0 / p_star)
    })
}

/// Smallest M ≥ 1 with t_{n+1} ≤ Mⁿ t_n^{1+β} for n = 1..; pairs with
/// t_n = 0 carry no information and are skipped. (At n = 0 the right-hand
/// side does not involve M.)
fn fit_m(t: &[f64], beta: f64) -> f64 {
    let mut m = 1.0f64;
    for n in 1..(t.len() - 1) {
        if t[n] > 0.0 {
            let need = libm::pow(t[n + 1] / libm::pow(t[n], 1.0 + beta), 1.0 / n as f64);
            m = m.max(need);
        }
    }
    m
}

/// Truncation sequence of the principal eigenfunction. u is scaled to
/// max u₊ = 1, then halved until t₀ < M^{−1/β²} for the fitted M; passes if
/// the final sequence is non-increasing and t₁₀ < 1e-6·t₀.
pub fn check_moser_decay(pair: &EigenPair, prob: &Problem) -> PropertyReport {
    let mut r = PropertyReport::new("moser_decay", digest_with(prob, &[&pair.u]));
    let Some((p_star, beta)) = moser_exponents(prob.grid().dim(), prob.p(), prob.s()) else {
        r.not_applicable("outside model hypotheses: needs N > p and N > sp");
        return r;
    };
    if !prob.within_hypotheses() {
        r.not_applicable("non-mixed operator mode");
        return r;
    }
    r.measure("p_star", p_star).measure("beta", beta);
    if !pair.converged {
        r.fail(format!("pair not converged (residual {:.3e})", pair.residual));
    }
    let u = canonical(&pair.u);
    let cell = prob.grid().cell_measure();
    let top = u.iter().cloned().fold(0.0f64, f64::max);
    if top == 0.0 {
        r.measure("t0", 0.0).note("u₊ vanishes; every t_n is 0");
        return r;
    }
    let mut c = 1.0 / top;
    let mut t = truncation_norms(&u, c, p_star, cell);
    let mut m = fit_m(&t, beta);
    let mut halvings = 0;
    while !(t[0] < libm::pow(m, -1.0 / (beta * beta))) && halvings < 200 {
        c *= 0.5;
        halvings += 1;
        t = truncation_norms(&u, c, p_star, cell);
        m = fit_m(&t, beta);
    }
    let threshold = libm::pow(m, -1.0 / (beta * beta));
    r.measure("M", m).measure("threshold", threshold).measure("scale", c).measure("halvings", halvings as f64);
    for (n, tn) in t.iter().enumerate() {
        r.measure(&format!("t{n}"), *tn);
    }
    r.measure("recursion_slack_n0", libm::pow(t[0], 1.0 + beta) - t[1]);
    if !(t[0] < threshold) {
        r.fail("could not scale t0 below the threshold");
    }
    if t.windows(2).any(|w| w[1] > w[0]) {
        r.fail("sequence increases");
    }
    if !(t[MOSER_LEVELS] < MOSER_DECAY * t[0]) {
        r.fail("t10 is not below 1e-6·t0");
    }
    r
}

/// Discrete ∫_{B_r}|∇log(u+δ)|ᵖ + ∫∫_{B_r×B_r}|log((u(x)+δ)/(u(y)+δ))|ᵖ K
/// for each δ, r = R/4. Passes if the values stay within a factor 10 of each
/// other over the δ list (all zero also counts as bounded).
///
/// The ball defaults to the box centre with R = 0.4·(shortest side).
pub fn check_log_energy(pair: &EigenPair, prob: &Problem, centre: Option<Point>, radius: Option<f64>, deltas: &[f64]) -> PropertyReport {
    let mut r = PropertyReport::new("log_energy", digest_with(prob, &[&pair.u]));
    let grid = prob.grid();
    let dim = grid.dim();
    let x0 = centre.unwrap_or_else(|| {
        let mut c = [0.0; 2];
        for k in 0..dim {
            c[k] = 0.5 * (grid.lower()[k] + grid.upper()[k]);
        }
        c
    });
    let shortest = (0..dim).map(|k| grid.upper()[k] - grid.lower()[k]).fold(f64::INFINITY, f64::min);
    let big_r = radius.unwrap_or(0.4 * shortest);
    r.measure("R", big_r).measure("r", big_r / 4.0);
    if !(big_r > 0.0) || !(grid.distance_to_boundary(&x0) >= big_r) {
        r.fail(format!("ball of radius {big_r} is not contained in the domain"));
        return r;
    }
    let small = big_r / 4.0;
    let inside: Vec<bool> = grid.nodes().iter().map(|x| grid.distance(x, &x0) < small).collect();
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| inside[i]).collect();
    r.measure("ball_nodes", nodes.len() as f64);
    let u = canonical(&pair.u);
    if nodes.iter().any(|&i| u[i] < 0.0) {
        r.fail("eigenfunction is negative inside the ball");
        return r;
    }
    let pw = prob.power();
    let h = grid.h();
    let cell = grid.cell_measure();
    let mut values = Vec::new();
    for &delta in deltas {
        let lg = |k: usize| libm::log(u[k] + delta);
        let mut total = 0.0;
        if prob.mode().local() {
            for c in prob.cells() {
                let Some(b) = c.base else { continue };
                if !inside[b] {
                    continue;
                }
                let mut sq = 0.0;
                let mut complete = true;
                for k in 0..dim {
                    match c.forward[k] {
                        Some(f) => {
                            let g = (lg(f) - lg(b)) / h[k];
                            sq += g * g;
                        }
                        None => complete = false,
                    }
                }
                if complete {
                    total += libm::pow(sq, 0.5 * prob.p()) * cell;
                }
            }
        }
        if prob.mode().nonlocal() {
            for (a, &i) in nodes.iter().enumerate() {
                for &j in &nodes[a + 1..] {
                    total += 2.0 * pw.abs(lg(i) - lg(j)) * prob.kernel().row(i)[j];
                }
            }
        }
        r.measure(&format!("lhs_delta{delta:e}"), total);
        values.push(total);
    }
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 { 1.0 } else { max / min };
    r.measure("ratio", ratio);
    if !(ratio < LOG_RATIO) {
        r.fail("logarithmic energy grows as delta decreases");
    }
    r
}

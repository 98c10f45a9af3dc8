use alloc::format;
use alloc::vec::Vec;

use super::{digest_with, PropertyReport};
use crate::energy::Problem;
use crate::mesh::Field;
use crate::quadrature::GaussLegendre;

/// Interior path parameters used when the caller has no preference.
pub const DEFAULT_T_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

const PATH_TOL: f64 = 1e-10;
const WEIGHT_TOL: f64 = 1e-12;
const COMPARISON_TOL: f64 = 1e-10;

/// Along q_t = (t uᵖ + (1−t) vᵖ)^{1/p} the energy is convex:
/// E(q_t) ≤ t E(u) + (1−t) E(v) with E the numerator of the quotient, and
/// the weight term of q_t stays 1.
pub fn check_convexity_path(u: &Field, v: &Field, prob: &Problem, t_grid: &[f64]) -> PropertyReport {
    let mut r = PropertyReport::new("convexity_path", digest_with(prob, &[u, v]));
    if u.len() != prob.len() || v.len() != prob.len() {
        r.fail("field length does not match the grid");
        return r;
    }
    if !u.iter().chain(v.iter()).all(|&x| x > 0.0) {
        r.fail("inputs must be strictly positive at every node");
        return r;
    }
    let (Ok(eu), Ok(ev)) = (prob.breakdown(u), prob.breakdown(v)) else {
        r.fail("could not evaluate the inputs");
        return r;
    };
    for (tag, w) in [("u", eu.weight), ("v", ev.weight)] {
        if (w - 1.0).abs() > WEIGHT_TOL {
            r.fail(format!("{tag} is not weight-normalized (weight term {w:.16e})"));
        }
    }
    let p = prob.p();
    let mut worst = f64::INFINITY;
    let mut worst_weight = 0.0f64;
    for &t in t_grid {
        if !(0.0..=1.0).contains(&t) {
            r.fail(format!("t = {t} outside [0, 1]"));
            continue;
        }
        let q: Field = u
            .iter()
            .zip(v.iter())
            .map(|(a, b)| libm::pow(t * libm::pow(*a, p) + (1.0 - t) * libm::pow(*b, p), 1.0 / p))
            .collect::<Vec<_>>()
            .into();
        let eq = prob.breakdown(&q).expect("length checked");
        let lhs = eq.numerator();
        let rhs = t * eu.numerator() + (1.0 - t) * ev.numerator();
        let slack = rhs - lhs;
        r.measure(&format!("slack_t{t}"), slack);
        r.measure(&format!("local_slack_t{t}"), t * eu.local + (1.0 - t) * ev.local - eq.local);
        r.measure(&format!("nonlocal_slack_t{t}"), t * eu.nonlocal + (1.0 - t) * ev.nonlocal - eq.nonlocal);
        worst = worst.min(slack / rhs.abs().max(f64::MIN_POSITIVE));
        worst_weight = worst_weight.max((eq.weight - 1.0).abs());
        if slack < -PATH_TOL * rhs.abs() {
            r.fail(format!("energy above the chord at t = {t}"));
        }
    }
    r.measure("min_relative_slack", worst).measure("max_weight_error", worst_weight);
    if worst_weight > WEIGHT_TOL {
        r.fail("weight term of q_t drifts from 1");
    }
    r
}

/// The three comparison integrals and the verdict on their signs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonIntegrals {
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Sum of the absolute values of every contribution.
    pub scale: f64,
    pub report: PropertyReport,
}

/// ∫₀¹ |a + t(b − a)|^{p−2} dt for vectors a, b (first `dim` entries), by
/// 16-point Gauss–Legendre split at the point of the segment closest to 0.
fn path_integral(gauss: &GaussLegendre, a: &[f64; 2], b: &[f64; 2], dim: usize, p: f64) -> f64 {
    let d: [f64; 2] = core::array::from_fn(|k| b[k] - a[k]);
    let dd: f64 = (0..dim).map(|k| d[k] * d[k]).sum();
    let f = |t: f64| {
        let sq: f64 = (0..dim).map(|k| (a[k] + t * d[k]) * (a[k] + t * d[k])).sum();
        libm::pow(sq, 0.5 * (p - 2.0))
    };
    if dd == 0.0 {
        return f(0.0);
    }
    let t_star = -(0..dim).map(|k| a[k] * d[k]).sum::<f64>() / dd;
    if t_star > 0.0 && t_star < 1.0 {
        gauss.integrate(0.0, t_star, f) + gauss.integrate(t_star, 1.0, f)
    } else {
        gauss.integrate(0.0, 1.0, f)
    }
}

/// J₁, J₂, J₃ for ψ = (u − v)₊, from the identity
/// |b|^{p−2}b − |a|^{p−2}a = (p−1)(b−a)∫₀¹|a + t(b−a)|^{p−2}dt applied to the
/// local, nonlocal and zero-order parts of the form difference tested with
/// ψ. Every contribution is a product of a non-positive factor and a
/// positive one, so each J is ≤ 0; all vanish when u ≤ v.
pub fn check_comparison_integrals(u: &Field, v: &Field, prob: &Problem) -> ComparisonIntegrals {
    let mut r = PropertyReport::new("comparison_integrals", digest_with(prob, &[u, v]));
    if u.len() != prob.len() || v.len() != prob.len() {
        r.fail("field length does not match the grid");
        return ComparisonIntegrals { j1: f64::NAN, j2: f64::NAN, j3: f64::NAN, scale: 0.0, report: r };
    }
    let gauss = GaussLegendre::new(16);
    let grid = prob.grid();
    let dim = grid.dim();
    let h = grid.h();
    let cell = grid.cell_measure();
    let p = prob.p();
    let n = prob.len();
    let w: Vec<f64> = u.iter().zip(v.iter()).map(|(a, b)| a - b).collect();
    let psi: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
    let at = |f: &[f64], k: Option<usize>| k.map_or(0.0, |k| f[k]);
    let mut scale = 0.0;

    let mut j1 = 0.0;
    if prob.mode().local() {
        for c in prob.cells() {
            let mut pre = 0.0;
            let mut gu = [0.0; 2];
            let mut gv = [0.0; 2];
            for k in 0..dim {
                let dpsi = (at(&psi, c.forward[k]) - at(&psi, c.base)) / h[k];
                let dw = (at(&w, c.forward[k]) - at(&w, c.base)) / h[k];
                // ∇ψ · ∇(v − u)
                pre -= dpsi * dw;
                gu[k] = (at(u, c.forward[k]) - at(u, c.base)) / h[k];
                gv[k] = (at(v, c.forward[k]) - at(v, c.base)) / h[k];
            }
            if pre != 0.0 {
                let term = (p - 1.0) * pre * path_integral(&gauss, &gu, &gv, dim, p) * cell;
                j1 += term;
                scale += term.abs();
            }
        }
    }

    let mut j2 = 0.0;
    if prob.mode().nonlocal() {
        let kernel = prob.kernel();
        for i in 0..n {
            let row = kernel.row(i);
            for j in (i + 1)..n {
                // (v(y)−v(x)−(u(y)−u(x)))·(ψ(y)−ψ(x)) with x = i, y = j;
                // both orderings of the pair contribute equally.
                let pre = -(w[j] - w[i]) * (psi[j] - psi[i]);
                if pre != 0.0 {
                    let a = [u[j] - u[i], 0.0];
                    let b = [v[j] - v[i], 0.0];
                    let term = 2.0 * (p - 1.0) * pre * row[j] * path_integral(&gauss, &a, &b, 1, p);
                    j2 += term;
                    scale += term.abs();
                }
            }
            // one point inside, the other in the exterior where u = v = 0
            let pre = -w[i] * psi[i];
            if pre != 0.0 {
                let i_t = path_integral(&gauss, &[u[i], 0.0], &[v[i], 0.0], 1, p);
                let term = 2.0 * (p - 1.0) * pre * i_t * kernel.exterior()[i] * cell;
                j2 += term;
                scale += term.abs();
            }
        }
    }

    let mut j3 = 0.0;
    for i in 0..n {
        let pre = -psi[i] * w[i];
        if pre != 0.0 {
            let term = (p - 1.0) * pre * path_integral(&gauss, &[u[i], 0.0], &[v[i], 0.0], 1, p) * cell;
            j3 += term;
            scale += term.abs();
        }
    }

    r.measure("j1", j1).measure("j2", j2).measure("j3", j3).measure("scale", scale);
    let tol = COMPARISON_TOL * scale;
    for (name, j) in [("j1", j1), ("j2", j2), ("j3", j3)] {
        if !(j <= tol) {
            r.fail(format!("{name} is positive"));
        }
    }
    let dominated = psi.iter().all(|&x| x == 0.0);
    r.measure("u_le_v", if dominated { 1.0 } else { 0.0 });
    if dominated && (j1 != 0.0 || j2 != 0.0 || j3 != 0.0) {
        r.fail("integrals do not vanish although u ≤ v");
    }
    ComparisonIntegrals { j1, j2, j3, scale, report: r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid;
    use crate::properties::Verdict;
    use crate::OperatorMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(n: usize, p: f64) -> Problem {
        let g = Grid::unit_square(n).unwrap();
        let len = g.len();
        let v = Field::from_fn(&g, |x| 3.0 * x[0]);
        Problem::new(g, 0.5, p, v, Field::constant(len, 1.0), OperatorMode::Mixed).unwrap()
    }

    fn positive(prob: &Problem, rng: &mut ChaCha8Rng) -> Field {
        let f: Field = (0..prob.len()).map(|_| rng.gen_range(0.1..2.0)).collect::<Vec<_>>().into();
        prob.normalize(&f).unwrap()
    }

    #[test]
    fn path_integral_matches_closed_forms() {
        let gauss = GaussLegendre::new(16);
        // p = 3: ∫|a + t(b−a)| dt with a sign change at t = 1/3
        let got = path_integral(&gauss, &[-1.0, 0.0], &[2.0, 0.0], 1, 3.0);
        assert!((got - 5.0 / 6.0).abs() < 1e-14);
        // p = 4, vectors: ∫|a + t(b−a)|² dt = |a|² + a·d + |d|²/3
        let got = path_integral(&gauss, &[1.0, 2.0], &[-1.0, 0.5], 2, 4.0);
        let want = 5.0 + (1.0 * -2.0 + 2.0 * -1.5) + (4.0 + 2.25) / 3.0;
        assert!((got - want).abs() < 1e-13);
        // constant segment
        assert!((path_integral(&gauss, &[2.0, 0.0], &[2.0, 0.0], 1, 1.5) - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn convexity_identity_and_endpoints() {
        let prob = square(5, 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = positive(&prob, &mut rng);
        let r = check_convexity_path(&u, &u, &prob, &DEFAULT_T_GRID);
        assert!(r.passed(), "{r:?}");
        for t in DEFAULT_T_GRID {
            assert!(r.value(&format!("slack_t{t}")).unwrap().abs() < 1e-12);
        }
        let v = positive(&prob, &mut rng);
        let r = check_convexity_path(&u, &v, &prob, &[0.0, 1.0]);
        assert!(r.value("slack_t0").unwrap().abs() < 1e-12);
        assert!(r.value("slack_t1").unwrap().abs() < 1e-12);
    }

    #[test]
    fn convexity_on_random_pairs() {
        for p in [1.5, 2.0] {
            let prob = square(5, p);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..20 {
                let (u, v) = (positive(&prob, &mut rng), positive(&prob, &mut rng));
                let r = check_convexity_path(&u, &v, &prob, &DEFAULT_T_GRID);
                assert!(r.passed(), "{r:?}");
            }
        }
    }

    #[test]
    fn convexity_rejects_bad_inputs() {
        let prob = square(3, 1.5);
        let u = prob.normalize(&Field::constant(9, 1.0)).unwrap();
        let mut bad = u.clone();
        bad[4] = 0.0;
        assert_eq!(check_convexity_path(&u, &bad, &prob, &[0.5]).verdict, Verdict::Fail);
        let unnormalized = Field::constant(9, 1.0);
        assert_eq!(check_convexity_path(&u, &unnormalized, &prob, &[0.5]).verdict, Verdict::Fail);
    }

    #[test]
    fn comparison_signs() {
        for p in [1.5, 2.0, 3.0] {
            let prob = square(4, p);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..30 {
                let u: Field = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>().into();
                let v: Field = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>().into();
                let c = check_comparison_integrals(&u, &v, &prob);
                assert!(c.report.passed(), "{:?}", c.report);
                assert!(c.j1 < 0.0 && c.j2 < 0.0 && c.j3 < 0.0);
            }
        }
    }

    #[test]
    fn comparison_vanishes_when_ordered() {
        let prob = square(4, 1.5);
        let u = Field::from_fn(prob.grid(), |x| x[0] * x[1]);
        let c = check_comparison_integrals(&u, &u, &prob);
        assert_eq!((c.j1, c.j2, c.j3), (0.0, 0.0, 0.0));
        let above = Field::from(u.iter().map(|x| x + 0.1).collect::<Vec<_>>());
        let c = check_comparison_integrals(&u, &above, &prob);
        assert_eq!((c.j1, c.j2, c.j3), (0.0, 0.0, 0.0));
        assert_eq!(c.report.value("u_le_v"), Some(1.0));
        assert!(c.report.passed());
    }
}

//! Reference solvers for cross-checking the descent solvers.
//!
//! For p = 2 the discrete problem is the symmetric generalized eigenproblem
//! A u = λ B u; [`assemble_p2`] builds A and B straight from the kernel
//! table and the grid stencil, and [`smallest_eigenpairs`] solves it by
//! Householder tridiagonalization and implicit QL. For other p,
//! [`brute_force_quotient_min`] runs a derivative-free pattern search on the
//! quotient of a tiny grid.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::Problem;
use crate::mesh::Field;
use crate::{Error, Result};

/// A (dense, row-major) and the diagonal of B.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DenseSystem {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn b_diag(&self) -> &[f64] {
        &self.b
    }

    /// uᵀ A v.
    pub fn a_form(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| u[i] * (0..self.n).map(|j| self.a[i * self.n + j] * v[j]).sum::<f64>())
            .sum()
    }

    /// uᵀ B v.
    pub fn b_form(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.n).map(|i| u[i] * self.b[i] * v[i]).sum()
    }

    /// ‖A u − λ B u‖∞.
    pub fn residual(&self, lambda: f64, u: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let au: f64 = (0..self.n).map(|j| self.a[i * self.n + j] * u[j]).sum();
                (au - lambda * self.b[i] * u[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Stiffness and mass matrices of the p = 2 problem, honouring the operator
/// mode: uᵀAv = h_form(u, v) + Σ Vᵢuᵢvᵢhᴺ and uᵀBv = Σ gᵢuᵢvᵢhᴺ.
pub fn assemble_p2(prob: &Problem) -> Result<DenseSystem> {
    if prob.p() != 2.0 {
        return Err(Error::RequiresQuadratic(prob.p()));
    }
    let grid = prob.grid();
    let n = grid.len();
    let cell = grid.cell_measure();
    let mut a = vec![0.0; n * n];
    if prob.mode().local() {
        // Every axis edge of the extended grid, including the ones that
        // reach the zero exterior, carries hᴺ/hₖ².
        let dims = grid.n_per_axis();
        for i in 0..n {
            let idx = axis_index(dims, grid.dim(), i);
            for k in 0..grid.dim() {
                let c = cell / (grid.h()[k] * grid.h()[k]);
                a[i * n + i] += 2.0 * c;
                let mut next = idx;
                next[k] += 1;
                if next[k] < dims[k] {
                    let j = flat_index(dims, grid.dim(), next);
                    a[i * n + j] -= c;
                    a[j * n + i] -= c;
                }
            }
        }
    }
    if prob.mode().nonlocal() {
        let kernel = prob.kernel();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let w = kernel.table()[i * n + j];
                    a[i * n + i] += 2.0 * w;
                    a[i * n + j] -= 2.0 * w;
                }
            }
            a[i * n + i] += 2.0 * kernel.exterior()[i] * cell;
        }
    }
    for i in 0..n {
        a[i * n + i] += prob.potential()[i] * cell;
    }
    let b = prob.weight().iter().map(|g| g * cell).collect();
    Ok(DenseSystem { n, a, b })
}

fn axis_index(dims: &[usize], dim: usize, i: usize) -> [usize; 2] {
    if dim == 1 {
        [i, 0]
    } else {
        [i / dims[1], i % dims[1]]
    }
}

fn flat_index(dims: &[usize], dim: usize, idx: [usize; 2]) -> usize {
    if dim == 1 {
        idx[0]
    } else {
        idx[0] * dims[1] + idx[1]
    }
}

/// The `k` smallest eigenvalues of A u = λ B u in non-decreasing order, with
/// B-normalized eigenvectors (sign fixed so Σu ≥ 0).
pub fn smallest_eigenpairs(sys: &DenseSystem, k: usize) -> Result<Vec<(f64, Field)>> {
    let n = sys.n;
    if k == 0 || k > n {
        return Err(Error::InvalidRequest(alloc::format!("k = {k} outside 1..={n}")));
    }
    let inv_sqrt: Vec<f64> = sys.b.iter().map(|b| 1.0 / libm::sqrt(*b)).collect();
    // V holds C = B^{-1/2} A B^{-1/2}; tred2/tql2 overwrite it with the
    // eigenvectors.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| inv_sqrt[i] * sys.a[i * n + j] * inv_sqrt[j]).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    Ok(order
        .into_iter()
        .take(k)
        .map(|c| {
            let mut u: Vec<f64> = (0..n).map(|i| v[i][c] * inv_sqrt[i]).collect();
            if u.iter().sum::<f64>() < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
            }
            (d[c], Field::from(u))
        })
        .collect())
}

/// Householder reduction of the symmetric matrix in `v` to tridiagonal form
/// (diagonal `d`, subdiagonal `e[1..]`), accumulating the transformation in
/// `v`.
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    if n == 0 {
        return;
    }
    d[..n].copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..(n - 1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal matrix (d, e), rotating the columns of `v`.
fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::DenseNotConverged);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Largest grid the pattern search accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

/// Outcome of [`brute_force_quotient_min`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    /// Lowest quotient found over all restarts.
    pub value: f64,
    pub evaluations: usize,
    /// The evaluation budget ran out before every restart reached its
    /// smallest step; `value` is then only the best so far.
    pub exhausted: bool,
}

/// Smallest quotient found by compass search from `n_restarts` random
/// starts (uniform in [−1, 1] per node, seeded by `seed`). Each restart
/// probes ±step along every coordinate, halving the step whenever a full
/// sweep brings no improvement, until the step is below 1e-10 of max|u|.
pub fn brute_force_quotient_min(prob: &Problem, n_restarts: usize, budget: usize, seed: u64) -> Result<BruteForce> {
    let n = prob.len();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooManyNodes { nodes: n, max: BRUTE_FORCE_MAX_NODES });
    }
    if n_restarts == 0 {
        return Err(Error::InvalidRequest("at least one restart is required".into()));
    }
    let quotient = |u: &[f64]| {
        let parts = prob.evaluate(u, None);
        if parts.weight > 0.0 {
            parts.numerator() / parts.weight
        } else {
            f64::INFINITY
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut evaluations = 0;
    let mut exhausted = false;
    'restarts: for _ in 0..n_restarts {
        let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut r = quotient(&u);
        evaluations += 1;
        let mut step = 0.5 * u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        loop {
            let scale = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if step <= 1e-10 * scale {
                break;
            }
            let mut improved = false;
            for i in 0..n {
                for dir in [1.0, -1.0] {
                    if evaluations >= budget {
                        exhausted = true;
                        best = best.min(r);
                        break 'restarts;
                    }
                    let old = u[i];
                    u[i] = old + dir * step;
                    let trial = quotient(&u);
                    evaluations += 1;
                    if trial < r {
                        r = trial;
                        improved = true;
                        break;
                    }
                    u[i] = old;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(r);
    }
    Ok(BruteForce { value: best, evaluations, exhausted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::OperatorMode;
    use crate::mesh::Grid;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Field {
        Field::from((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>())
    }

    fn square(n: usize, mode: OperatorMode) -> Problem {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.5], &[n, n + 1]).unwrap();
        let len = g.len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = Field::from((0..len).map(|_| rng.gen_range(0.0..4.0)).collect::<Vec<_>>());
        let w = Field::from((0..len).map(|_| rng.gen_range(0.5..2.0)).collect::<Vec<_>>());
        Problem::new(g, 0.6, 2.0, v, w, mode).unwrap()
    }

    #[test]
    fn forms_match_energy_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [OperatorMode::Mixed, OperatorMode::LocalOnly, OperatorMode::NonlocalOnly] {
            let prob = square(4, mode);
            let sys = assemble_p2(&prob).unwrap();
            for _ in 0..20 {
                let u = random(&mut rng, prob.len());
                let v = random(&mut rng, prob.len());
                let want = prob.h_form(&u, &v).unwrap() + prob.potential_form(&u, &v).unwrap();
                let got = sys.a_form(&u, &v);
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
                let wb = prob.weight_form(&u, &v).unwrap();
                assert!((sys.b_form(&u, &v) - wb).abs() <= 1e-12);
            }
            for i in 0..sys.len() {
                for j in 0..sys.len() {
                    assert!((sys.a(i, j) - sys.a(j, i)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn trivial_mass_and_positive_rows() {
        let g = Grid::unit_interval(12).unwrap();
        let prob = Problem::new(g, 0.5, 2.0, Field::zeros(12), Field::constant(12, 1.0), OperatorMode::Mixed).unwrap();
        let sys = assemble_p2(&prob).unwrap();
        assert!(sys.b_diag().iter().all(|b| (b - 1.0 / 13.0).abs() < 1e-15));
        for i in 0..12 {
            let row: f64 = (0..12).map(|j| sys.a(i, j)).sum();
            assert!(row > 0.0);
        }
        let cubic = Problem::new(Grid::unit_interval(4).unwrap(), 0.5, 3.0, Field::zeros(4), Field::constant(4, 1.0), OperatorMode::Mixed).unwrap();
        assert_eq!(assemble_p2(&cubic), Err(Error::RequiresQuadratic(3.0)));
    }

    #[test]
    fn dirichlet_line_spectrum() {
        let g = Grid::unit_interval(63).unwrap();
        let prob = Problem::new(g, 0.5, 2.0, Field::zeros(63), Field::constant(63, 1.0), OperatorMode::LocalOnly).unwrap();
        let sys = assemble_p2(&prob).unwrap();
        let pairs = smallest_eigenpairs(&sys, 5).unwrap();
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        assert!((pairs[0].0 - pi2).abs() < 5e-3 * pi2);
        for (k, (lambda, _)) in pairs.iter().enumerate() {
            let t = libm::sin((k + 1) as f64 * core::f64::consts::PI / 128.0);
            let exact = 4.0 * 64.0 * 64.0 * t * t;
            assert!((lambda - exact).abs() < 1e-9 * exact, "{k}: {lambda} vs {exact}");
        }
    }

    #[test]
    fn pairs_sorted_normalized_and_accurate() {
        let prob = square(5, OperatorMode::Mixed);
        let sys = assemble_p2(&prob).unwrap();
        let pairs = smallest_eigenpairs(&sys, sys.len()).unwrap();
        assert!(pairs.windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(pairs[0].0 > 0.0);
        for (lambda, u) in &pairs {
            assert!(sys.residual(*lambda, u) < 1e-9, "{}", sys.residual(*lambda, u));
            assert!((sys.b_form(u, u) - 1.0).abs() < 1e-10);
        }
        assert!(pairs[0].1.iter().all(|&x| x > 0.0));
        assert!(smallest_eigenpairs(&sys, 0).is_err());
    }

    #[test]
    fn brute_force_agrees_with_dense_at_p2() {
        let g = Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = Field::from((0..9).map(|_| rng.gen_range(0.0..3.0)).collect::<Vec<_>>());
        let prob = Problem::new(g, 0.5, 2.0, v, Field::constant(9, 1.0), OperatorMode::Mixed).unwrap();
        let dense = smallest_eigenpairs(&assemble_p2(&prob).unwrap(), 1).unwrap()[0].0;
        let bf = brute_force_quotient_min(&prob, 6, 1_000_000, 1).unwrap();
        assert!(!bf.exhausted);
        assert!((bf.value - dense).abs() < 1e-6 * dense, "{} vs {dense}", bf.value);
        assert!(bf.value >= dense * (1.0 - 1e-12));
    }

    #[test]
    fn brute_force_limits() {
        let big = Problem::new(Grid::unit_interval(11).unwrap(), 0.5, 1.5, Field::zeros(11), Field::constant(11, 1.0), OperatorMode::Mixed).unwrap();
        assert_eq!(brute_force_quotient_min(&big, 1, 100, 0), Err(Error::TooManyNodes { nodes: 11, max: 10 }));
        let small = Problem::new(Grid::unit_interval(5).unwrap(), 0.5, 1.5, Field::zeros(5), Field::constant(5, 1.0), OperatorMode::Mixed).unwrap();
        let out = brute_force_quotient_min(&small, 3, 50, 0).unwrap();
        assert!(out.exhausted);
        assert!(out.value.is_finite());
        assert_eq!(out.evaluations, 50);
    }
}

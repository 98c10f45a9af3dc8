//! Quadrature of the singular kernel |x − y|^{−(N+sp)}.
//!
//! Interior pairs use the midpoint rule with the diagonal cell excluded. The
//! zero exterior condition turns the Ω × (ℝᴺ \ Ω) strips into a per-node
//! density ρᵢ = ∫_{ℝᴺ\Ω} |xᵢ − y|^{−(N+sp)} dy, computed in closed form in 1D
//! and, in 2D, by integrating the radial part exactly and the angular part
//! adaptively.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::mesh::{Field, Grid, Point};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Relative tolerance of the adaptive angular quadrature used for ρᵢ in 2D.
pub const EXTERIOR_REL_TOL: f64 = 1e-8;

/// Checks `0 < s < 1 < p`.
pub fn validate_exponents(s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::ParameterOutOfRange(alloc::format!("s = {s} must lie in (0, 1)")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::ParameterOutOfRange(alloc::format!("p = {p} must lie in (1, ∞)")));
    }
    Ok(())
}

/// Dense symmetric table of pair weights wᵢⱼ = h^{2N} / |xᵢ − xⱼ|^{N+sp}
/// plus the exterior density ρᵢ of every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    n: usize,
    grid_digest: u64,
    s: f64,
    p: f64,
    /// Row-major `n × n`; the diagonal is stored as zero and never read.
    pair: Vec<f64>,
    exterior: Vec<f64>,
}

impl KernelWeights {
    pub fn build(grid: &Grid, s: f64, p: f64) -> Result<Self> {
        validate_exponents(s, p)?;
        let n = grid.len();
        let exponent = grid.dim() as f64 + s * p;
        let scale = grid.cell_measure() * grid.cell_measure();
        let nodes = grid.nodes();
        let mut pair = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let w = scale * libm::pow(grid.distance(&nodes[i], &nodes[j]), -exponent);
                pair[i * n + j] = w;
                pair[j * n + i] = w;
            }
        }
        let exterior = (0..n)
            .map(|i| exterior_density(grid, s, p, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, grid_digest: grid.digest(), s, p, pair, exterior })
    }

    /// Reassembles weights from a stored table, recomputing ρ.
    pub fn from_table(grid: &Grid, s: f64, p: f64, pair: Vec<f64>) -> Result<Self> {
        validate_exponents(s, p)?;
        let n = grid.len();
        if pair.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, found: pair.len() });
        }
        let exterior = (0..n)
            .map(|i| exterior_density(grid, s, p, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, grid_digest: grid.digest(), s, p, pair, exterior })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn grid_digest(&self) -> u64 {
        self.grid_digest
    }

    /// Whether these weights were built for `grid`.
    pub fn matches(&self, grid: &Grid) -> bool {
        self.n == grid.len() && self.grid_digest == grid.digest()
    }

    /// wᵢⱼ for i ≠ j, `None` on the diagonal.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        (i != j).then(|| self.pair[i * self.n + j])
    }

    /// Row `i` of the table; entry `i` is zero.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.pair[i * self.n..(i + 1) * self.n]
    }

    pub fn table(&self) -> &[f64] {
        &self.pair
    }

    pub fn exterior(&self) -> &[f64] {
        &self.exterior
    }
}

/// ρᵢ = ∫_{ℝᴺ\Ω} |xᵢ − y|^{−(N+sp)} dy for node `node` of `grid`.
pub fn exterior_density(grid: &Grid, s: f64, p: f64, node: usize) -> Result<f64> {
    validate_exponents(s, p)?;
    let x = grid.nodes().get(node).ok_or(Error::NodeNotInterior(node))?;
    exterior_density_at(grid, s * p, x).ok_or(Error::NodeNotInterior(node))
}

/// Exterior density at an arbitrary point strictly inside the box; `None`
/// on or outside the boundary.
pub fn exterior_density_at(grid: &Grid, sp: f64, x: &Point) -> Option<f64> {
    if !grid.contains_strictly(x) {
        return None;
    }
    let (lo, hi) = (grid.lower(), grid.upper());
    if grid.dim() == 1 {
        let left = x[0] - lo[0];
        let right = hi[0] - x[0];
        return Some((libm::pow(left, -sp) + libm::pow(right, -sp)) / sp);
    }
    // Polar coordinates about x: the ray at angle φ leaves the box at
    // distance r(φ), and ∫_{r(φ)}^∞ r^{-(2+sp)} r dr = r(φ)^{-sp}/sp. Each
    // side at normal distance d covers ψ ∈ (atan(t₁/d), atan(t₂/d)) with
    // r = d / cos ψ, so its share is d^{-sp} ∫ cos^{sp} ψ dψ.
    let rule = GaussLegendre::new(12);
    let side = |d: f64, t1: f64, t2: f64| {
        let a = libm::atan2(t1, d);
        let b = libm::atan2(t2, d);
        let integral = rule.integrate_adaptive(a, b, EXTERIOR_REL_TOL, |psi| libm::pow(libm::cos(psi), sp));
        libm::pow(d, -sp) * integral
    };
    let (tx1, tx2) = (lo[0] - x[0], hi[0] - x[0]);
    let (ty1, ty2) = (lo[1] - x[1], hi[1] - x[1]);
    let total = side(hi[0] - x[0], ty1, ty2)
        + side(x[0] - lo[0], ty1, ty2)
        + side(hi[1] - x[1], tx1, tx2)
        + side(x[1] - lo[1], tx1, tx2);
    Some(total / sp)
}

/// Tail(w; x₀, r) = (r^{sp} Σ_{|xᵢ−x₀| ≥ r} |wᵢ|^{p−1} |xᵢ − x₀|^{−(N+sp)} hᴺ)^{1/(p−1)}.
///
/// Only grid nodes contribute: `w` vanishes outside Ω.
pub fn tail(grid: &Grid, w: &Field, x0: &Point, r: f64, s: f64, p: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::NonPositiveRadius(r));
    }
    validate_exponents(s, p)?;
    if w.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), found: w.len() });
    }
    let sp = s * p;
    let exponent = grid.dim() as f64 + sp;
    let mut sum = 0.0;
    for (xi, &wi) in grid.nodes().iter().zip(w.iter()) {
        let dist = grid.distance(xi, x0);
        if dist >= r && wi != 0.0 {
            sum += libm::pow(wi.abs(), p - 1.0) * libm::pow(dist, -exponent);
        }
    }
    let inner = libm::pow(r, sp) * sum * grid.cell_measure();
    Ok(libm::pow(inner, 1.0 / (p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_node_weight_by_hand() {
        // nodes at 1/3 and 2/3, h = 1/3, N + sp = 2: w = (1/3)² · 3² = 1
        let g = Grid::unit_interval(2).unwrap();
        let k = KernelWeights::build(&g, 0.5, 2.0).unwrap();
        assert!((k.weight(0, 1).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(k.weight(0, 0), None);
        assert_eq!(k.weight(0, 1), k.weight(1, 0));
    }

    #[test]
    fn weights_symmetric_positive() {
        let g = Grid::unit_square(5).unwrap();
        let k = KernelWeights::build(&g, 0.3, 1.7).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    let w = k.weight(i, j).unwrap();
                    assert!(w > 0.0);
                    assert_eq!(w.to_bits(), k.weight(j, i).unwrap().to_bits());
                }
            }
        }
        assert!(k.exterior().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn rejects_bad_exponents() {
        let g = Grid::unit_interval(4).unwrap();
        assert!(KernelWeights::build(&g, 1.0, 2.0).is_err());
        assert!(KernelWeights::build(&g, 0.5, 1.0).is_err());
        assert!(KernelWeights::build(&g, 0.0, 2.0).is_err());
    }

    #[test]
    fn exterior_density_1d_closed_form() {
        // Ω = (0,1), sp = 1: ρ(x) = 1/x + 1/(1−x)
        let g = Grid::unit_interval(3).unwrap(); // nodes 0.25, 0.5, 0.75
        let rho_mid = exterior_density(&g, 0.5, 2.0, 1).unwrap();
        assert!((rho_mid - 4.0).abs() < 1e-12);
        let rho_quarter = exterior_density(&g, 0.5, 2.0, 0).unwrap();
        assert!((rho_quarter - (4.0 + 4.0 / 3.0)).abs() < 1e-12);
        let rho_mirror = exterior_density(&g, 0.5, 2.0, 2).unwrap();
        assert!((rho_quarter - rho_mirror).abs() < 1e-12);
        assert_eq!(exterior_density(&g, 0.5, 2.0, 3), Err(Error::NodeNotInterior(3)));
    }

    #[test]
    fn exterior_density_1d_against_numeric_integral() {
        // independent route: with y − x = e^v each half-line becomes
        // ∫ e^{−sp·v} dv, integrated numerically over a truncated range
        let g = Grid::new(1, &[0.0], &[1.0], &[7]).unwrap();
        let (s, p) = (0.35, 1.6);
        let sp = s * p;
        let rule = GaussLegendre::new(16);
        for (i, x) in g.nodes().iter().enumerate() {
            let x = x[0];
            let half_line = |dist: f64| {
                let v0 = libm::log(dist);
                rule.integrate_adaptive(v0, v0 + 45.0 / sp, 1e-13, |v| libm::exp(-sp * v))
            };
            let (left, right) = (half_line(x), half_line(1.0 - x));
            let got = exterior_density(&g, s, p, i).unwrap();
            assert!(((got - (left + right)) / got).abs() < 1e-9, "node {i}");
        }
    }

    /// For sp = 1 the angular integral is elementary: ∫cos ψ = sin ψ.
    fn rho_square_sp1(x: &Point, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let side = |d: f64, t1: f64, t2: f64| (t2 / (d * d + t2 * t2).sqrt() - t1 / (d * d + t1 * t1).sqrt()) / d;
        side(hi[0] - x[0], lo[1] - x[1], hi[1] - x[1])
            + side(x[0] - lo[0], lo[1] - x[1], hi[1] - x[1])
            + side(hi[1] - x[1], lo[0] - x[0], hi[0] - x[0])
            + side(x[1] - lo[1], lo[0] - x[0], hi[0] - x[0])
    }

    /// For sp = 2: ∫cos²ψ = (ψ + sin ψ cos ψ)/2, divided by sp = 2.
    fn rho_square_sp2(x: &Point, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let prim = |psi: f64| 0.5 * (psi + psi.sin() * psi.cos());
        let side = |d: f64, t1: f64, t2: f64| (prim(t2.atan2(d)) - prim(t1.atan2(d))) / (d * d);
        0.5 * (side(hi[0] - x[0], lo[1] - x[1], hi[1] - x[1])
            + side(x[0] - lo[0], lo[1] - x[1], hi[1] - x[1])
            + side(hi[1] - x[1], lo[0] - x[0], hi[0] - x[0])
            + side(x[1] - lo[1], lo[0] - x[0], hi[0] - x[0]))
    }

    #[test]
    fn exterior_density_2d_elementary_cases() {
        let g = Grid::new(2, &[0.0, -1.0], &[2.0, 0.5], &[6, 5]).unwrap();
        for (i, x) in g.nodes().iter().enumerate() {
            let got = exterior_density(&g, 0.5, 2.0, i).unwrap();
            let want = rho_square_sp1(x, [0.0, -1.0], [2.0, 0.5]);
            assert!(((got - want) / want).abs() < 1e-8, "sp=1 node {i}: {got} vs {want}");
            let got = exterior_density(&g, 0.8, 2.5, i).unwrap();
            let want = rho_square_sp2(x, [0.0, -1.0], [2.0, 0.5]);
            assert!(((got - want) / want).abs() < 1e-8, "sp=2 node {i}: {got} vs {want}");
        }
    }

    #[test]
    fn exterior_density_2d_dihedral_symmetry() {
        let n = 9;
        let g = Grid::unit_square(n).unwrap();
        let rho: Vec<f64> = (0..g.len()).map(|i| exterior_density(&g, 0.5, 1.5, i).unwrap()).collect();
        let at = |i: usize, j: usize| rho[i * n + j];
        for i in 0..n {
            for j in 0..n {
                let r = at(i, j);
                for other in [at(j, i), at(n - 1 - i, j), at(i, n - 1 - j), at(n - 1 - j, n - 1 - i)] {
                    assert!(((r - other) / r).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn exterior_density_blows_up_near_boundary() {
        let mut last = 0.0;
        for n in [4, 8, 16, 32, 64] {
            let g = Grid::unit_square(n).unwrap();
            let rho = exterior_density(&g, 0.5, 1.5, 0).unwrap();
            assert!(rho > last);
            last = rho;
        }
    }

    #[test]
    fn seminorm_quadrature_error_decreases() {
        // u = x(1−x), s = 1/2, p = 2. Inside Ω×Ω the integrand is
        // (1 − x − y)², integrating to 1/6; the strips give
        // 2∫u²(1/x + 1/(1−x)) = 2∫x(1−x) = 1/3. Total 1/2.
        let exact = 0.5;
        let mut last_err = f64::INFINITY;
        for n in [16, 32, 64, 128] {
            let g = Grid::unit_interval(n).unwrap();
            let k = KernelWeights::build(&g, 0.5, 2.0).unwrap();
            let u: Vec<f64> = g.nodes().iter().map(|x| x[0] * (1.0 - x[0])).collect();
            let mut e = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        e += (u[i] - u[j]).powi(2) * k.weight(i, j).unwrap();
                    }
                }
                e += 2.0 * u[i] * u[i] * k.exterior()[i] * g.cell_measure();
            }
            let err = (e - exact).abs();
            assert!(err < last_err, "n={n}: error {err} did not decrease from {last_err}");
            last_err = err;
        }
        assert!(last_err < 0.02);
    }

    #[test]
    fn tail_cases() {
        let g = Grid::unit_interval(9).unwrap();
        let x0 = [0.2, 0.0];
        assert_eq!(tail(&g, &Field::zeros(9), &x0, 0.15, 0.5, 2.0).unwrap(), 0.0);

        let w = Field::from_fn(&g, |x| x[0] + 1.0);
        assert_eq!(tail(&g, &w.negative_part(), &x0, 0.15, 0.5, 2.0).unwrap(), 0.0);

        // single node at x = 0.7, distance 0.5 > r: r^{sp} · h · d^{-2} with sp = 1
        let mut single = Field::zeros(9);
        single[6] = 1.0;
        let r: f64 = 0.15;
        let got = tail(&g, &single, &x0, r, 0.5, 2.0).unwrap();
        let want = r * 0.1 * 0.5f64.powi(-2);
        assert!((got - want).abs() < 1e-14);

        assert_eq!(tail(&g, &w, &x0, 0.0, 0.5, 2.0), Err(Error::NonPositiveRadius(0.0)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_is_one_homogeneous(
                values in proptest::collection::vec(-3.0f64..3.0, 16),
                c in -4.0f64..4.0,
                p in 1.2f64..3.5,
            ) {
                let g = Grid::unit_square(4).unwrap();
                let w: Field = values.into();
                let x0 = [0.4, 0.5];
                let base = tail(&g, &w, &x0, 0.2, 0.5, p).unwrap();
                let scaled = tail(&g, &w.scaled(c), &x0, 0.2, 0.5, p).unwrap();
                prop_assert!((scaled - c.abs() * base).abs() <= 1e-10 * (1.0 + base));
            }
        }
    }
}

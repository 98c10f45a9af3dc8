//! Discrete energies, the H form, the Rayleigh quotient and exact gradients.
//!
//! The local term uses forward differences on the zero-extended grid, the
//! nonlocal term the kernel table plus the exterior strips `2 Σ |uᵢ|^p ρᵢ hᴺ`.
//! Gradients are the exact derivatives of these discrete sums, so a descent
//! method on the quotient sees a consistent objective. All sums run in a
//! fixed order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kernel::{validate_exponents, KernelWeights};
use crate::mesh::{Cell, Field, Grid};
use crate::{Error, Result};

/// Which parts of the operator are switched on. Only `Mixed` is the full
/// problem; the others exist to anchor the solver against known values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorMode {
    #[default]
    Mixed,
    LocalOnly,
    NonlocalOnly,
}

impl OperatorMode {
    pub fn local(self) -> bool {
        self != OperatorMode::NonlocalOnly
    }

    pub fn nonlocal(self) -> bool {
        self != OperatorMode::LocalOnly
    }
}

/// |t|^p and |t|^{p−2}t with fast paths for the exponents used most.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Power {
    Two,
    ThreeHalves,
    Three,
    General(f64),
}

impl Power {
    pub(crate) fn new(p: f64) -> Self {
        if p == 2.0 {
            Power::Two
        } else if p == 1.5 {
            Power::ThreeHalves
        } else if p == 3.0 {
            Power::Three
        } else {
            Power::General(p)
        }
    }

    /// |t|^{p−2} t, extended by 0 at t = 0.
    #[inline(always)]
    pub(crate) fn signed(self, t: f64) -> f64 {
        match self {
            Power::Two => t,
            Power::Three => t * t.abs(),
            Power::ThreeHalves => {
                if t == 0.0 {
                    0.0
                } else {
                    t / libm::sqrt(t.abs())
                }
            }
            Power::General(p) => {
                if t == 0.0 {
                    0.0
                } else {
                    libm::pow(t.abs(), p - 2.0) * t
                }
            }
        }
    }

    /// |t|^p.
    #[inline(always)]
    pub(crate) fn abs(self, t: f64) -> f64 {
        match self {
            Power::Two => t * t,
            Power::Three => t * t * t.abs(),
            Power::ThreeHalves => t.abs() * libm::sqrt(t.abs()),
            Power::General(p) => libm::pow(t.abs(), p),
        }
    }

    /// (q)^{(p−2)/2} for a squared norm q, extended by 0 at q = 0.
    #[inline(always)]
    pub(crate) fn norm_factor(self, sq: f64) -> f64 {
        match self {
            Power::Two => 1.0,
            Power::Three => libm::sqrt(sq),
            Power::ThreeHalves => {
                if sq == 0.0 {
                    0.0
                } else {
                    1.0 / libm::sqrt(libm::sqrt(sq))
                }
            }
            Power::General(p) => {
                if sq == 0.0 {
                    0.0
                } else {
                    libm::pow(sq, 0.5 * (p - 2.0))
                }
            }
        }
    }
}

/// The four pieces of the Rayleigh quotient.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FormBreakdown {
    /// ∫|∇u|^p
    pub local: f64,
    /// Σ_{i≠j}|uᵢ−uⱼ|^p wᵢⱼ + 2Σ|uᵢ|^p ρᵢ hᴺ
    pub nonlocal: f64,
    /// ∫V|u|^p
    pub potential: f64,
    /// ∫g|u|^p
    pub weight: f64,
}

impl FormBreakdown {
    /// Numerator of the quotient: ‖u‖^p + ∫V|u|^p.
    pub fn numerator(&self) -> f64 {
        self.local + self.nonlocal + self.potential
    }

    pub fn quotient(&self) -> Result<f64> {
        if self.weight > 0.0 {
            Ok(self.numerator() / self.weight)
        } else {
            Err(Error::ZeroDenominator)
        }
    }
}

/// Grid, exponents, potential and weight, with the kernel table prebuilt.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Grid,
    s: f64,
    p: f64,
    potential: Field,
    weight: Field,
    kernel: KernelWeights,
    mode: OperatorMode,
    cells: Vec<Cell>,
    power: Power,
}

impl Problem {
    pub fn new(grid: Grid, s: f64, p: f64, potential: Field, weight: Field, mode: OperatorMode) -> Result<Self> {
        validate_exponents(s, p)?;
        let kernel = KernelWeights::build(&grid, s, p)?;
        Self::with_kernel(grid, potential, weight, kernel, mode)
    }

    /// Uses prebuilt (for example cached) kernel weights.
    pub fn with_kernel(
        grid: Grid,
        potential: Field,
        weight: Field,
        kernel: KernelWeights,
        mode: OperatorMode,
    ) -> Result<Self> {
        let (s, p) = (kernel.s(), kernel.p());
        validate_exponents(s, p)?;
        let n = grid.len();
        for f in [&potential, &weight] {
            if f.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: f.len() });
            }
        }
        if !kernel.matches(&grid) {
            return Err(Error::LengthMismatch { expected: n, found: kernel.len() });
        }
        if let Some((node, &value)) = potential.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::NegativePotential { node, value });
        }
        if let Some((node, &value)) = weight.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveWeight { node, value });
        }
        let cells = grid.cells();
        Ok(Self { grid, s, p, potential, weight, kernel, mode, cells, power: Power::new(p) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn weight(&self) -> &Field {
        &self.weight
    }

    pub fn kernel(&self) -> &KernelWeights {
        &self.kernel
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub(crate) fn power(&self) -> Power {
        self.power
    }

    pub(crate) fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Same problem with a different weight function.
    pub fn with_weight(&self, weight: Field) -> Result<Self> {
        Self::with_kernel(self.grid.clone(), self.potential.clone(), weight, self.kernel.clone(), self.mode)
    }

    /// Same problem with a different potential.
    pub fn with_potential(&self, potential: Field) -> Result<Self> {
        Self::with_kernel(self.grid.clone(), potential, self.weight.clone(), self.kernel.clone(), self.mode)
    }

    /// Same problem with a different operator mode.
    pub fn with_mode(&self, mode: OperatorMode) -> Self {
        Self { mode, ..self.clone() }
    }

    /// Whether the setting satisfies the standing hypotheses of the theory
    /// (full mixed operator, p < N and sp < N). One-dimensional runs never do.
    pub fn within_hypotheses(&self) -> bool {
        let n = self.grid.dim() as f64;
        self.mode == OperatorMode::Mixed && self.p < n && self.s * self.p < n
    }

    fn check_len(&self, u: &Field) -> Result<()> {
        if u.len() == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.len(), found: u.len() })
        }
    }

    /// All four terms, with switched-off operator parts reported as zero.
    pub fn breakdown(&self, u: &Field) -> Result<FormBreakdown> {
        self.check_len(u)?;
        Ok(self.evaluate(u, None))
    }

    /// Breakdown and, if requested, the gradients of the numerator and the
    /// denominator in one pass. Gradient buffers are overwritten.
    pub(crate) fn evaluate(&self, u: &[f64], grads: Option<(&mut [f64], &mut [f64])>) -> FormBreakdown {
        let n = self.len();
        let pw = self.power;
        let p = self.p;
        let cell = self.grid.cell_measure();
        let mut out = FormBreakdown::default();
        let mut potential = Sum::default();
        let mut weight = Sum::default();
        match grads {
            None => {
                if self.mode.local() {
                    out.local = local_sum(&self.grid, &self.cells, pw, u, None);
                }
                if self.mode.nonlocal() {
                    out.nonlocal = nonlocal_sum(&self.kernel, cell, pw, u, None);
                }
                for i in 0..n {
                    let a = pw.abs(u[i]);
                    potential.add(self.potential[i] * a);
                    weight.add(self.weight[i] * a);
                }
            }
            Some((gnum, gden)) => {
                gnum.iter_mut().for_each(|g| *g = 0.0);
                if self.mode.local() {
                    out.local = local_sum(&self.grid, &self.cells, pw, u, Some(gnum));
                }
                if self.mode.nonlocal() {
                    out.nonlocal = nonlocal_sum(&self.kernel, cell, pw, u, Some(gnum));
                }
                for i in 0..n {
                    let a = pw.abs(u[i]);
                    let sg = pw.signed(u[i]);
                    potential.add(self.potential[i] * a);
                    weight.add(self.weight[i] * a);
                    gnum[i] += p * self.potential[i] * sg * cell;
                    gden[i] = p * self.weight[i] * sg * cell;
                }
            }
        }
        out.potential = potential.value() * cell;
        out.weight = weight.value() * cell;
        out
    }

    /// Discrete H_{s,p}(u, v) over the enabled operator parts.
    pub fn h_form(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        let pw = self.power;
        let cell = self.grid.cell_measure();
        let mut total = 0.0;
        if self.mode.local() {
            let h = self.grid.h();
            let dim = self.grid.dim();
            let mut sum = 0.0;
            for c in &self.cells {
                let (ub, vb) = (at(u, c.base), at(v, c.base));
                let mut gu = [0.0; 2];
                let mut gv = [0.0; 2];
                let mut sq = 0.0;
                for k in 0..dim {
                    gu[k] = (at(u, c.forward[k]) - ub) / h[k];
                    gv[k] = (at(v, c.forward[k]) - vb) / h[k];
                    sq += gu[k] * gu[k];
                }
                let dot: f64 = (0..dim).map(|k| gu[k] * gv[k]).sum();
                sum += pw.norm_factor(sq) * dot;
            }
            total += sum * cell;
        }
        if self.mode.nonlocal() {
            let n = self.len();
            let mut pairs = 0.0;
            for i in 0..n {
                let row = self.kernel.row(i);
                let mut acc = 0.0;
                for j in 0..n {
                    if j != i {
                        acc += pw.signed(u[i] - u[j]) * (v[i] - v[j]) * row[j];
                    }
                }
                pairs += acc;
            }
            let mut strips = 0.0;
            for i in 0..n {
                strips += pw.signed(u[i]) * v[i] * self.kernel.exterior()[i];
            }
            total += pairs + 2.0 * strips * cell;
        }
        Ok(total)
    }

    /// Potential cross term Σ V |u|^{p−2} u v hᴺ.
    pub fn potential_form(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        let pw = self.power;
        let s: f64 = (0..self.len()).map(|i| self.potential[i] * pw.signed(u[i]) * v[i]).sum();
        Ok(s * self.grid.cell_measure())
    }

    /// Weight cross term Σ g |u|^{p−2} u v hᴺ.
    pub fn weight_form(&self, u: &Field, v: &Field) -> Result<f64> {
        self.check_len(u)?;
        self.check_len(v)?;
        let pw = self.power;
        let s: f64 = (0..self.len()).map(|i| self.weight[i] * pw.signed(u[i]) * v[i]).sum();
        Ok(s * self.grid.cell_measure())
    }

    pub fn rayleigh_quotient(&self, u: &Field) -> Result<f64> {
        self.breakdown(u)?.quotient()
    }

    /// ∇ of the discrete numerator h(u,u) + ∫V|u|^p.
    pub fn grad_numerator(&self, u: &Field) -> Result<Field> {
        self.check_len(u)?;
        let mut gn = vec![0.0; self.len()];
        let mut gd = vec![0.0; self.len()];
        self.evaluate(u, Some((&mut gn, &mut gd)));
        Ok(gn.into())
    }

    /// ∇ of the discrete denominator ∫g|u|^p.
    pub fn grad_denominator(&self, u: &Field) -> Result<Field> {
        self.check_len(u)?;
        let pw = self.power;
        let c = self.p * self.grid.cell_measure();
        Ok(Field::from(
            (0..self.len()).map(|i| c * self.weight[i] * pw.signed(u[i])).collect::<Vec<_>>(),
        ))
    }

    /// max |∇N(u) − λ ∇D(u)| / max(1, |λ|) for weight-normalized `u`.
    pub fn residual(&self, lambda: f64, u: &Field) -> Result<f64> {
        self.check_len(u)?;
        let mut gn = vec![0.0; self.len()];
        let mut gd = vec![0.0; self.len()];
        let parts = self.evaluate(u, Some((&mut gn, &mut gd)));
        if (parts.weight - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized(parts.weight));
        }
        Ok(residual_norm(&gn, &gd, lambda))
    }

    /// `u` scaled so that ∫g|u|^p = 1.
    pub fn normalize(&self, u: &Field) -> Result<Field> {
        let w = self.breakdown(u)?.weight;
        if !(w > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        Ok(u.scaled(libm::pow(w, -1.0 / self.p)))
    }

    /// Dense Hessian of the numerator at `u` (row-major, n×n), with every
    /// |t|^{p−2} factor smoothed to (t² + δ²)^{(p−2)/2}. `delta` is measured
    /// in units of u; for the local term it is divided by the smallest
    /// spacing. Symmetric positive definite whenever δ > 0.
    pub(crate) fn numerator_hessian(&self, u: &[f64], delta: f64) -> Vec<f64> {
        let n = self.len();
        let pw = self.power;
        let p = self.p;
        let cell = self.grid.cell_measure();
        let mut hess = vec![0.0; n * n];
        let d2 = delta * delta;
        let c2 = p * (p - 1.0);
        if self.mode.local() {
            let h = self.grid.h();
            let dim = self.grid.dim();
            let hmin = h[..dim].iter().cloned().fold(f64::INFINITY, f64::min);
            let g2 = d2 / (hmin * hmin);
            for c in &self.cells {
                let ub = at(u, c.base);
                let mut g = [0.0; 2];
                let mut sq = 0.0;
                for k in 0..dim {
                    g[k] = (at(u, c.forward[k]) - ub) / h[k];
                    sq += g[k] * g[k];
                }
                let q = sq + g2;
                let f = p * pw.norm_factor(q) * cell;
                // ∂²/∂g² = f (I + (p−2) g gᵀ / q), pulled back through the
                // difference stencil.
                for k in 0..dim {
                    for l in 0..dim {
                        let mut m = (p - 2.0) * g[k] * g[l] / q;
                        if k == l {
                            m += 1.0;
                        }
                        let m = f * m / (h[k] * h[l]);
                        let rows = [(c.forward[k], 1.0), (c.base, -1.0)];
                        let cols = [(c.forward[l], 1.0), (c.base, -1.0)];
                        for (a, sa) in rows {
                            let Some(a) = a else { continue };
                            for (b, sb) in cols {
                                let Some(b) = b else { continue };
                                hess[a * n + b] += sa * sb * m;
                            }
                        }
                    }
                }
            }
        }
        if self.mode.nonlocal() {
            let rho = self.kernel.exterior();
            for i in 0..n {
                let row = self.kernel.row(i);
                let mut diag = 0.0;
                for j in (i + 1)..n {
                    let d = u[i] - u[j];
                    let e = 2.0 * c2 * pw.norm_factor(d * d + d2) * row[j];
                    diag += e;
                    hess[j * n + j] += e;
                    hess[i * n + j] -= e;
                    hess[j * n + i] -= e;
                }
                hess[i * n + i] += diag + 2.0 * c2 * pw.norm_factor(u[i] * u[i] + d2) * rho[i] * cell;
            }
        }
        for i in 0..n {
            hess[i * n + i] += c2 * pw.norm_factor(u[i] * u[i] + d2) * self.potential[i] * cell;
        }
        hess
    }
}

/// Accepted deviation of the weight term from 1 for a normalized field.
pub const NORMALIZATION_TOL: f64 = 1e-8;

pub(crate) fn residual_norm(gnum: &[f64], gden: &[f64], lambda: f64) -> f64 {
    let m = gnum
        .iter()
        .zip(gden)
        .fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()));
    m / lambda.abs().max(1.0)
}

/// Neumaier-compensated running sum. Quotient values must resolve
/// decreases near the rounding level of the sum itself.
#[derive(Clone, Copy, Default)]
pub(crate) struct Sum {
    hi: f64,
    lo: f64,
}

impl Sum {
    #[inline(always)]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.hi + x;
        if self.hi.abs() >= x.abs() {
            self.lo += (self.hi - t) + x;
        } else {
            self.lo += (x - t) + self.hi;
        }
        self.hi = t;
    }

    #[inline(always)]
    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }
}

#[inline(always)]
fn at(u: &[f64], node: Option<usize>) -> f64 {
    node.map_or(0.0, |k| u[k])
}

/// Σ_cells |∇ₕu|^p hᴺ, accumulating p·∂/∂u into `grad` when given.
fn local_sum(grid: &Grid, cells: &[Cell], pw: Power, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let h = grid.h();
    let dim = grid.dim();
    let cell = grid.cell_measure();
    let p = match pw {
        Power::Two => 2.0,
        Power::ThreeHalves => 1.5,
        Power::Three => 3.0,
        Power::General(p) => p,
    };
    let mut sum = Sum::default();
    match grad {
        None => {
            for c in cells {
                let ub = at(u, c.base);
                let mut sq = 0.0;
                for k in 0..dim {
                    let g = (at(u, c.forward[k]) - ub) / h[k];
                    sq += g * g;
                }
                sum.add(pw.norm_factor(sq) * sq);
            }
        }
        Some(grad) => {
            for c in cells {
                let ub = at(u, c.base);
                let mut g = [0.0; 2];
                let mut sq = 0.0;
                for k in 0..dim {
                    g[k] = (at(u, c.forward[k]) - ub) / h[k];
                    sq += g[k] * g[k];
                }
                let f = pw.norm_factor(sq);
                sum.add(f * sq);
                let scale = p * f * cell;
                let mut base_share = 0.0;
                for k in 0..dim {
                    let flux = scale * g[k] / h[k];
                    if let Some(j) = c.forward[k] {
                        grad[j] += flux;
                    }
                    base_share += flux;
                }
                if let Some(b) = c.base {
                    grad[b] -= base_share;
                }
            }
        }
    }
    sum.value() * cell
}

/// Σ_{i≠j}|uᵢ−uⱼ|^p wᵢⱼ + 2Σ|uᵢ|^p ρᵢ hᴺ, accumulating p·∂/∂u into `grad`.
fn nonlocal_sum(kernel: &KernelWeights, cell: f64, pw: Power, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let n = u.len();
    let rho = kernel.exterior();
    let mut pairs = Sum::default();
    let mut strips = Sum::default();
    match grad {
        None => {
            for i in 0..n {
                let row = kernel.row(i);
                let ui = u[i];
                let mut acc = Sum::default();
                for j in (i + 1)..n {
                    let d = ui - u[j];
                    acc.add(pw.signed(d) * row[j] * d);
                }
                pairs.add(acc.value());
                strips.add(pw.signed(ui) * ui * rho[i]);
            }
        }
        Some(grad) => {
            let p = match pw {
                Power::Two => 2.0,
                Power::ThreeHalves => 1.5,
                Power::Three => 3.0,
                Power::General(p) => p,
            };
            // Each unordered pair appears twice in the energy, so its
            // gradient carries 2p.
            let c_pair = 2.0 * p;
            for i in 0..n {
                let row = kernel.row(i);
                let ui = u[i];
                let mut acc = Sum::default();
                let mut gi = 0.0;
                for j in (i + 1)..n {
                    let d = ui - u[j];
                    let f = pw.signed(d) * row[j];
                    acc.add(f * d);
                    gi += f;
                    grad[j] -= c_pair * f;
                }
                grad[i] += c_pair * gi;
                pairs.add(acc.value());
                let sg = pw.signed(ui);
                strips.add(sg * ui * rho[i]);
                grad[i] += 2.0 * p * sg * rho[i] * cell;
            }
        }
    }
    2.0 * pairs.value() + 2.0 * strips.value() * cell
}

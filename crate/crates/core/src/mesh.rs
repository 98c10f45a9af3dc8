//! Uniform tensor grids over axis-aligned boxes and nodal-domain bookkeeping.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut, Neg};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A node coordinate. In one dimension the second component is zero.
pub type Point = [f64; 2];

/// Interior nodes of a uniform grid over the box `[lower, upper]`.
///
/// Nodes are ordered lexicographically by their axis indices, so in two
/// dimensions node `(i, j)` has linear index `i * n[1] + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_per_axis: Vec<usize>,
    h: Vec<f64>,
    nodes: Vec<Point>,
}

/// One forward-difference cell of the zero-extended grid.
///
/// `base` is the lower corner and `forward[k]` its neighbour along axis `k`;
/// `None` marks a point on the boundary or outside, where fields vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub base: Option<usize>,
    pub forward: [Option<usize>; 2],
}

impl Grid {
    pub fn new(dim: usize, lower: &[f64], upper: &[f64], n_per_axis: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if lower.len() != dim || upper.len() != dim || n_per_axis.len() != dim {
            return Err(Error::InvalidDimension(dim));
        }
        for axis in 0..dim {
            let (lo, hi) = (lower[axis], upper[axis]);
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::NonPositiveExtent { axis, lower: lo, upper: hi });
            }
            if n_per_axis[axis] < 2 {
                return Err(Error::TooFewNodes { axis, count: n_per_axis[axis] });
            }
        }
        let h: Vec<f64> = (0..dim)
            .map(|k| (upper[k] - lower[k]) / (n_per_axis[k] + 1) as f64)
            .collect();
        let coord = |axis: usize, i: usize| lower[axis] + (i + 1) as f64 * h[axis];
        let nodes = if dim == 1 {
            (0..n_per_axis[0]).map(|i| [coord(0, i), 0.0]).collect()
        } else {
            let mut nodes = Vec::with_capacity(n_per_axis[0] * n_per_axis[1]);
            for i in 0..n_per_axis[0] {
                for j in 0..n_per_axis[1] {
                    nodes.push([coord(0, i), coord(1, j)]);
                }
            }
            nodes
        };
        Ok(Self {
            dim,
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            n_per_axis: n_per_axis.to_vec(),
            h,
            nodes,
        })
    }

    /// Unit interval `(0, 1)` with `n` interior nodes.
    pub fn unit_interval(n: usize) -> Result<Self> {
        Self::new(1, &[0.0], &[1.0], &[n])
    }

    /// Unit square `(0, 1)²` with `n × n` interior nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(2, &[0.0, 0.0], &[1.0, 1.0], &[n, n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn n_per_axis(&self) -> &[usize] {
        &self.n_per_axis
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell measure hᴺ.
    pub fn cell_measure(&self) -> f64 {
        self.h.iter().product()
    }

    /// Lebesgue measure of the box.
    pub fn box_measure(&self) -> f64 {
        (0..self.dim).map(|k| self.upper[k] - self.lower[k]).product()
    }

    /// Euclidean distance between two points, using only the grid's axes.
    pub fn distance(&self, a: &Point, b: &Point) -> f64 {
        let mut sq = 0.0;
        for k in 0..self.dim {
            let d = a[k] - b[k];
            sq += d * d;
        }
        libm::sqrt(sq)
    }

    /// Whether `x` lies strictly inside the box.
    pub fn contains_strictly(&self, x: &Point) -> bool {
        (0..self.dim).all(|k| x[k] > self.lower[k] && x[k] < self.upper[k])
    }

    /// Distance from `x` to the box boundary (zero or negative if outside).
    pub fn distance_to_boundary(&self, x: &Point) -> f64 {
        (0..self.dim)
            .map(|k| f64::min(x[k] - self.lower[k], self.upper[k] - x[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Node coordinate mapped to `[0, 1]` along each axis.
    pub fn normalized(&self, x: &Point) -> Point {
        let mut xi = [0.0; 2];
        for k in 0..self.dim {
            xi[k] = (x[k] - self.lower[k]) / (self.upper[k] - self.lower[k]);
        }
        xi
    }

    /// Linear index of the node with axis indices `idx`, or `None` when any
    /// index falls on the boundary layer or outside.
    pub fn index_of(&self, idx: [isize; 2]) -> Option<usize> {
        let inside = |axis: usize| idx[axis] >= 0 && (idx[axis] as usize) < self.n_per_axis[axis];
        match self.dim {
            1 => inside(0).then_some(idx[0] as usize),
            _ => (inside(0) && inside(1))
                .then(|| idx[0] as usize * self.n_per_axis[1] + idx[1] as usize),
        }
    }

    /// Axis indices of node `k`.
    pub fn axis_indices(&self, k: usize) -> [usize; 2] {
        match self.dim {
            1 => [k, 0],
            _ => [k / self.n_per_axis[1], k % self.n_per_axis[1]],
        }
    }

    /// Forward-difference cells covering the box, including the boundary
    /// layer: `(n₀+1)` cells in 1D and `(n₀+1)(n₁+1)` in 2D. The cell with
    /// extended index `e` has its base corner at node `e - 1`.
    pub fn cells(&self) -> Vec<Cell> {
        match self.dim {
            1 => (0..=self.n_per_axis[0] as isize)
                .map(|e| Cell {
                    base: self.index_of([e - 1, 0]),
                    forward: [self.index_of([e, 0]), None],
                })
                .collect(),
            _ => {
                let mut cells = Vec::with_capacity((self.n_per_axis[0] + 1) * (self.n_per_axis[1] + 1));
                for e0 in 0..=self.n_per_axis[0] as isize {
                    for e1 in 0..=self.n_per_axis[1] as isize {
                        cells.push(Cell {
                            base: self.index_of([e0 - 1, e1 - 1]),
                            forward: [self.index_of([e0, e1 - 1]), self.index_of([e0 - 1, e1])],
                        });
                    }
                }
                cells
            }
        }
    }

    /// Order-sensitive FNV-1a digest of the grid definition.
    pub fn digest(&self) -> u64 {
        let mut d = Digest::new();
        d.write_u64(self.dim as u64);
        for k in 0..self.dim {
            d.write_f64(self.lower[k]);
            d.write_f64(self.upper[k]);
            d.write_u64(self.n_per_axis[k] as u64);
        }
        d.finish()
    }
}

/// Real values on the interior nodes; implicitly zero on ℝᴺ \ Ω.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    /// Samples `f` at every node of `grid`.
    pub fn from_fn(grid: &Grid, f: impl Fn(&Point) -> f64) -> Self {
        Self(grid.nodes().iter().map(f).collect())
    }

    /// Value at an optional node; points outside Ω evaluate to zero.
    #[inline]
    pub fn at(&self, node: Option<usize>) -> f64 {
        node.map_or(0.0, |k| self.0[k])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| c * v).collect())
    }

    /// Positive part `max(u, 0)`.
    pub fn positive_part(&self) -> Self {
        Self(self.0.iter().map(|&v| v.max(0.0)).collect())
    }

    /// Negative part `max(-u, 0)`.
    pub fn negative_part(&self) -> Self {
        Self(self.0.iter().map(|&v| (-v).max(0.0)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Zeroes every entry where `mask` is false.
    pub fn masked(&self, mask: &[bool]) -> Self {
        Self(self.0.iter().zip(mask).map(|(&v, &keep)| if keep { v } else { 0.0 }).collect())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scaled(-1.0)
    }
}

/// Selects Ω₊ = {u > 0} or Ω₋ = {u < 0}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    #[inline]
    fn selects(self, v: f64) -> bool {
        match self {
            Sign::Positive => v > 0.0,
            Sign::Negative => v < 0.0,
        }
    }
}

/// Discrete measure |Ω±|: the number of nodes with strict sign times hᴺ.
/// Nodes where `u` is exactly zero belong to neither set.
pub fn nodal_measure(grid: &Grid, u: &Field, sign: Sign) -> f64 {
    let count = u.iter().filter(|&&v| sign.selects(v)).count();
    count as f64 * grid.cell_measure()
}

/// Mask of the nodes in Ω₊ or Ω₋.
pub fn restrict_to_nodal_domain(u: &Field, sign: Sign) -> Result<Vec<bool>> {
    let mask: Vec<bool> = u.iter().map(|&v| sign.selects(v)).collect();
    if mask.iter().any(|&m| m) {
        Ok(mask)
    } else {
        Err(Error::EmptyNodalDomain)
    }
}

/// FNV-1a over little-endian words; stable across platforms.
#[derive(Debug, Clone)]
pub struct Digest(u64);

impl Digest {
    pub fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn write_slice(&mut self, values: &[f64]) {
        for &v in values {
            self.write_f64(v);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Digest {
    fn default() -> Self {
        Self::new()
    }
}

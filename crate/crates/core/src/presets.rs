//! Named coefficient profiles for potentials and weights.
//!
//! Every preset is evaluated in box-normalized coordinates ξ ∈ (0, 1)ᴺ, so the
//! same name means the same shape on any box.

use core::f64::consts::PI;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mesh::{Field, Grid, Point};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 1
    One,
    /// Σ (ξₖ − ½)²
    Well,
    /// ξ₀
    Ramp,
    /// Π sin(π ξₖ)
    Bump,
    /// ½ + ½ cos(2π ξ₀) · cos(2π ξ₁): oscillating, values in [0, 1]
    Checker,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::One, Preset::Well, Preset::Ramp, Preset::Bump, Preset::Checker];

    pub fn name(self) -> &'static str {
        match self {
            Preset::One => "one",
            Preset::Well => "well",
            Preset::Ramp => "ramp",
            Preset::Bump => "bump",
            Preset::Checker => "checker",
        }
    }

    pub fn eval(self, grid: &Grid, x: &Point) -> f64 {
        let xi = grid.normalized(x);
        let dim = grid.dim();
        match self {
            Preset::One => 1.0,
            Preset::Well => (0..dim).map(|k| (xi[k] - 0.5) * (xi[k] - 0.5)).sum(),
            Preset::Ramp => xi[0],
            Preset::Bump => (0..dim).map(|k| libm::sin(PI * xi[k])).product(),
            Preset::Checker => {
                let c: f64 = (0..dim).map(|k| libm::cos(2.0 * PI * xi[k])).product();
                0.5 + 0.5 * c
            }
        }
    }

    pub fn sample(self, grid: &Grid) -> Field {
        Field::from_fn(grid, |x| self.eval(grid, x))
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidRequest(alloc::format!("unknown preset `{s}`")))
    }
}

/// `offset + scale · preset(ξ)` sampled on `grid`.
pub fn affine(grid: &Grid, preset: Preset, scale: f64, offset: f64) -> Field {
    Field::from_fn(grid, |x| offset + scale * preset.eval(grid, x))
}

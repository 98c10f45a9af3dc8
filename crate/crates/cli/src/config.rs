//! Run configuration: one JSON file per run.
//!
//! Coefficient fields are given per named case, so one run can cover several
//! (V, g) pairs on the same grid and kernel.

use std::path::{Path, PathBuf};

use mixeig_core::kernel::validate_exponents;
use mixeig_core::presets::Preset;
use mixeig_core::{Field, Grid, KernelWeights, OperatorMode, Problem, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "MIXEIG_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Solve,
    Spectrum,
    Verify,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_per_axis: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetTerm {
    pub preset: Preset,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

/// `offset + Σ scale·preset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetExpr {
    #[serde(default)]
    pub offset: f64,
    pub terms: Vec<PresetTerm>,
}

/// How a coefficient field is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant(f64),
    Presets(PresetExpr),
    /// CSV in the layout written for eigenfunctions (coordinates, value),
    /// path relative to the config file.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub name: String,
    pub potential: FieldSpec,
    pub weight: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub grid: GridSpec,
    pub s: f64,
    pub p: f64,
    pub cases: Vec<CaseSpec>,
    #[serde(default)]
    pub mode: OperatorMode,
    /// Drives every random choice of the run; `solver.seed` follows it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Relative to the config file.
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    /// Attach the dense p = 2 cross-check to `spectrum` output.
    #[serde(default)]
    pub oracle: bool,
    /// Directory for binary kernel tables, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_cache: Option<PathBuf>,
}

fn default_seed() -> u64 {
    SolverConfig::default().seed
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn to_json(&self) -> Vec<u8> {
        crate::format::to_json(self)
    }
}

/// Sampled coefficients of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub name: String,
    pub potential: Field,
    pub weight: Field,
}

/// A validated config together with its grid and sampled coefficients.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    pub grid: Grid,
    pub cases: Vec<Case>,
}

/// 1-based line of the `occurrence`-th (0-based) `"key":` in `text`.
fn line_of(text: &str, key: &str, occurrence: usize) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    let mut seen = 0;
    for (n, line) in text.lines().enumerate() {
        let mut rest = line;
        while let Some(at) = rest.find(&quoted) {
            rest = &rest[at + quoted.len()..];
            if rest.trim_start().starts_with(':') {
                if seen == occurrence {
                    return Some(n + 1);
                }
                seen += 1;
            }
        }
    }
    None
}

struct Locator<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Locator<'_> {
    fn error(&self, key: &str, occurrence: usize, what: &str, msg: impl std::fmt::Display) -> CliError {
        let at = match line_of(self.text, key, occurrence) {
            Some(line) => format!("{}:{line}", self.path.display()),
            None => self.path.display().to_string(),
        };
        CliError::Validation(format!("{at}: {what}: {msg}"))
    }
}

impl LoadedConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(path, &text)
    }

    /// Parses and validates; `path` is used for messages and relative paths.
    pub fn from_text(path: &Path, text: &str) -> CliResult<Self> {
        let mut config: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Validation(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })?;
        let loc = Locator { path, text };
        let raw: serde_json::Value = serde_json::from_str(text).expect("already parsed once");
        if let Some(seed) = raw.get("solver").and_then(|s| s.get("seed")) {
            if seed.as_u64() != Some(config.seed) {
                return Err(loc.error("seed", 0, "solver.seed", "conflicts with the top-level seed; set only `seed`"));
            }
        }
        config.solver.seed = config.seed;
        config.solver.validate().map_err(|e| loc.error("solver", 0, "solver", e))?;

        let g = &config.grid;
        if g.lower.len() != g.dim || g.upper.len() != g.dim || g.n_per_axis.len() != g.dim {
            return Err(loc.error("grid", 0, "grid", format!("lower, upper and n_per_axis need {} entries", g.dim)));
        }
        let grid = Grid::new(g.dim, &g.lower, &g.upper, &g.n_per_axis).map_err(|e| loc.error("grid", 0, "grid", e))?;
        validate_exponents(config.s, config.p).map_err(|e| loc.error("p", 0, "s, p", e))?;

        if config.cases.is_empty() {
            return Err(loc.error("cases", 0, "cases", "at least one case is required"));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cases = Vec::new();
        for (k, spec) in config.cases.iter().enumerate() {
            let name = &spec.name;
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(loc.error("name", k, &format!("cases[{k}].name"), "use letters, digits, '_' or '-'"));
            }
            if config.cases[..k].iter().any(|c| &c.name == name) {
                return Err(loc.error("name", k, &format!("cases[{k}].name"), format!("duplicate case `{name}`")));
            }
            let potential = sample(&spec.potential, &grid, base).map_err(|m| loc.error("potential", k, &format!("cases[{k}].potential"), m))?;
            if let Some((node, v)) = potential.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
                return Err(loc.error("potential", k, &format!("cases[{k}].potential"), format!("V must be >= 0, node {node} has {v}")));
            }
            let weight = sample(&spec.weight, &grid, base).map_err(|m| loc.error("weight", k, &format!("cases[{k}].weight"), m))?;
            if let Some((node, v)) = weight.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                return Err(loc.error("weight", k, &format!("cases[{k}].weight"), format!("g must be > 0, node {node} has {v}")));
            }
            cases.push(Case { name: name.clone(), potential, weight });
        }
        Ok(Self { config, path: path.to_path_buf(), grid, cases })
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    /// Replaces the seed of the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.config.seed = seed;
        self.config.solver.seed = seed;
    }

    /// `--out`, then the environment variable, then the config entry.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(dir) = flag {
            return dir.to_path_buf();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.base_dir().join(&self.config.output_dir),
        }
    }

    pub fn kernel_cache_dir(&self) -> Option<PathBuf> {
        self.config.kernel_cache.as_ref().map(|d| self.base_dir().join(d))
    }

    /// One problem per case, sharing `kernel`.
    pub fn problems(&self, kernel: &KernelWeights) -> CliResult<Vec<(String, Problem)>> {
        self.cases
            .iter()
            .map(|c| {
                let prob = Problem::with_kernel(self.grid.clone(), c.potential.clone(), c.weight.clone(), kernel.clone(), self.config.mode)?;
                Ok((c.name.clone(), prob))
            })
            .collect()
    }
}

fn sample(spec: &FieldSpec, grid: &Grid, base: &Path) -> Result<Field, String> {
    match spec {
        FieldSpec::Constant(c) => Ok(Field::constant(grid.len(), *c)),
        FieldSpec::Presets(expr) => {
            if expr.terms.is_empty() {
                return Err("preset expression needs at least one term (use `constant` otherwise)".into());
            }
            Ok(Field::from_fn(grid, |x| expr.offset + expr.terms.iter().map(|t| t.scale * t.preset.eval(grid, x)).sum::<f64>()))
        }
        FieldSpec::Csv(rel) => read_field_csv(&base.join(rel), grid),
    }
}

/// Reads a field CSV; node coordinates must match the grid.
pub fn read_field_csv(path: &Path, grid: &Grid) -> Result<Field, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let dim = grid.dim();
    let tol = 1e-9 * (0..dim).map(|k| grid.upper()[k] - grid.lower()[k]).fold(0.0, f64::max);
    let mut values = Vec::with_capacity(grid.len());
    let mut lines = text.lines().enumerate();
    lines.next();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{}:{}", path.display(), n + 1);
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != dim + 1 {
            return Err(format!("{at}: expected {} columns, found {}", dim + 1, cols.len()));
        }
        let nums = cols
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| format!("{at}: `{c}` is not a number")))
            .collect::<Result<Vec<f64>, String>>()?;
        let node = values.len();
        let Some(x) = grid.nodes().get(node) else {
            return Err(format!("{at}: more rows than the {} grid nodes", grid.len()));
        };
        if (0..dim).any(|k| (x[k] - nums[k]).abs() > tol) {
            return Err(format!("{at}: coordinates do not match grid node {node}"));
        }
        values.push(nums[dim]);
    }
    if values.len() != grid.len() {
        return Err(format!("{}: {} rows for {} grid nodes", path.display(), values.len(), grid.len()));
    }
    Ok(Field::from(values))
}

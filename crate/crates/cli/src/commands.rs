//! The four commands. Each writes its files into the output directory and
//! reports whether everything it checked held.

use std::path::{Path, PathBuf};

use mixeig_core::oracle::{assemble_p2, brute_force_quotient_min, smallest_eigenpairs, BRUTE_FORCE_MAX_NODES};
use mixeig_core::properties::{run_all, summary, PropertyReport, Verdict};
use mixeig_core::solver::{solve_principal, solve_second};
use mixeig_core::{EigenPair, KernelWeights, OperatorMode, Problem};
use serde::Serialize;

use crate::config::{LoadedConfig, Task};
use crate::error::{CliError, CliResult};
use crate::format::{field_csv, to_json, write_file};

/// Label for runs in a setting the theory does not cover.
pub const OUTSIDE_HYPOTHESES: &str = "outside model hypotheses";
/// Label for runs with part of the operator switched off.
pub const NON_MIXED: &str = "non-mixed operator mode";

/// Tolerances recorded in the oracle table.
pub const DENSE_TOL_FIRST: f64 = 1e-6;
pub const DENSE_TOL_SECOND: f64 = 1e-3;
pub const BRUTE_TOL: f64 = 1e-4;

const BRUTE_RESTARTS: usize = 8;
const BRUTE_BUDGET: usize = 4_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Some check failed or some solve did not converge.
    pub failed: bool,
    /// Human-readable lines for the terminal.
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed)
    }
}

pub fn tags(prob: &Problem) -> Vec<&'static str> {
    if prob.mode() != OperatorMode::Mixed {
        vec![NON_MIXED]
    } else if !prob.within_hypotheses() {
        vec![OUTSIDE_HYPOTHESES]
    } else {
        Vec::new()
    }
}

#[derive(Serialize)]
struct PairOut<'a> {
    lambda: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    trace: &'a [f64],
}

impl<'a> From<&'a EigenPair> for PairOut<'a> {
    fn from(p: &'a EigenPair) -> Self {
        Self { lambda: p.lambda, residual: p.residual, iterations: p.iterations, converged: p.converged, trace: &p.trace }
    }
}

#[derive(Serialize)]
struct Header<'a> {
    case: &'a str,
    tags: Vec<&'static str>,
    s: f64,
    p: f64,
    mode: OperatorMode,
    seed: u64,
}

struct Run<'a> {
    cfg: &'a LoadedConfig,
    out: PathBuf,
    multi: bool,
    outcome: Outcome,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a LoadedConfig, out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let outcome = Outcome { files: Vec::new(), failed: false, lines: Vec::new() };
        Ok(Self { cfg, out: out.to_path_buf(), multi: cfg.cases.len() > 1, outcome })
    }

    fn header(&self, case: &'a str, prob: &Problem) -> Header<'a> {
        Header { case, tags: tags(prob), s: prob.s(), p: prob.p(), mode: prob.mode(), seed: self.cfg.config.seed }
    }

    fn file(&self, stem: &str, case: &str, ext: &str) -> PathBuf {
        if self.multi {
            self.out.join(format!("{stem}_{case}.{ext}"))
        } else {
            self.out.join(format!("{stem}.{ext}"))
        }
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<()> {
        write_file(&path, bytes)?;
        self.outcome.files.push(path);
        Ok(())
    }

    fn line(&mut self, text: String) {
        self.outcome.lines.push(text);
    }
}

/// Builds the shared kernel table, through the cache when one is set.
pub fn kernel(cfg: &LoadedConfig) -> CliResult<KernelWeights> {
    let (s, p) = (cfg.config.s, cfg.config.p);
    match cfg.kernel_cache_dir() {
        Some(dir) => Ok(crate::cache::load_or_build(&dir, &cfg.grid, s, p)?.0),
        None => Ok(KernelWeights::build(&cfg.grid, s, p)?),
    }
}

pub fn execute(task: Task, cfg: &LoadedConfig, out: &Path) -> CliResult<Outcome> {
    match task {
        Task::Solve => solve(cfg, out),
        Task::Spectrum => spectrum(cfg, out),
        Task::Verify => verify(cfg, out),
        Task::Oracle => oracle(cfg, out),
    }
}

/// `eigenpair.json` and `eigenfunction.csv` per case.
pub fn solve(cfg: &LoadedConfig, out: &Path) -> CliResult<Outcome> {
    let problems = cfg.problems(&kernel(cfg)?)?;
    let mut run = Run::new(cfg, out)?;
    for (name, prob) in &problems {
        let pair = solve_principal(prob, &cfg.config.solver)?;
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            header: Header<'a>,
            principal: PairOut<'a>,
        }
        let body = to_json(&Out { header: run.header(name, prob), principal: (&pair).into() });
        run.write(run.file("eigenpair", name, "json"), &body)?;
        run.write(run.file("eigenfunction", name, "csv"), &field_csv(prob.grid(), &pair.u))?;
        run.outcome.failed |= !pair.converged;
        run.line(format!("{name}: lambda1 = {:.12e} (residual {:.3e}, converged {})", pair.lambda, pair.residual, pair.converged));
    }
    Ok(run.outcome)
}

#[derive(Serialize)]
struct DenseCheck {
    lambda1: f64,
    lambda2: f64,
    rel_error1: f64,
    rel_error2: Option<f64>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `spectrum.json`, `eigenfunction1.csv` and `eigenfunction2.csv` per case.
pub fn spectrum(cfg: &LoadedConfig, out: &Path) -> CliResult<Outcome> {
    let problems = cfg.problems(&kernel(cfg)?)?;
    let mut run = Run::new(cfg, out)?;
    for (name, prob) in &problems {
        let first = solve_principal(prob, &cfg.config.solver)?;
        let mut notes = Vec::new();
        let second = match solve_second(prob, &first, &cfg.config.solver) {
            Ok(pair) => Some(pair),
            Err(e) => {
                notes.push(format!("second level: {e}"));
                None
            }
        };
        let dense = if cfg.config.oracle && prob.p() == 2.0 && prob.len() >= 2 {
            let pairs = smallest_eigenpairs(&assemble_p2(prob)?, 2)?;
            Some(DenseCheck {
                lambda1: pairs[0].0,
                lambda2: pairs[1].0,
                rel_error1: rel(first.lambda, pairs[0].0),
                rel_error2: second.as_ref().map(|s| rel(s.lambda, pairs[1].0)),
            })
        } else {
            if cfg.config.oracle {
                notes.push("dense cross-check needs p = 2".into());
            }
            None
        };
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            header: Header<'a>,
            principal: PairOut<'a>,
            second: Option<PairOut<'a>>,
            oracle: Option<DenseCheck>,
            notes: Vec<String>,
        }
        let failed = !first.converged || second.as_ref().is_none_or(|s| !s.converged);
        let summary = match &second {
            Some(s) => format!("{name}: lambda1 = {:.12e}, lambda2 = {:.12e}", first.lambda, s.lambda),
            None => format!("{name}: lambda1 = {:.12e}, no second level", first.lambda),
        };
        let body = to_json(&Out {
            header: run.header(name, prob),
            principal: (&first).into(),
            second: second.as_ref().map(Into::into),
            oracle: dense,
            notes,
        });
        run.write(run.file("spectrum", name, "json"), &body)?;
        run.write(run.file("eigenfunction1", name, "csv"), &field_csv(prob.grid(), &first.u))?;
        if let Some(s) = &second {
            run.write(run.file("eigenfunction2", name, "csv"), &field_csv(prob.grid(), &s.u))?;
        }
        run.outcome.failed |= failed;
        run.line(summary);
    }
    Ok(run.outcome)
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    case: &'a str,
    tags: Vec<&'static str>,
    #[serde(flatten)]
    report: &'a PropertyReport,
}

/// `report.json`: one entry per case and check.
pub fn verify(cfg: &LoadedConfig, out: &Path) -> CliResult<Outcome> {
    let problems = cfg.problems(&kernel(cfg)?)?;
    let mut run = Run::new(cfg, out)?;
    let mut runs = Vec::new();
    for (name, prob) in &problems {
        let suite = run_all(prob, &cfg.config.solver)?;
        runs.push((name.as_str(), tags(prob), suite.reports));
    }
    let mut entries = Vec::new();
    for (name, tags, reports) in &runs {
        for r in reports {
            run.outcome.failed |= r.verdict == Verdict::Fail;
            run.outcome.lines.push(format!("{name}: {}", summary(r)));
            entries.push(ReportEntry { case: name, tags: tags.clone(), report: r });
        }
    }
    let body = to_json(&entries);
    let path = run.out.join("report.json");
    run.write(path, &body)?;
    Ok(run.outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub case: String,
    pub method: &'static str,
    pub level: u8,
    pub oracle_lambda: f64,
    pub solver_lambda: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub agreement: bool,
}

/// `oracle.json`: solver against the dense pencil (p = 2) or the brute-force
/// search (at most `BRUTE_FORCE_MAX_NODES` nodes).
pub fn oracle(cfg: &LoadedConfig, out: &Path) -> CliResult<Outcome> {
    let (p, n) = (cfg.config.p, cfg.grid.len());
    if p != 2.0 && n > BRUTE_FORCE_MAX_NODES {
        return Err(CliError::Validation(format!(
            "{}: no oracle applies: the dense pencil needs p = 2 (got p = {p}) and the brute-force search needs at most {BRUTE_FORCE_MAX_NODES} nodes (got {n})",
            cfg.path.display()
        )));
    }
    let problems = cfg.problems(&kernel(cfg)?)?;
    let mut run = Run::new(cfg, out)?;
    let solver = &cfg.config.solver;
    let mut rows = Vec::new();
    for (name, prob) in &problems {
        let first = solve_principal(prob, solver)?;
        let mut push = |level: u8, method: &'static str, oracle: f64, solved: f64, tolerance: f64| {
            let e = rel(solved, oracle);
            rows.push(OracleRow {
                case: name.clone(),
                method,
                level,
                oracle_lambda: oracle,
                solver_lambda: solved,
                rel_error: e,
                tolerance,
                agreement: e <= tolerance,
            });
        };
        if p == 2.0 {
            let dense = smallest_eigenpairs(&assemble_p2(prob)?, 2.min(n))?;
            push(1, "dense", dense[0].0, first.lambda, DENSE_TOL_FIRST);
            if n >= 2 {
                let second = solve_second(prob, &first, solver)?;
                push(2, "dense", dense[1].0, second.lambda, DENSE_TOL_SECOND);
            }
        } else {
            let brute = brute_force_quotient_min(prob, BRUTE_RESTARTS, BRUTE_BUDGET, solver.seed)?;
            push(1, "brute-force", brute.value, first.lambda, BRUTE_TOL);
        }
    }
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    for r in &rows {
        run.outcome.failed |= !r.agreement;
        run.outcome.lines.push(format!(
            "{} level {} ({}): oracle {:.12e}, solver {:.12e}, rel. error {:.3e}",
            r.case, r.level, r.method, r.oracle_lambda, r.solver_lambda, r.rel_error
        ));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        rows: &'a [OracleRow],
        max_rel_error: f64,
    }
    let body = to_json(&Out { rows: &rows, max_rel_error });
    let path = run.out.join("oracle.json");
    run.write(path, &body)?;
    Ok(run.outcome)
}

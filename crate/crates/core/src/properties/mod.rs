//! Numerical checks of qualitative properties of computed eigenpairs and of
//! the inequalities behind them.
//!
//! Every check returns a [`PropertyReport`]: named measurements, a verdict
//! and free-form notes. Failures of the underlying solves are reported as
//! failing checks, never as panics.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::energy::Problem;
use crate::mesh::{Digest, Field};
use crate::solver::{solve_principal_restarts, solve_second, EigenPair, SolverConfig};
use crate::presets::Preset;
use crate::Result;

mod inequalities;
mod nodal;
mod regularity;

pub use inequalities::{check_comparison_integrals, check_convexity_path, ComparisonIntegrals, DEFAULT_T_GRID};
pub use nodal::{check_nodal_inequalities, check_positivity, check_sign_change, check_simplicity, check_simplicity_of};
pub use regularity::{check_log_energy, check_moser_decay, moser_exponents, DEFAULT_DELTAS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    /// Hex FNV-1a digest of the problem data and fields the check looked at.
    pub inputs_digest: String,
    pub measured: Vec<Measurement>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub(crate) fn new(name: &str, digest: u64) -> Self {
        Self {
            name: name.into(),
            inputs_digest: format!("{digest:016x}"),
            measured: Vec::new(),
            verdict: Verdict::Pass,
            notes: Vec::new(),
        }
    }

    pub(crate) fn measure(&mut self, name: &str, value: f64) -> &mut Self {
        self.measured.push(Measurement { name: name.into(), value });
        self
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub(crate) fn fail(&mut self, why: impl Into<String>) -> &mut Self {
        self.verdict = Verdict::Fail;
        self.note(why)
    }

    pub(crate) fn not_applicable(&mut self, why: impl Into<String>) -> &mut Self {
        self.verdict = Verdict::NotApplicable;
        self.note(why)
    }

    /// First measurement called `name`.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.measured.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    fn errored(name: &str, digest: u64, err: &crate::Error) -> Self {
        let mut r = Self::new(name, digest);
        r.fail(format!("could not run: {err}"));
        r
    }
}

/// Digest of everything that defines a problem.
pub(crate) fn problem_digest(prob: &Problem) -> Digest {
    let mut d = Digest::new();
    d.write_u64(prob.grid().digest());
    d.write_f64(prob.s());
    d.write_f64(prob.p());
    d.write_slice(prob.potential());
    d.write_slice(prob.weight());
    d.write_bytes(match prob.mode() {
        crate::OperatorMode::Mixed => b"mixed",
        crate::OperatorMode::LocalOnly => b"local",
        crate::OperatorMode::NonlocalOnly => b"nonlocal",
    });
    d
}

pub(crate) fn digest_with(prob: &Problem, fields: &[&[f64]]) -> u64 {
    let mut d = problem_digest(prob);
    for f in fields {
        d.write_slice(f);
    }
    d.finish()
}

/// Everything [`run_all`] computed, for callers that also want the pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub principal: Option<EigenPair>,
    pub second: Option<EigenPair>,
    pub reports: Vec<PropertyReport>,
}

/// Solves for λ₁ (all restarts) and λ₂, then runs every check in a fixed
/// order. A failed solve turns the checks that need it into failing reports;
/// the rest still run.
pub fn run_all(prob: &Problem, cfg: &SolverConfig) -> Result<SuiteRun> {
    cfg.validate()?;
    let digest = problem_digest(prob).finish();
    let mut reports = Vec::new();
    let restarts = solve_principal_restarts(prob, cfg)?;
    let principal = restarts
        .iter()
        .cloned()
        .reduce(|a, b| if b.lambda < a.lambda { b } else { a });
    let principal = principal.expect("validated config has at least one restart");

    reports.push(check_positivity(&principal, prob));
    reports.push(check_simplicity_of(prob, &restarts, cfg));

    let second = match solve_second(prob, &principal, cfg) {
        Ok(pair) => Some(pair),
        Err(e) => {
            for name in ["sign_change", "nodal_inequalities"] {
                reports.push(PropertyReport::errored(name, digest, &e));
            }
            None
        }
    };
    if let Some(second) = &second {
        reports.push(check_sign_change(second, principal.lambda, prob));
        reports.push(check_nodal_inequalities(second, prob, cfg));
    }

    reports.push(check_moser_decay(&principal, prob));
    reports.push(check_log_energy(&principal, prob, None, None, &DEFAULT_DELTAS));

    // A second positive normalized field for the convexity path: the bump
    // profile, which vanishes only outside the box.
    let bump = prob.normalize(&Preset::Bump.sample(prob.grid()))?;
    reports.push(check_convexity_path(&principal.u, &bump, prob, &DEFAULT_T_GRID));

    let other = match &second {
        Some(pair) => pair.u.clone(),
        None => Field::from(principal.u.iter().map(|x| 0.5 * x).collect::<Vec<_>>()),
    };
    reports.push(check_comparison_integrals(&principal.u, &other, prob).report);

    Ok(SuiteRun { principal: Some(principal), second, reports })
}

/// One-line summary of a report, e.g. for logs.
pub fn summary(report: &PropertyReport) -> String {
    let verdict = match report.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::NotApplicable => "n/a",
    };
    let mut line = format!("{:<22} {verdict}", report.name);
    for m in &report.measured {
        line.push_str(&format!("  {}={:.6e}", m.name, m.value));
    }
    if !report.notes.is_empty() {
        line.push_str("  [");
        line.push_str(&report.notes.join("; "));
        line.push(']');
    }
    line.to_string()
}

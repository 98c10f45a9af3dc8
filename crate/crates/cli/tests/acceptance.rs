//! Acceptance gate: eight criteria, one PASS/FAIL line each. Exits nonzero
//! if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mixeig::commands;
use mixeig::LoadedConfig;
use mixeig_core::oracle::{assemble_p2, brute_force_quotient_min, smallest_eigenpairs};
use mixeig_core::properties::{check_comparison_integrals, check_convexity_path, DEFAULT_T_GRID};
use mixeig_core::solver::{solve_principal, solve_second};
use mixeig_core::{Field, Grid, OperatorMode, Problem, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Verdict = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() <= limit_s as f64, || format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn plain(grid: Grid, s: f64, p: f64, mode: OperatorMode) -> Problem {
    let n = grid.len();
    Problem::new(grid, s, p, Field::zeros(n), Field::constant(n, 1.0), mode).unwrap()
}

fn linear_oracle() -> Verdict {
    let start = Instant::now();
    // the 16-node line stalls at 1.3e-10 in double precision
    let cfg = SolverConfig { tol_residual: 2e-10, restarts: 1, ..SolverConfig::default() };
    let grids = [
        Grid::unit_interval(16).unwrap(),
        Grid::unit_interval(32).unwrap(),
        Grid::unit_interval(64).unwrap(),
        Grid::unit_square(16).unwrap(),
    ];
    let (mut worst1, mut worst2, mut worst_res) = (0.0f64, 0.0f64, 0.0f64);
    for grid in grids {
        let n = grid.len();
        let prob = plain(grid, 0.5, 2.0, OperatorMode::Mixed);
        let sys = assemble_p2(&prob).map_err(|e| e.to_string())?;
        let dense = smallest_eigenpairs(&sys, 2).map_err(|e| e.to_string())?;
        let first = solve_principal(&prob, &cfg).map_err(|e| e.to_string())?;
        let second = solve_second(&prob, &first, &cfg).map_err(|e| e.to_string())?;
        let e1 = (first.lambda - dense[0].0).abs() / dense[0].0;
        let e2 = (second.lambda - dense[1].0).abs() / dense[1].0;
        let res = sys.residual(first.lambda, &first.u);
        ensure(e1 <= 1e-6, || format!("n={n}: lambda1 rel. error {e1:.3e}"))?;
        ensure(e2 <= 1e-3, || format!("n={n}: lambda2 rel. error {e2:.3e}"))?;
        ensure(res < 1e-8, || format!("n={n}: dense residual {res:.3e}"))?;
        worst1 = worst1.max(e1);
        worst2 = worst2.max(e2);
        worst_res = worst_res.max(res);
    }
    within(start.elapsed(), 60)?;
    Ok(format!("max rel. error lambda1 {worst1:.2e}, lambda2 {worst2:.2e}, dense residual {worst_res:.2e}"))
}

fn analytic_anchor() -> Verdict {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let cfg = SolverConfig { tol_residual: 1e-8, restarts: 1, ..SolverConfig::default() };
    let mut errors = Vec::new();
    for n in [64, 128, 256] {
        let prob = plain(Grid::unit_interval(n).unwrap(), 0.5, 2.0, OperatorMode::LocalOnly);
        let pair = solve_principal(&prob, &cfg).map_err(|e| e.to_string())?;
        ensure(pair.converged, || format!("n={n} not converged (residual {:.3e})", pair.residual))?;
        errors.push((pair.lambda - pi2).abs());
        if n == 256 {
            ensure(errors[2] / pi2 <= 0.01, || format!("n=256: lambda1 = {} is not within 1% of pi^2", pair.lambda))?;
        }
    }
    let orders = [(errors[0] / errors[1]).log2(), (errors[1] / errors[2]).log2()];
    ensure(orders.iter().all(|&o| o >= 1.9), || format!("observed orders {orders:?}"))?;
    Ok(format!("rel. error at n=256 {:.2e}, observed orders {:.3} and {:.3}", errors[2] / pi2, orders[0], orders[1]))
}

fn random_coefficients(rng: &mut ChaCha8Rng, n: usize) -> (Field, Field) {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    (v.into(), g.into())
}

fn brute_force() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = SolverConfig::default();
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in [1.5, 3.0] {
        for grid in [Grid::unit_interval(8).unwrap(), Grid::new(2, &[0.0, 0.0], &[1.0, 1.0], &[2, 4]).unwrap()] {
            for draw in 0..5 {
                let (v, g) = random_coefficients(&mut rng, grid.len());
                let prob = Problem::new(grid.clone(), 0.5, p, v, g, OperatorMode::Mixed).map_err(|e| e.to_string())?;
                let pair = solve_principal(&prob, &cfg).map_err(|e| e.to_string())?;
                let brute = brute_force_quotient_min(&prob, 8, 4_000_000, 11 + draw).map_err(|e| e.to_string())?;
                let e = (pair.lambda - brute.value).abs() / brute.value;
                ensure(e <= 1e-4, || {
                    format!("p={p}, {}D draw {draw}: solver {} vs brute force {} (exhausted {})", grid.dim(), pair.lambda, brute.value, brute.exhausted)
                })?;
                worst = worst.max(e);
                count += 1;
            }
        }
    }
    Ok(format!("{count} draws, max rel. difference {worst:.2e}"))
}

/// Runs the default 2D verify in process; the report feeds criterion 6.
fn theorem_suite(report: &mut Option<Value>) -> Verdict {
    let start = Instant::now();
    let cfg = LoadedConfig::load(&configs().join("default_2d.json")).map_err(|e| e.to_string())?;
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outcome = commands::verify(&cfg, out.path()).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(out.path().join("report.json")).map_err(|e| e.to_string())?;
    let entries: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    *report = Some(entries.clone());
    let entries = entries.as_array().ok_or("report is not an array")?;
    let mut margins = Vec::new();
    for case in &cfg.cases {
        for check in ["positivity", "sign_change", "nodal_inequalities", "simplicity"] {
            let entry = entries
                .iter()
                .find(|e| e["case"] == case.name.as_str() && e["name"] == check)
                .ok_or_else(|| format!("{}: no {check} entry", case.name))?;
            ensure(entry["verdict"] == "pass", || format!("{}: {check} is {} ({})", case.name, entry["verdict"], entry["notes"]))?;
            if check == "nodal_inequalities" {
                let value = |m: &str| {
                    entry["measured"].as_array().and_then(|ms| ms.iter().find(|x| x["name"] == m)).and_then(|x| x["value"].as_f64())
                };
                let (plus, minus) = (value("margin_plus").unwrap_or(f64::NAN), value("margin_minus").unwrap_or(f64::NAN));
                ensure(plus > 0.0 && minus > 0.0, || format!("{}: margins {plus} {minus}", case.name))?;
                margins.push(plus.min(minus));
            }
        }
    }
    ensure(!outcome.failed, || "some other applicable check failed".into())?;
    within(start.elapsed(), 600)?;
    let smallest = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(format!("{} cases, smallest nodal margin {smallest:.4}, {:.1} s", cfg.cases.len(), start.elapsed().as_secs_f64()))
}

fn proof_inequalities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = Grid::unit_square(6).unwrap();
    let n = grid.len();
    let mut worst = f64::NEG_INFINITY;
    for p in [1.5, 2.0, 3.0] {
        let (v, g) = random_coefficients(&mut rng, n);
        let prob = Problem::new(grid.clone(), 0.5, p, v, g, OperatorMode::Mixed).map_err(|e| e.to_string())?;
        for k in 0..1000 {
            let u: Field = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>().into();
            let w: Field = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>().into();
            let out = check_comparison_integrals(&u, &w, &prob);
            ensure(out.report.passed(), || format!("p={p}, pair {k}: {:?}", out.report))?;
            worst = worst.max(out.j1.max(out.j2).max(out.j3) / out.scale);
        }
        for k in 0..100 {
            let positive = |rng: &mut ChaCha8Rng| -> Field { (0..n).map(|_| rng.gen_range(0.01..1.0)).collect::<Vec<f64>>().into() };
            let a = prob.normalize(&positive(&mut rng)).map_err(|e| e.to_string())?;
            let b = prob.normalize(&positive(&mut rng)).map_err(|e| e.to_string())?;
            let r = check_convexity_path(&a, &b, &prob, &DEFAULT_T_GRID);
            ensure(r.passed(), || format!("convexity p={p}, pair {k}: {r:?}"))?;
        }
    }
    Ok(format!("3000 comparison pairs (max J/scale {worst:.2e}), 300 convexity pairs"))
}

fn moser(report: &Option<Value>) -> Verdict {
    let entries = report.as_ref().and_then(|r| r.as_array()).ok_or("no report from the default 2D run")?;
    let mut fits = Vec::new();
    for e in entries.iter().filter(|e| e["name"] == "moser_decay") {
        let value = |m: &str| {
            e["measured"].as_array().and_then(|ms| ms.iter().find(|x| x["name"] == m)).and_then(|x| x["value"].as_f64())
        };
        ensure(e["verdict"] == "pass", || format!("{}: {}", e["case"], e["notes"]))?;
        let t: Vec<f64> = (0..=10).map(|k| value(&format!("t{k}")).unwrap_or(f64::NAN)).collect();
        ensure(t.windows(2).all(|w| w[1] <= w[0]), || format!("{}: sequence increases {t:?}", e["case"]))?;
        ensure(t[10] < 1e-6 * t[0], || format!("{}: t10 = {} vs t0 = {}", e["case"], t[10], t[0]))?;
        let (m, beta) = (value("M").ok_or("M missing")?, value("beta").ok_or("beta missing")?);
        fits.push(format!("{}: M={m:.3}, beta={beta:.3}", e["case"].as_str().unwrap_or("?")));
    }
    ensure(fits.len() == 3, || format!("expected 3 cases, found {}", fits.len()))?;
    Ok(fits.join("; "))
}

/// For p < 2 the energy is only C^{1,1/2} where a pair difference or a node
/// value vanishes; central differences are meaningful only away from there.
fn clear_of_kinks(u: &[f64], phi: &[f64], p: f64, eps: f64) -> bool {
    if p >= 2.0 {
        return true;
    }
    let reach = 100.0 * eps;
    let n = u.len();
    (0..n).all(|i| u[i].abs() >= reach * phi[i].abs())
        && (0..n).all(|i| (0..i).all(|j| (u[i] - u[j]).abs() >= reach * (phi[i] - phi[j]).abs()))
}

fn gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = Grid::unit_square(5).unwrap();
    let n = grid.len();
    let eps = 1e-5;
    let mut worst = 0.0f64;
    let mut redrawn = 0;
    for p in [1.5, 2.0, 3.0] {
        let (v, g) = random_coefficients(&mut rng, n);
        let prob = Problem::new(grid.clone(), 0.5, p, v, g, OperatorMode::Mixed).map_err(|e| e.to_string())?;
        let mut k = 0;
        while k < 100 {
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !clear_of_kinks(&u, &phi, p, eps) {
                redrawn += 1;
                continue;
            }
            k += 1;
            let shifted = |t: f64| Field::from(u.iter().zip(&phi).map(|(a, b)| a + t * b).collect::<Vec<_>>());
            let (up, um) = (prob.breakdown(&shifted(eps)).unwrap(), prob.breakdown(&shifted(-eps)).unwrap());
            let uf = Field::from(u.clone());
            let gn = prob.grad_numerator(&uf).unwrap();
            let gd = prob.grad_denominator(&uf).unwrap();
            for (what, fd, grad) in [
                ("numerator", (up.numerator() - um.numerator()) / (2.0 * eps), &gn),
                ("weight", (up.weight - um.weight) / (2.0 * eps), &gd),
            ] {
                let exact: f64 = grad.iter().zip(&phi).map(|(a, b)| a * b).sum();
                let e = (fd - exact).abs() / exact.abs();
                ensure(e <= 1e-6, || format!("p={p}, pair {k}, {what}: rel. error {e:.3e}"))?;
                worst = worst.max(e);
            }
        }
    }
    Ok(format!("300 pairs, max rel. error {worst:.2e}, {redrawn} draws near a p < 2 kink redrawn"))
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_mixeig");
    let config = configs().join("small_2d.json");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = Command::new(bin)
            .args(["verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out.path())
            .args(["--seed", "7"])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.code() == Some(0), || format!("verify exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)))?;
        reports.push(std::fs::read(out.path().join("report.json")).map_err(|e| e.to_string())?);
    }
    ensure(reports[0] == reports[1], || "report.json differs between runs".into())?;
    Ok(format!("two runs, {} identical bytes", reports[0].len()))
}

fn main() {
    let mut report = None;
    let mut failed = 0;
    let mut record = |id: u8, title: &str, verdict: Verdict, elapsed: Duration| {
        let secs = elapsed.as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {id} PASS  {title} [{secs:.1} s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL  {title} [{secs:.1} s] {why}");
            }
        }
    };
    macro_rules! run {
        ($id:expr, $title:expr, $body:expr) => {{
            let start = Instant::now();
            let verdict = $body;
            record($id, $title, verdict, start.elapsed());
        }};
    }
    run!(1, "linear oracle agreement", linear_oracle());
    run!(2, "analytic anchor", analytic_anchor());
    run!(3, "brute-force agreement", brute_force());
    run!(4, "qualitative suite on the default 2D problem", theorem_suite(&mut report));
    run!(5, "comparison and convexity inequalities", proof_inequalities());
    run!(6, "truncation decay", moser(&report));
    run!(7, "gradient exactness", gradients());
    run!(8, "determinism of verify", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}

//! Executes the bundled fixtures and reports one line per check.

use std::fmt;

use super::{fixtures, parse_config, reverify, to_csv, PointResult, RowCheck, RunReport, RunnerError, Stages, Status};
use crate::numkernel::ComplexMatrix;
use crate::oracle::steady_state_cost;
use crate::Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelftestReport {
    pub checks: Vec<SelftestCheck>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            2
        }
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let n = self.checks.iter().filter(|c| c.pass).count();
        write!(f, "{n}/{} checks passed", self.checks.len())
    }
}

type CheckResult = Result<String, String>;
type Check = (&'static str, fn() -> CheckResult);

fn fixture(text: &str, name: &str) -> Result<super::RunConfig, String> {
    parse_config(text, name).map_err(|e| e.to_string())
}

fn check_example() -> CheckResult {
    let cfg = fixture(fixtures::EXAMPLE, "example.json")?;
    let plant = cfg.plant.plant();
    let m = plant.m.assemble();
    let want_m = ComplexMatrix::from_rows(&[
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.5)],
        vec![Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.0)],
    ])
    .map_err(|e| e.to_string())?;
    let n_err = plant
        .n
        .assemble()
        .max_abs_diff(&ComplexMatrix::identity(2).scale_re(2f64.sqrt()));
    let q = plant.quadratic().map_err(|e| e.to_string())?;
    if m != want_m || n_err > 1e-15 || q.e_full() != ComplexMatrix::identity(2) || (q.gamma, q.delta) != (1.0, 1.0) {
        return Err("example matrices differ from the squeezed-cavity values".into());
    }
    Ok("M, N = sqrt(2) I, E = I, gamma = 1, delta = 1".into())
}

fn check_bad_configs() -> CheckResult {
    let missing = fixtures::EXAMPLE.replace("\"gamma\": 1.0,", "");
    match parse_config(&missing, "missing-gamma") {
        Err(RunnerError::Parse { message, .. }) if message.contains("gamma") => {}
        other => return Err(format!("missing gamma gave {other:?}")),
    }
    let bad_m = r#"[[[0,0],[0,0],[1,0],[2,0]],[[0,0],[0,0],[3,0],[1,0]],[[1,0],[3,0],[0,0],[0,0]],[[2,0],[1,0],[0,0],[0,0]]]"#;
    let text = fixtures::EXAMPLE.replace(
        "\"M\": [[[0.0, 0.0], [0.0, 0.5]], [[0.0, -0.5], [0.0, 0.0]]]",
        &format!("\"M\": {bad_m}"),
    );
    match parse_config(&text, "bad-m") {
        Err(RunnerError::Structure(v)) if !v.is_empty() => Ok(format!("{} structure violation(s) listed", v.len())),
        other => Err(format!("asymmetric X2 gave {other:?}")),
    }
}

fn check_unperturbed() -> CheckResult {
    let cfg = fixture(fixtures::ZERO_UNCERTAINTY, "zero_uncertainty.json")?;
    let plant = cfg.plant.with_param("kappa", 2.0).map_err(|e| e.to_string())?;
    let row = PointResult::evaluate_plant(&cfg, &plant, 2.0, Stages::ALL);
    let bound = row.analysis.bound.ok_or("analysis failed at kappa = 2")?;
    let cost = steady_state_cost(&plant, None, None).map_err(|e| e.to_string())?.cost;
    if (cost - 4.0 / 3.0).abs() > 1e-9 || !(4.0 / 3.0 - 1e-9..=4.0 / 3.0 + 5e-3).contains(&bound) {
        return Err(format!("bound {bound}, steady cost {cost}"));
    }
    Ok(format!("bound {bound:.6}, steady cost {cost:.9}"))
}

fn check_zero_sweep() -> CheckResult {
    let cfg = fixture(fixtures::ZERO_UNCERTAINTY, "zero_uncertainty.json")?;
    let report = super::run_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in &report.points {
        let (Some(b), Some(c)) = (p.analysis.bound, p.oracle_max_cost()) else {
            return Err(format!("no bound or cost at {}", p.param));
        };
        worst = worst.max((b - c).abs() / c);
    }
    if worst > 5e-3 {
        return Err(format!("relative gap {worst:.3e}"));
    }
    Ok(format!("{} points, largest relative gap {worst:.2e}", report.points.len()))
}

fn check_threshold() -> CheckResult {
    let cfg = fixture(fixtures::EXAMPLE, "example.json")?;
    let stages = Stages {
        analysis: true,
        synthesis: false,
        oracle: false,
    };
    for k in [0.3, 0.999] {
        let row = PointResult::evaluate(&cfg, "kappa", k, stages).map_err(|e| e.to_string())?;
        if row.analysis.status != Status::NotNominallyStable {
            return Err(format!("kappa = {k} gave {:?}", row.analysis.status));
        }
    }
    Ok("kappa = 0.3 and 0.999 flagged not nominally stable".into())
}

fn check_controller_dominates() -> CheckResult {
    let mut cfg = fixture(fixtures::KAPPA_SWEEP, "kappa_sweep.json")?;
    cfg.oracle.samples = 20;
    let mut lines = Vec::new();
    for k in [5.5, 6.0] {
        let row = PointResult::evaluate(&cfg, "kappa", k, Stages::ALL).map_err(|e| e.to_string())?;
        let (Some(a), Some(s)) = (row.analysis.bound, row.synthesis.bound) else {
            return Err(format!("kappa = {k}: analysis {:?}, synthesis {:?}", row.analysis.status, row.synthesis.status));
        };
        if s > a + 1e-6 || row.violations() > 0 {
            return Err(format!("kappa = {k}: synthesis {s}, analysis {a}, {} violation(s)", row.violations()));
        }
        lines.push(format!("kappa {k}: {s:.4} <= {a:.4}"));
    }
    Ok(lines.join(", "))
}

fn check_nonquadratic() -> CheckResult {
    let cfg = fixture(fixtures::NONQUADRATIC, "nonquadratic.json")?;
    let row = PointResult::evaluate(&cfg, "kappa", 3.0, Stages::ALL).map_err(|e| e.to_string())?;
    let bound = row.analysis.bound.ok_or_else(|| format!("analysis {:?}", row.analysis.status))?;
    let cost = row.oracle_max_cost().ok_or("no nominal cost")?;
    if row.violations() > 0 || row.analysis.mu.is_none() {
        return Err(format!("bound {bound}, nominal cost {cost}"));
    }
    Ok(format!("bound {bound:.4} >= nominal cost {cost:.4}"))
}

fn check_round_trip() -> CheckResult {
    let mut cfg = fixture(fixtures::NONQUADRATIC, "nonquadratic.json")?;
    cfg.oracle.samples = 5;
    let report = super::run_sweep(&cfg).map_err(|e| e.to_string())?;
    let back = RunReport::from_json(&report.to_json()).map_err(|e| e.to_string())?;
    let checks = reverify(&cfg, &back).map_err(|e| e.to_string())?;
    if !checks.iter().all(RowCheck::pass) {
        return Err(format!("{checks:?}"));
    }
    let n = checks
        .iter()
        .map(|c| c.analysis.is_some() as usize + c.synthesis.is_some() as usize)
        .sum::<usize>();
    let csv = to_csv(&back.points);
    if csv != report.csv() {
        return Err("CSV changed after a JSON round trip".into());
    }
    Ok(format!("{n} stored certificates re-verified"))
}

fn check_determinism() -> CheckResult {
    let mut cfg = fixture(fixtures::KAPPA_SWEEP, "kappa_sweep.json")?;
    cfg.sweep.as_mut().ok_or("no sweep")?.points = 4;
    cfg.oracle.samples = 10;
    let a = super::run_sweep(&cfg).map_err(|e| e.to_string())?.csv();
    let b = super::run_sweep(&cfg).map_err(|e| e.to_string())?.csv();
    if a != b {
        return Err("two identical sweeps produced different CSV".into());
    }
    Ok(format!("{} identical bytes", a.len()))
}

/// Runs every bundled check. Never panics on a failed check.
pub fn run_selftest() -> SelftestReport {
    let table: [Check; 9] = [
        ("example fixture", check_example),
        ("config errors", check_bad_configs),
        ("unperturbed bound", check_unperturbed),
        ("zero-uncertainty sweep", check_zero_sweep),
        ("stability threshold", check_threshold),
        ("controller bound", check_controller_dominates),
        ("non-quadratic channel", check_nonquadratic),
        ("certificate round trip", check_round_trip),
        ("deterministic csv", check_determinism),
    ];
    let mut report = SelftestReport::default();
    for (name, f) in table {
        let (pass, detail) = match f() {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        report.checks.push(SelftestCheck { name, pass, detail });
    }
    for (name, text) in fixtures::ALL {
        let res = parse_config(text, name);
        report.checks.push(SelftestCheck {
            name: "fixture parses",
            pass: res.is_ok(),
            detail: match res {
                Ok(_) => name.to_string(),
                Err(e) => format!("{name}: {e}"),
            },
        });
    }
    report
}

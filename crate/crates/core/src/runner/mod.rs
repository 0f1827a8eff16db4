//! Batch runs driven by a JSON configuration: single analyses and designs,
//! oracle validation, parameter sweeps with CSV/SVG output and a bundled
//! self-test.
//!
//! Every grid point is evaluated by a pure function of the configuration
//! and the parameter value, so results do not depend on evaluation order.

mod config;
mod output;
mod selftest;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    load_config, parse_config, Mode, OracleConfig, OutputPaths, PlantSpec, RunConfig, SolverConfig, SweepRange,
    DEFAULT_RHO, DEFAULT_SAMPLES, DEFAULT_SEED, SWEEP_PARAMS,
};
pub use output::{render_svg, to_csv, SvgOptions, CSV_HEADER};
pub use selftest::{run_selftest, SelftestCheck, SelftestReport};

use crate::analysis::{analyze, recheck_certificate, AnalysisError};
use crate::numkernel::ComplexMatrix;
use crate::oracle::{steady_state_cost, validate_bound, OracleError, VIOLATION_TOL};
use crate::qmodel::{DoubledMatrix, PlantModel, StructureKind, Uncertainty};
use crate::synthesis::{recheck_design, synthesize, SynthesisError};
use crate::Complex64;

/// Bundled configurations.
pub mod fixtures {
    /// The single-mode squeezed cavity at κ = 2 with `E = I`, `γ = 1`, `δ = 1`.
    pub const EXAMPLE: &str = include_str!("../../fixtures/example.json");
    /// Coupling sweep of the same plant over `κ ∈ [0.3, 6]`.
    pub const KAPPA_SWEEP: &str = include_str!("../../fixtures/kappa_sweep.json");
    /// `E = 0`, `δ = 0`: the bound should equal the exact steady cost.
    pub const ZERO_UNCERTAINTY: &str = include_str!("../../fixtures/zero_uncertainty.json");
    /// Scalar non-quadratic channel `Ẽ = [1, 1]`.
    pub const NONQUADRATIC: &str = include_str!("../../fixtures/nonquadratic.json");

    pub const ALL: [(&str, &str); 4] = [
        ("example.json", EXAMPLE),
        ("kappa_sweep.json", KAPPA_SWEEP),
        ("zero_uncertainty.json", ZERO_UNCERTAINTY),
        ("nonquadratic.json", NONQUADRATIC),
    ];
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunnerError {
    #[error("cannot read {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid plant structure:\n  {}", .0.join("\n  "))]
    Structure(Vec<String>),
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Feasible,
    Infeasible,
    NotNominallyStable,
    NumericalFailure,
    PostCheckFailed,
    Skipped,
}

impl Status {
    /// Statuses that make the process exit with code 2.
    pub fn is_failure(self) -> bool {
        matches!(self, Status::NumericalFailure | Status::PostCheckFailed)
    }
}

type Nested = Vec<Vec<[f64; 2]>>;

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn doubled_from(rows: &Nested) -> Result<DoubledMatrix, RunnerError> {
    let m = ComplexMatrix::from_nested(rows).map_err(|e| RunnerError::Config(e.to_string()))?;
    DoubledMatrix::from_full(&m, StructureKind::Hamiltonian).map_err(|e| RunnerError::Config(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub bound: Option<f64>,
    pub tau: Option<f64>,
    pub lambda_tilde: Option<f64>,
    pub mu: Option<[f64; 2]>,
    pub margin: Option<f64>,
    #[serde(rename = "P")]
    pub p: Option<Nested>,
}

impl AnalysisRecord {
    fn empty(status: Status, message: Option<String>) -> Self {
        Self {
            status,
            message,
            bound: None,
            tau: None,
            lambda_tilde: None,
            mu: None,
            margin: None,
            p: None,
        }
    }

    pub fn run(plant: &PlantModel, solver: &SolverConfig) -> Self {
        match analyze(plant, &solver.analysis()) {
            Ok(r) => Self {
                status: Status::Feasible,
                message: None,
                bound: Some(r.bound),
                tau: Some(r.tau),
                lambda_tilde: Some(r.lambda_tilde),
                mu: r.mu.map(pair),
                margin: Some(r.margin),
                p: Some(r.p.assemble().to_nested()),
            },
            Err(e) => {
                let status = match e {
                    AnalysisError::NotNominallyStable { .. } => Status::NotNominallyStable,
                    AnalysisError::Infeasible { .. } => Status::Infeasible,
                    _ => Status::NumericalFailure,
                };
                Self::empty(status, Some(e.to_string()))
            }
        }
    }

    pub fn feasible(&self) -> bool {
        self.status == Status::Feasible
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisRecord {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub xi: Option<f64>,
    pub bound: Option<f64>,
    pub q: Option<f64>,
    pub tau: Option<f64>,
    pub k_norm: Option<f64>,
    pub cl_abscissa: Option<f64>,
    pub mu: Option<[f64; 2]>,
    #[serde(rename = "K")]
    pub k: Option<Nested>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SynthesisRecord {
    fn empty(status: Status, message: Option<String>) -> Self {
        Self {
            status,
            message,
            xi: None,
            bound: None,
            q: None,
            tau: None,
            k_norm: None,
            cl_abscissa: None,
            mu: None,
            k: None,
            warnings: Vec::new(),
        }
    }

    pub fn run(plant: &PlantModel, solver: &SolverConfig) -> Self {
        match synthesize(plant, &solver.synthesis()) {
            Ok(r) => Self {
                status: Status::Feasible,
                message: None,
                xi: Some(r.xi),
                bound: Some(r.bound),
                q: Some(r.q),
                tau: Some(r.tau),
                k_norm: Some(r.k_norm),
                cl_abscissa: Some(r.closed_loop_abscissa),
                mu: r.mu.map(pair),
                k: Some(r.k.assemble().to_nested()),
                warnings: r.warnings,
            },
            Err(e) => {
                let status = match e {
                    SynthesisError::Infeasible { .. } => Status::Infeasible,
                    SynthesisError::PostCheckFailed(_) => Status::PostCheckFailed,
                    _ => Status::NumericalFailure,
                };
                Self::empty(status, Some(e.to_string()))
            }
        }
    }

    pub fn feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    pub fn controller(&self) -> Option<Result<DoubledMatrix, RunnerError>> {
        self.k.as_ref().map(doubled_from)
    }
}

/// Realised costs against one certified bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub bound: f64,
    pub samples: usize,
    pub max_cost: Option<f64>,
    pub violations: usize,
    pub unstable: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl OracleRecord {
    /// Sampled perturbations for the quadratic class; the unperturbed plant
    /// for the non-quadratic class, where the zero perturbation is the only
    /// member the moment oracle can represent.
    pub fn run(plant: &PlantModel, k: Option<&DoubledMatrix>, bound: f64, oracle: &OracleConfig) -> Self {
        let mut rec = Self {
            bound,
            samples: 0,
            max_cost: None,
            violations: 0,
            unstable: 0,
            message: None,
        };
        match &plant.uncertainty {
            Uncertainty::Quadratic(_) => match validate_bound(plant, k, bound, oracle.samples, oracle.seed) {
                Ok(r) => {
                    rec.samples = r.samples;
                    rec.max_cost = finite(r.max_realized_cost);
                    rec.violations = r.violations;
                    rec.unstable = r.unstable_samples;
                }
                Err(e) => rec.message = Some(e.to_string()),
            },
            Uncertainty::NonQuadratic(_) => {
                rec.samples = 1;
                match steady_state_cost(plant, k, None) {
                    Ok(s) => {
                        rec.max_cost = Some(s.cost);
                        if s.cost > bound + VIOLATION_TOL * (1.0 + bound.abs()) {
                            rec.violations = 1;
                        }
                    }
                    Err(OracleError::NotHurwitz { .. }) => {
                        rec.violations = 1;
                        rec.unstable = 1;
                    }
                    Err(e) => rec.message = Some(e.to_string()),
                }
            }
        }
        rec
    }
}

/// Everything computed at one parameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub param: f64,
    pub analysis: AnalysisRecord,
    pub synthesis: SynthesisRecord,
    pub open_loop: Option<OracleRecord>,
    pub closed_loop: Option<OracleRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stages {
    pub analysis: bool,
    pub synthesis: bool,
    pub oracle: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        analysis: true,
        synthesis: true,
        oracle: true,
    };
}

impl PointResult {
    pub fn evaluate(cfg: &RunConfig, param: &str, value: f64, stages: Stages) -> Result<Self, RunnerError> {
        let plant = cfg.plant.with_param(param, value)?;
        Ok(Self::evaluate_plant(cfg, &plant, value, stages))
    }

    pub fn evaluate_plant(cfg: &RunConfig, plant: &PlantModel, value: f64, stages: Stages) -> Self {
        let analysis = if stages.analysis {
            AnalysisRecord::run(plant, &cfg.solver)
        } else {
            AnalysisRecord::empty(Status::Skipped, None)
        };
        let synthesis = if stages.synthesis {
            SynthesisRecord::run(plant, &cfg.solver)
        } else {
            SynthesisRecord::empty(Status::Skipped, None)
        };
        let mut open_loop = None;
        let mut closed_loop = None;
        if stages.oracle {
            if let Some(b) = analysis.bound {
                open_loop = Some(OracleRecord::run(plant, None, b, &cfg.oracle));
            }
            if let (Some(b), Some(Ok(k))) = (synthesis.bound, synthesis.controller()) {
                closed_loop = Some(OracleRecord::run(plant, Some(&k), b, &cfg.oracle));
            }
        }
        Self {
            param: value,
            analysis,
            synthesis,
            open_loop,
            closed_loop,
        }
    }

    pub fn failures(&self) -> usize {
        self.analysis.status.is_failure() as usize + self.synthesis.status.is_failure() as usize
    }

    pub fn violations(&self) -> usize {
        [&self.open_loop, &self.closed_loop]
            .into_iter()
            .flatten()
            .map(|o| o.violations)
            .sum()
    }

    /// Open-loop maximum when the plant is certified without a controller,
    /// otherwise the closed-loop maximum.
    pub fn oracle_max_cost(&self) -> Option<f64> {
        self.open_loop
            .as_ref()
            .or(self.closed_loop.as_ref())
            .and_then(|o| o.max_cost)
    }
}

/// Run metadata written alongside results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub mode: Mode,
    pub param: String,
    #[serde(rename = "R")]
    pub r: Nested,
    pub r_default: bool,
    pub rho: f64,
    pub rho_default: bool,
    pub samples: usize,
    pub seed: u64,
}

impl Metadata {
    pub fn new(cfg: &RunConfig, mode: Mode) -> Self {
        Self {
            name: cfg.name.clone(),
            mode,
            param: cfg.base_param().0,
            r: cfg.plant.r.assemble().to_nested(),
            r_default: cfg.plant.r_default,
            rho: cfg.plant.rho,
            rho_default: cfg.plant.rho_default,
            samples: cfg.oracle.samples,
            seed: cfg.oracle.seed,
        }
    }

    /// One-line summary of the cost weights, flagged when defaulted.
    pub fn weights_note(&self) -> String {
        let r = if self.r_default { "R = I (default)".to_string() } else { "R from config".to_string() };
        let rho = if self.rho_default {
            format!("rho = {} (default)", self.rho)
        } else {
            format!("rho = {}", self.rho)
        };
        format!("{r}, {rho}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub metadata: Metadata,
    pub points: Vec<PointResult>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.points.iter().map(PointResult::failures).sum()
    }

    pub fn violations(&self) -> usize {
        self.points.iter().map(PointResult::violations).sum()
    }

    /// 0 when every point succeeded or reported infeasibility cleanly, 2 on
    /// numerical failures, failed post-checks or bound violations.
    pub fn exit_code(&self) -> i32 {
        if self.failures() > 0 || self.violations() > 0 {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Parse {
            origin: "results".into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn csv(&self) -> String {
        to_csv(&self.points)
    }

    pub fn svg(&self, log_y: bool) -> String {
        render_svg(
            &self.points,
            &SvgOptions {
                title: self.metadata.name.clone(),
                x_label: self.metadata.param.clone(),
                note: self.metadata.weights_note(),
                log_y,
            },
        )
    }
}

fn single(cfg: &RunConfig, mode: Mode, stages: Stages) -> RunReport {
    let (param, value) = cfg.base_param();
    let point = PointResult::evaluate_plant(cfg, &cfg.plant.plant(), value, stages);
    let mut metadata = Metadata::new(cfg, mode);
    metadata.param = param;
    RunReport {
        metadata,
        points: vec![point],
    }
}

pub fn run_analyze(cfg: &RunConfig) -> RunReport {
    single(
        cfg,
        Mode::Analyze,
        Stages {
            analysis: true,
            synthesis: false,
            oracle: false,
        },
    )
}

pub fn run_synthesize(cfg: &RunConfig) -> RunReport {
    single(
        cfg,
        Mode::Synthesize,
        Stages {
            analysis: false,
            synthesis: true,
            oracle: false,
        },
    )
}

/// Analysis and design at the configured plant, each checked against the
/// sampling oracle.
pub fn run_validate(cfg: &RunConfig) -> RunReport {
    single(cfg, Mode::Validate, Stages::ALL)
}

/// Evaluates every grid point. Per-point failures are recorded in the rows.
pub fn run_sweep(cfg: &RunConfig) -> Result<RunReport, RunnerError> {
    let range = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| RunnerError::Config("configuration has no \"sweep\" section".into()))?;
    let points = range
        .grid()
        .into_iter()
        .map(|v| PointResult::evaluate(cfg, &range.param, v, Stages::ALL))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunReport {
        metadata: Metadata::new(cfg, Mode::Sweep),
        points,
    })
}

/// Outcome of re-evaluating stored certificates.
#[derive(Clone, Debug, PartialEq)]
pub struct RowCheck {
    pub param: f64,
    /// `None` when the row holds no certificate of that kind.
    pub analysis: Option<Result<(), String>>,
    pub synthesis: Option<Result<(), String>>,
}

impl RowCheck {
    pub fn pass(&self) -> bool {
        [&self.analysis, &self.synthesis]
            .into_iter()
            .flatten()
            .all(Result::is_ok)
    }
}

/// Rebuilds each row's plant from `cfg`, reads `P`, `K`, `τ` back from the
/// report and re-checks the certificate and design programs at them. The
/// stored bounds must also agree with the recomputed objectives.
pub fn reverify(cfg: &RunConfig, report: &RunReport) -> Result<Vec<RowCheck>, RunnerError> {
    let param = report.metadata.param.clone();
    let aopts = cfg.solver.analysis();
    let sopts = cfg.solver.synthesis();
    let mut out = Vec::with_capacity(report.points.len());
    for row in &report.points {
        let plant = cfg.plant.with_param(&param, row.param)?;
        let a = &row.analysis;
        let analysis = match (&a.p, a.tau, a.bound) {
            (Some(p), Some(tau), Some(bound)) => {
                let p = doubled_from(p)?;
                Some(match recheck_certificate(&plant, &p, tau, &aopts) {
                    Ok(rep) => {
                        let extra = match &plant.uncertainty {
                            Uncertainty::NonQuadratic(nq) => nq.delta2,
                            Uncertainty::Quadratic(_) => 0.0,
                        };
                        let drift = (rep.objective + extra - bound).abs();
                        if !rep.pass {
                            Err(format!("certificate margin {:.3e}", rep.max_margin))
                        } else if drift > 1e-8 * (1.0 + bound.abs()) {
                            Err(format!("stored bound {bound} differs from recomputed {}", rep.objective + extra))
                        } else {
                            Ok(())
                        }
                    }
                    Err(e) => Err(e.to_string()),
                })
            }
            _ => None,
        };
        let s = &row.synthesis;
        let synthesis = match (s.controller(), s.q, s.tau, s.xi) {
            (Some(k), Some(q), Some(tau), Some(xi)) => Some(match recheck_design(&plant, &k?, q, tau, xi, &sopts) {
                Ok(rep) if rep.pass => Ok(()),
                Ok(rep) => Err(format!("design margin {:.3e}", rep.max_margin)),
                Err(e) => Err(e.to_string()),
            }),
            _ => None,
        };
        out.push(RowCheck {
            param: row.param,
            analysis,
            synthesis,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_cfg() -> RunConfig {
        parse_config(fixtures::ZERO_UNCERTAINTY, "zero").unwrap()
    }

    #[test]
    fn sub_threshold_rows_are_flagged() {
        let cfg = parse_config(fixtures::EXAMPLE, "example").unwrap();
        let stages = Stages {
            analysis: true,
            synthesis: false,
            oracle: false,
        };
        let row = PointResult::evaluate(&cfg, "kappa", 0.5, stages).unwrap();
        assert_eq!(row.analysis.status, Status::NotNominallyStable);
        assert_eq!(row.failures(), 0);
    }

    #[test]
    fn unperturbed_bound_is_tight() {
        let cfg = zero_cfg();
        let row = PointResult::evaluate(&cfg, "kappa", 2.0, Stages::ALL).unwrap();
        let bound = row.analysis.bound.unwrap();
        let cost = row.oracle_max_cost().unwrap();
        assert!((cost - 4.0 / 3.0).abs() < 1e-9, "{cost}");
        assert!(bound >= cost && bound <= cost * 1.005, "{bound} vs {cost}");
        assert_eq!(row.violations(), 0);
    }

    #[test]
    fn report_round_trips_and_reverifies() {
        let cfg = zero_cfg();
        let report = single(&cfg, Mode::Validate, Stages::ALL);
        let back = RunReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back, report);
        let checks = reverify(&cfg, &back).unwrap();
        assert!(checks.iter().all(RowCheck::pass), "{checks:?}");
        assert!(checks[0].analysis.is_some() && checks[0].synthesis.is_some());
    }

    #[test]
    fn tampered_certificate_is_caught() {
        let cfg = zero_cfg();
        let mut report = run_analyze(&cfg);
        let p = report.points[0].analysis.p.as_mut().unwrap();
        p[0][0][0] *= 0.5;
        p[1][1][0] *= 0.5;
        let checks = reverify(&cfg, &report).unwrap();
        assert!(!checks[0].pass());
    }

    #[test]
    fn missing_sweep_section_is_a_config_error() {
        let cfg = parse_config(fixtures::EXAMPLE, "example").unwrap();
        assert!(matches!(run_sweep(&cfg), Err(RunnerError::Config(_))));
    }
}

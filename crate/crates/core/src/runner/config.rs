//! JSON run configuration.
//!
//! Complex entries are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. `M`, `N_base`, `E` and `R` are full doubled-up matrices;
//! the coupling used in every run is `N = √κ · N_base`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::analysis::AnalysisOptions;
use crate::numkernel::ComplexMatrix;
use crate::qmodel::{
    validate_structure, CostWeights, CouplingMatrix, DoubledMatrix, NonQuadraticUncertainty, PlantModel,
    QuadraticUncertainty, StructureKind, Uncertainty,
};
use crate::sdp::SdpOptions;
use crate::synthesis::SynthesisOptions;
use crate::Complex64;

pub const DEFAULT_RHO: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 1;

type Nested = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analyze,
    Synthesize,
    Sweep,
    Validate,
    Selftest,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Analyze => "analyze",
            Mode::Synthesize => "synthesize",
            Mode::Sweep => "sweep",
            Mode::Validate => "validate",
            Mode::Selftest => "selftest",
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    #[serde(rename = "M")]
    m: Nested,
    #[serde(rename = "N_base")]
    n_base: Nested,
    #[serde(default = "one")]
    kappa: f64,
    #[serde(rename = "R", default)]
    r: Option<Nested>,
    #[serde(default)]
    rho: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawUncertainty {
    Quadratic {
        #[serde(rename = "E")]
        e: Nested,
        gamma: f64,
        delta: f64,
    },
    Nonquadratic {
        #[serde(rename = "E1")]
        e1: Vec<[f64; 2]>,
        #[serde(rename = "E2")]
        e2: Vec<[f64; 2]>,
        gamma: f64,
        delta1: f64,
        delta2: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepRange {
    /// Evenly spaced grid, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eps_margin: f64,
    pub scalar_min: f64,
    pub scalar_max: f64,
    pub max_iterations: usize,
    pub gap_tol: f64,
    pub feasibility_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let a = AnalysisOptions::default();
        Self {
            eps_margin: a.eps_margin,
            scalar_min: a.eps_q,
            scalar_max: a.u_max,
            max_iterations: a.sdp.max_iterations,
            gap_tol: a.sdp.gap_tol,
            feasibility_tol: a.sdp.feasibility_tol,
        }
    }
}

impl SolverConfig {
    fn sdp(&self) -> SdpOptions {
        SdpOptions {
            max_iterations: self.max_iterations,
            gap_tol: self.gap_tol,
            feasibility_tol: self.feasibility_tol,
            ..SdpOptions::default()
        }
    }

    pub fn analysis(&self) -> AnalysisOptions {
        AnalysisOptions {
            eps_margin: self.eps_margin,
            eps_q: self.scalar_min,
            u_max: self.scalar_max,
            sdp: self.sdp(),
        }
    }

    pub fn synthesis(&self) -> SynthesisOptions {
        SynthesisOptions {
            eps_margin: self.eps_margin,
            eps_q: self.scalar_min,
            scalar_max: self.scalar_max,
            sdp: self.sdp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    /// Full results including certificates.
    pub json: Option<PathBuf>,
    pub log_y: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    mode: Option<Mode>,
    plant: RawPlant,
    uncertainty: RawUncertainty,
    #[serde(default)]
    sweep: Option<SweepRange>,
    #[serde(default)]
    solver: SolverConfig,
    #[serde(default)]
    oracle: OracleConfig,
    #[serde(default)]
    outputs: OutputPaths,
}

/// Validated plant description; the sweep parameter is applied on top.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantSpec {
    pub m: DoubledMatrix,
    pub n_base: CouplingMatrix,
    pub kappa: f64,
    pub r: DoubledMatrix,
    pub rho: f64,
    /// Whether `R` and `ρ` came from defaults rather than the file.
    pub r_default: bool,
    pub rho_default: bool,
    pub uncertainty: Uncertainty,
}

/// Scalar plant fields a sweep may vary.
pub const SWEEP_PARAMS: [&str; 6] = ["kappa", "rho", "gamma", "delta", "delta1", "delta2"];

impl PlantSpec {
    pub fn plant(&self) -> PlantModel {
        PlantModel {
            m: self.m.clone(),
            n: self.n_base.scale(self.kappa.sqrt()),
            uncertainty: self.uncertainty.clone(),
            weights: CostWeights {
                r: self.r.clone(),
                rho: self.rho,
            },
        }
    }

    /// The plant with one scalar field replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<PlantModel, RunnerError> {
        let mut spec = self.clone();
        let bad = |what: &str| RunnerError::Config(format!("{name} = {value} is invalid: {what}"));
        if !value.is_finite() {
            return Err(bad("not finite"));
        }
        match (name, &mut spec.uncertainty) {
            ("kappa", _) if value > 0.0 => spec.kappa = value,
            ("rho", _) if value > 0.0 => spec.rho = value,
            ("gamma", Uncertainty::Quadratic(q)) if value > 0.0 => q.gamma = value,
            ("gamma", Uncertainty::NonQuadratic(q)) if value > 0.0 => q.gamma = value,
            ("delta", Uncertainty::Quadratic(q)) if value >= 0.0 => q.delta = value,
            ("delta1", Uncertainty::NonQuadratic(q)) if value >= 0.0 => q.delta1 = value,
            ("delta2", Uncertainty::NonQuadratic(q)) if value >= 0.0 => q.delta2 = value,
            ("kappa" | "rho" | "gamma", _) => return Err(bad("must be > 0")),
            ("delta", Uncertainty::Quadratic(_)) | ("delta1" | "delta2", Uncertainty::NonQuadratic(_)) => {
                return Err(bad("must be >= 0"))
            }
            (p, _) if SWEEP_PARAMS.contains(&p) => {
                return Err(bad("field does not exist for this uncertainty kind"))
            }
            _ => {
                return Err(RunnerError::Config(format!(
                    "unknown sweep parameter {name:?}; expected one of {}",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        Ok(spec.plant())
    }

    pub fn param_value(&self, name: &str) -> Option<f64> {
        match (name, &self.uncertainty) {
            ("kappa", _) => Some(self.kappa),
            ("rho", _) => Some(self.rho),
            ("gamma", Uncertainty::Quadratic(q)) => Some(q.gamma),
            ("gamma", Uncertainty::NonQuadratic(q)) => Some(q.gamma),
            ("delta", Uncertainty::Quadratic(q)) => Some(q.delta),
            ("delta1", Uncertainty::NonQuadratic(q)) => Some(q.delta1),
            ("delta2", Uncertainty::NonQuadratic(q)) => Some(q.delta2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// File the configuration was read from, if any.
    pub source: Option<PathBuf>,
    pub name: String,
    pub mode: Mode,
    pub plant: PlantSpec,
    pub sweep: Option<SweepRange>,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
    pub outputs: OutputPaths,
}

impl RunConfig {
    /// Value of the swept parameter (κ when no sweep is configured) at the
    /// base plant.
    pub fn base_param(&self) -> (String, f64) {
        let name = self.sweep.as_ref().map_or("kappa", |s| s.param.as_str());
        (name.to_string(), self.plant.param_value(name).unwrap_or(self.plant.kappa))
    }
}

fn complex_matrix(field: &str, rows: &Nested, errs: &mut Vec<String>) -> Option<ComplexMatrix> {
    match ComplexMatrix::from_nested(rows) {
        Ok(m) => Some(m),
        Err(e) => {
            errs.push(format!("{field}: {e}"));
            None
        }
    }
}

fn structured(field: &str, x: &ComplexMatrix, kind: StructureKind, errs: &mut Vec<String>) -> bool {
    let v = validate_structure(x, kind);
    errs.extend(v.iter().map(|v| format!("{field}: {v}")));
    v.is_empty()
}

fn check_scalar(field: &str, v: f64, strict: bool, errs: &mut Vec<String>) {
    let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
    if !ok {
        let want = if strict { "> 0" } else { ">= 0" };
        errs.push(format!("{field}: must be {want}, got {v}"));
    }
}

fn complex_vec(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

fn build(raw: RawConfig, source: Option<PathBuf>) -> Result<RunConfig, RunnerError> {
    let mut errs = Vec::new();
    let p = &raw.plant;

    let m = complex_matrix("M", &p.m, &mut errs)
        .filter(|m| structured("M", m, StructureKind::Hamiltonian, &mut errs));
    let n_base = complex_matrix("N_base", &p.n_base, &mut errs)
        .filter(|n| structured("N_base", n, StructureKind::Coupling, &mut errs));
    let r = match &p.r {
        Some(r) => complex_matrix("R", r, &mut errs).filter(|r| structured("R", r, StructureKind::Hamiltonian, &mut errs)),
        None => m.as_ref().map(|m| ComplexMatrix::identity(m.rows())),
    };
    check_scalar("kappa", p.kappa, true, &mut errs);
    let rho = p.rho.unwrap_or(DEFAULT_RHO);
    check_scalar("rho", rho, true, &mut errs);

    let uncertainty = match &raw.uncertainty {
        RawUncertainty::Quadratic { e, gamma, delta } => {
            check_scalar("uncertainty.gamma", *gamma, true, &mut errs);
            check_scalar("uncertainty.delta", *delta, false, &mut errs);
            complex_matrix("E", e, &mut errs)
                .filter(|e| structured("E", e, StructureKind::Coupling, &mut errs))
                .and_then(|e| CouplingMatrix::from_full(&e).map_err(|x| errs.push(format!("E: {x}"))).ok())
                .map(|e| Uncertainty::Quadratic(QuadraticUncertainty { e, gamma: *gamma, delta: *delta }))
        }
        RawUncertainty::Nonquadratic {
            e1,
            e2,
            gamma,
            delta1,
            delta2,
        } => NonQuadraticUncertainty::new(complex_vec(e1), complex_vec(e2), *gamma, *delta1, *delta2)
            .map_err(|e| errs.push(format!("uncertainty: {e}")))
            .ok()
            .map(Uncertainty::NonQuadratic),
    };

    if let Some(s) = &raw.sweep {
        if !(s.start.is_finite() && s.stop.is_finite() && s.stop > s.start) {
            errs.push(format!("sweep: range [{}, {}] must have positive length", s.start, s.stop));
        }
        if s.points < 2 {
            errs.push(format!("sweep: need at least 2 points, got {}", s.points));
        }
    }
    if raw.oracle.samples == 0 {
        errs.push("oracle.samples: must be >= 1".into());
    }
    let sv = &raw.solver;
    if !(sv.eps_margin >= 0.0 && sv.scalar_min > 0.0 && sv.scalar_max > sv.scalar_min && sv.max_iterations > 0) {
        errs.push("solver: need eps_margin >= 0, 0 < scalar_min < scalar_max, max_iterations > 0".into());
    }

    let (Some(m), Some(n_base), Some(r), Some(uncertainty)) = (m, n_base, r, uncertainty) else {
        return Err(RunnerError::Structure(errs));
    };
    let m = DoubledMatrix::from_full(&m, StructureKind::Hamiltonian).map_err(|e| RunnerError::Structure(vec![format!("M: {e}")]))?;
    let n_base = CouplingMatrix::from_full(&n_base).map_err(|e| RunnerError::Structure(vec![format!("N_base: {e}")]))?;
    let r_full = r;
    let r = DoubledMatrix::from_full(&r_full, StructureKind::Hamiltonian)
        .map_err(|e| RunnerError::Structure(vec![format!("R: {e}")]))?;
    if let Err(e) = CostWeights::new(r.clone(), rho.max(f64::MIN_POSITIVE)) {
        errs.push(format!("R: {e}"));
    }
    let spec = PlantSpec {
        m,
        n_base,
        kappa: p.kappa,
        r,
        rho,
        r_default: p.r.is_none(),
        rho_default: p.rho.is_none(),
        uncertainty,
    };
    if errs.is_empty() {
        if let Err(e) = PlantModel::new(spec.m.clone(), spec.n_base.clone(), spec.uncertainty.clone(), CostWeights {
            r: spec.r.clone(),
            rho: spec.rho,
        }) {
            errs.push(e.to_string());
        }
    }
    if let Some(s) = &raw.sweep {
        if errs.is_empty() {
            for v in [s.start, s.stop] {
                if let Err(e) = spec.with_param(&s.param, v) {
                    errs.push(format!("sweep: {e}"));
                }
            }
        }
    }
    if !errs.is_empty() {
        return Err(RunnerError::Structure(errs));
    }
    Ok(RunConfig {
        source,
        name: raw.name.unwrap_or_else(|| "unnamed".into()),
        mode: raw.mode.unwrap_or(if raw.sweep.is_some() { Mode::Sweep } else { Mode::Analyze }),
        plant: spec,
        sweep: raw.sweep,
        solver: raw.solver,
        oracle: raw.oracle,
        outputs: raw.outputs,
    })
}

/// Parses configuration text. `origin` only labels error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<RunConfig, RunnerError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| RunnerError::Parse {
        origin: origin.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(raw, None)
}

/// Reads and validates a configuration file. Relative output paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<(RunConfig, PlantModel), RunnerError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text, &path.display().to_string())?;
    cfg.source = Some(path.to_path_buf());
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.outputs.csv, &mut cfg.outputs.svg, &mut cfg.outputs.json]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    let plant = cfg.plant.plant();
    Ok((cfg, plant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::fixtures;

    #[test]
    fn example_fixture_matches_hand_values() {
        let cfg = parse_config(fixtures::EXAMPLE, "example.json").unwrap();
        let plant = cfg.plant.plant();
        let m = plant.m.assemble();
        assert_eq!(m[(0, 1)], Complex64::new(0.0, 0.5));
        assert_eq!(m[(1, 0)], Complex64::new(0.0, -0.5));
        assert_eq!(m[(0, 0)], Complex64::new(0.0, 0.0));
        let n = plant.n.assemble();
        assert!(n.max_abs_diff(&ComplexMatrix::identity(2).scale_re(2f64.sqrt())) < 1e-15);
        let q = plant.quadratic().unwrap();
        assert_eq!((q.gamma, q.delta), (1.0, 1.0));
        assert_eq!(q.e_full(), ComplexMatrix::identity(2));
        assert!(cfg.plant.r_default && cfg.plant.rho_default);
        assert_eq!(plant.weights.rho, DEFAULT_RHO);
    }

    #[test]
    fn missing_gamma_names_the_field() {
        let text = fixtures::EXAMPLE.replace("\"gamma\": 1.0,", "");
        match parse_config(&text, "x.json") {
            Err(RunnerError::Parse { message, line, .. }) => {
                assert!(message.contains("gamma"), "{message}");
                assert!(line > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn asymmetric_x2_is_a_structure_error() {
        let m = r#"[[[0,0],[0,0],[1,0],[2,0]],[[0,0],[0,0],[3,0],[1,0]],[[1,0],[3,0],[0,0],[0,0]],[[2,0],[1,0],[0,0],[0,0]]]"#;
        let text = fixtures::EXAMPLE.replace(
            "\"M\": [[[0.0, 0.0], [0.0, 0.5]], [[0.0, -0.5], [0.0, 0.0]]]",
            &format!("\"M\": {m}"),
        );
        match parse_config(&text, "x.json") {
            Err(RunnerError::Structure(v)) => assert!(v.iter().any(|s| s.contains("symmetric")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_range_is_validated() {
        let text = fixtures::KAPPA_SWEEP.replace("\"points\": 25", "\"points\": 1");
        assert!(matches!(parse_config(&text, "x"), Err(RunnerError::Structure(_))));
        let text = fixtures::KAPPA_SWEEP.replace("\"param\": \"kappa\"", "\"param\": \"delta1\"");
        assert!(matches!(parse_config(&text, "x"), Err(RunnerError::Structure(_))));
    }

    #[test]
    fn grid_includes_endpoints() {
        let s = SweepRange {
            param: "kappa".into(),
            start: 0.3,
            stop: 6.0,
            points: 25,
        };
        let g = s.grid();
        assert_eq!(g.len(), 25);
        assert_eq!((g[0], g[24]), (0.3, 6.0));
        assert!((g[1] - 0.5375).abs() < 1e-15);
    }

    #[test]
    fn kappa_scales_coupling() {
        let cfg = parse_config(fixtures::EXAMPLE, "x").unwrap();
        let p = cfg.plant.with_param("kappa", 4.0).unwrap();
        assert!((p.n.assemble()[(0, 0)].re - 2.0).abs() < 1e-15);
        assert!(cfg.plant.with_param("kappa", -1.0).is_err());
        assert!(cfg.plant.with_param("delta2", 1.0).is_err());
    }
}

//! Guaranteed-cost certificates for a fixed plant without a controller.
//!
//! Both perturbation classes share one LMI shape in `(P, u)` with
//! `u = 1/τ²`:
//!
//! ```text
//! [[F†P + PF + u·G†G/γ² + R,  2PJG†],
//!  [2GJP,                     −u·I ]]  ⪯ −ε·I
//! ```
//!
//! where `G = E` for quadratic perturbations and `G = Ẽ#Σ` for the scalar
//! non-quadratic channel. The non-quadratic bound adds `|μ(P)|²/4` through
//! the epigraph `[[t, μ/2], [μ*/2, 1]] ⪰ 0`.

use num_complex::Complex64;
use thiserror::Error;

use crate::lmi::{assemble_blocks, AffineMatrixExpr, DecisionSpace, LmiError, LmiProgram, VarId};
use crate::numkernel::{herm_eig, spectral_abscissa, ComplexMatrix};
use crate::qmodel::{
    diffusion, drift, j_matrix, lambda_tilde, mu_constant, real_trace, swap_matrix, validate_structure,
    DoubledMatrix, ModelError, PlantModel, StructureKind, Uncertainty,
};
use crate::sdp::{check_point, solve, CertificateReport, SdpOptions, SdpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("nominal drift is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotNominallyStable { abscissa: f64 },
    #[error("no certificate found (phase-I value {phase1_value:.3e})")]
    Infeasible { phase1_value: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

impl From<crate::numkernel::NumError> for AnalysisError {
    fn from(e: crate::numkernel::NumError) -> Self {
        Self::Model(ModelError::Num(e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    /// Strictness of `≺ 0` and `P ≻ 0`.
    pub eps_margin: f64,
    /// Lower bound on `u = 1/τ²`.
    pub eps_q: f64,
    /// Upper bound on `u`.
    pub u_max: f64,
    pub sdp: SdpOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            eps_margin: 1e-6,
            eps_q: 1e-6,
            u_max: 1e6,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisResult {
    pub p: DoubledMatrix,
    pub tau: f64,
    pub lambda_tilde: f64,
    /// `λ̃ + δ/τ²`, or `λ̃ + δ1/τ² + |μ|²/4 + δ2` for non-quadratic plants.
    pub bound: f64,
    /// `λmax` of the main LMI at the solution.
    pub margin: f64,
    /// `μ(P)` for non-quadratic plants.
    pub mu: Option<Complex64>,
    pub iterations: usize,
}

/// Perturbation channel `G` (rows × 2n), radius parameter `γ` and the
/// weight of `u` in the objective.
struct Channel {
    g: ComplexMatrix,
    gamma: f64,
    delta: f64,
}

fn channel(plant: &PlantModel) -> Channel {
    match &plant.uncertainty {
        Uncertainty::Quadratic(q) => Channel {
            g: q.e_full(),
            gamma: q.gamma,
            delta: q.delta,
        },
        Uncertainty::NonQuadratic(nq) => Channel {
            g: &nq.etilde().conj() * &swap_matrix(plant.modes()),
            gamma: nq.gamma,
            delta: nq.delta1,
        },
    }
}

/// The assembled certificate program and the handles needed to read a
/// solution back.
pub struct CertificateLmi {
    pub program: LmiProgram,
    pub p: VarId,
    pub u: VarId,
    pub t: Option<VarId>,
}

/// Builds the certificate LMI for either perturbation class.
pub fn certificate_lmi(plant: &PlantModel, opts: &AnalysisOptions) -> Result<CertificateLmi, AnalysisError> {
    let n = plant.modes();
    let nq = matches!(plant.uncertainty, Uncertainty::NonQuadratic(_));
    let mut space = DecisionSpace::new();
    let p = space.doubled_hermitian("P", n);
    let u = space.scalar("u", Some(opts.eps_q), Some(opts.u_max));
    let t = nq.then(|| space.scalar("t", Some(0.0), None));
    let nv = space.len();

    let f = drift(plant);
    let j = j_matrix(n);
    let ch = channel(plant);
    let r = plant.weights.r.assemble();
    let rows = ch.g.rows();

    let lyap = AffineMatrixExpr::map_variable(&space, p, |b| &f.adjoint() * b).plus_adjoint();
    let gg = (&ch.g.adjoint() * &ch.g).scale_re(1.0 / (ch.gamma * ch.gamma));
    let b11 = lyap
        .add(&AffineMatrixExpr::scalar_term(&space, u, gg))?
        .add_constant(&r)?;
    let jg = &j * &ch.g.adjoint();
    let b12 = AffineMatrixExpr::map_variable(&space, p, |b| (b * &jg).scale_re(2.0));
    let b21 = b12.adjoint();
    let b22 = AffineMatrixExpr::scalar_term(&space, u, ComplexMatrix::identity(rows).scale_re(-1.0));
    let main = assemble_blocks(
        &[vec![b11.into(), b12.into()], vec![b21.into(), b22.into()]],
        nv,
    )?;

    let mut program = LmiProgram::new(space);
    program.constrain("certificate", main, opts.eps_margin);
    let neg_p = AffineMatrixExpr::map_variable(&program.space, p, |b| b.scale_re(-1.0));
    program.constrain("P positive", neg_p, opts.eps_margin);

    let d = diffusion(&plant.n);
    let basis = program.space.basis(p);
    for (k, b) in program.space.range(p).zip(&basis) {
        program.objective[k] = real_trace(b, &d)?;
    }
    program.objective[program.space.index(u)] = ch.delta;

    if let (Some(t), Uncertainty::NonQuadratic(nqu)) = (t, &plant.uncertainty) {
        let et = nqu.etilde();
        let space = &program.space;
        let mut mu_err = None;
        let off = AffineMatrixExpr::map_variable(space, p, |b| {
            let mu = mu_constant(b, &et).unwrap_or_else(|e| {
                mu_err = Some(e);
                Complex64::new(0.0, 0.0)
            });
            ComplexMatrix::from_fn(2, 2, |i, k| match (i, k) {
                (0, 1) => -mu * 0.5,
                (1, 0) => -mu.conj() * 0.5,
                _ => Complex64::new(0.0, 0.0),
            })
        });
        if let Some(e) = mu_err {
            return Err(e.into());
        }
        let tt = AffineMatrixExpr::scalar_term(space, t, ComplexMatrix::from_real_diag(&[-1.0, 0.0]));
        let epi = off
            .add(&tt)?
            .add_constant(&ComplexMatrix::from_real_diag(&[0.0, -1.0]))?;
        program.constrain("mu epigraph", epi, 0.0);
        program.objective[program.space.index(t)] = 1.0;
    }
    Ok(CertificateLmi { program, p, u, t })
}

fn nominal_check(plant: &PlantModel) -> Result<(), AnalysisError> {
    let abscissa = spectral_abscissa(&drift(plant))?;
    if abscissa >= 0.0 {
        return Err(AnalysisError::NotNominallyStable { abscissa });
    }
    Ok(())
}

fn run(plant: &PlantModel, opts: &AnalysisOptions) -> Result<AnalysisResult, AnalysisError> {
    nominal_check(plant)?;
    let lmi = certificate_lmi(plant, opts)?;
    let problem = lmi.program.to_sdp()?;
    let sol = solve(&problem, &opts.sdp);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(AnalysisError::Infeasible {
                phase1_value: sol.phase1_value,
            })
        }
        SdpStatus::Unbounded => {
            return Err(AnalysisError::NumericalFailure("certificate program reported unbounded".into()))
        }
        SdpStatus::NumericalFailure => {
            return Err(AnalysisError::NumericalFailure(
                sol.message.unwrap_or_else(|| "solver failure".into()),
            ))
        }
    }
    let x = &sol.x;
    let p = lmi.program.space.unpack_doubled(lmi.p, x);
    let u = lmi.program.space.value(lmi.u, x);
    let margin = lmi.program.margins(x)?[0];
    let pmin = herm_eig(&p.assemble())?.min();
    if margin > 0.0 || pmin <= 0.0 {
        return Err(AnalysisError::NumericalFailure(format!(
            "solution fails re-check (LMI margin {margin:.3e}, min eig P {pmin:.3e})"
        )));
    }
    let lt = lambda_tilde(&p, &plant.n)?;
    let (bound, mu) = match &plant.uncertainty {
        Uncertainty::Quadratic(q) => (lt + q.delta * u, None),
        Uncertainty::NonQuadratic(nq) => {
            let mu = mu_constant(&p.assemble(), &nq.etilde())?;
            (lt + nq.delta1 * u + mu.norm_sqr() / 4.0 + nq.delta2, Some(mu))
        }
    };
    Ok(AnalysisResult {
        p,
        tau: 1.0 / u.sqrt(),
        lambda_tilde: lt,
        bound,
        margin,
        mu,
        iterations: sol.iterations,
    })
}

/// Minimal certifiable bound under a quadratic perturbation.
pub fn analyze_quadratic(plant: &PlantModel, opts: &AnalysisOptions) -> Result<AnalysisResult, AnalysisError> {
    plant.quadratic()?;
    run(plant, opts)
}

/// Minimal certifiable bound under a scalar non-quadratic perturbation.
pub fn analyze_nonquadratic(plant: &PlantModel, opts: &AnalysisOptions) -> Result<AnalysisResult, AnalysisError> {
    plant.nonquadratic()?;
    run(plant, opts)
}

/// Dispatches on the plant's perturbation class.
pub fn analyze(plant: &PlantModel, opts: &AnalysisOptions) -> Result<AnalysisResult, AnalysisError> {
    run(plant, opts)
}

/// Dense Schur-complement form
/// `F†P + PF + 4τ²PJG†GJP + G†G/(γ²τ²) + R`, which must be negative
/// definite at any certificate.
pub fn riccati_residual(plant: &PlantModel, p: &DoubledMatrix, tau: f64) -> ComplexMatrix {
    let f = drift(plant);
    let j = j_matrix(plant.modes());
    let ch = channel(plant);
    let pf = p.assemble();
    let gg = &ch.g.adjoint() * &ch.g;
    let pj = &pf * &j;
    let cross = &(&pj * &gg) * &(&j * &pf);
    let out = &(&f.adjoint() * &pf) + &(&pf * &f);
    let out = &out + &cross.scale_re(4.0 * tau * tau);
    let out = &out + &gg.scale_re(1.0 / (ch.gamma * ch.gamma * tau * tau));
    (&out + &plant.weights.r.assemble()).hermitian_part()
}

/// Re-evaluates the certificate program at a stored `(P, τ)`, e.g. one read
/// back from a results file. For the non-quadratic class the epigraph
/// variable is set to `|μ(P)|²/4`.
pub fn recheck_certificate(
    plant: &PlantModel,
    p: &DoubledMatrix,
    tau: f64,
    opts: &AnalysisOptions,
) -> Result<CertificateReport, AnalysisError> {
    if p.n() != plant.modes() {
        return Err(ModelError::DimensionMismatch(format!(
            "P has {} modes, plant has {}",
            p.n(),
            plant.modes()
        ))
        .into());
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(ModelError::InvalidParameter(format!("tau must be > 0, got {tau}")).into());
    }
    let lmi = certificate_lmi(plant, opts)?;
    let space = &lmi.program.space;
    let mut x = vec![0.0; space.len()];
    space.pack_doubled(lmi.p, p, &mut x);
    x[space.index(lmi.u)] = 1.0 / (tau * tau);
    if let (Some(t), Uncertainty::NonQuadratic(nq)) = (lmi.t, &plant.uncertainty) {
        x[space.index(t)] = mu_constant(&p.assemble(), &nq.etilde())?.norm_sqr() / 4.0;
    }
    Ok(check_point(&lmi.program.to_sdp()?, &x)?)
}

/// Structure and definiteness checks on a returned certificate.
pub fn certificate_is_structured(res: &AnalysisResult) -> bool {
    validate_structure(&res.p.assemble(), StructureKind::Hamiltonian).is_empty()
}

//! Coherent guaranteed-cost controller synthesis.
//!
//! With `P = q⁻¹I`, `Y = Kq` and `s = τ²` the design conditions are affine:
//!
//! ```text
//! [[A + 4s·JG†GJ,  Y,     qR½,  qG†   ],
//!  [Y,             −I/ρ,  0,    0     ],
//!  [qR½,           0,     −I,   0     ],
//!  [qG,            0,     0,    −γ²sI ]]  ⪯ −ε·I,   A = q(F† + F) + i(YJ − JY)
//!
//! [[−ξ, √δ, √B], [√δ, −s, 0], [√B, 0, −q]] ⪯ 0
//! ```
//!
//! and `ξ` is minimised. `G` is `E` or `Ẽ#Σ` as in [`crate::analysis`].
//! The design LMI is assembled after the congruence `diag(I, √ρ·I, I, I)`,
//! i.e. with `√ρ·Y` off the diagonal and `−I` in place of `−I/ρ`.

use num_complex::Complex64;
use thiserror::Error;

use crate::lmi::{assemble_blocks, AffineMatrixExpr, Block, DecisionSpace, LmiError, LmiProgram, VarId};
use crate::numkernel::{herm_eig, psd_sqrt, spectral_abscissa, spectral_norm, ComplexMatrix, NumError};
use crate::qmodel::{
    closed_loop_drift, diffusion, drift, j_matrix, mu_constant, swap_matrix, validate_structure, DoubledMatrix,
    ModelError, PlantModel, StructureKind, Uncertainty,
};
use crate::sdp::{check_point, solve, CertificateReport, SdpOptions, SdpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("no controller certificate found (phase-I value {phase1_value:.3e})")]
    Infeasible { phase1_value: f64 },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("post-check failed: {0}")]
    PostCheckFailed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lmi(#[from] LmiError),
}

impl From<NumError> for SynthesisError {
    fn from(e: NumError) -> Self {
        Self::Model(ModelError::Num(e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisOptions {
    pub eps_margin: f64,
    /// Lower bound on `q` and `s`.
    pub eps_q: f64,
    /// Upper bound on `q` and `s`.
    pub scalar_max: f64,
    pub sdp: SdpOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            eps_margin: 1e-6,
            eps_q: 1e-6,
            scalar_max: 1e6,
            sdp: SdpOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub k: DoubledMatrix,
    pub q: f64,
    pub y: DoubledMatrix,
    pub tau: f64,
    pub xi: f64,
    /// `B/q + δ/τ²`, plus `|μ|²/4 + δ2` for non-quadratic plants.
    pub bound: f64,
    pub mu: Option<Complex64>,
    pub closed_loop_abscissa: f64,
    /// `λmax` of the main design LMI at the solution.
    pub margin: f64,
    /// `λmax` of the bound LMI at the solution.
    pub bound_margin: f64,
    pub k_norm: f64,
    pub warnings: Vec<String>,
    pub iterations: usize,
}

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

/// `B = Tr(J N† diag(I, 0) N J)`.
pub fn trace_b(plant: &PlantModel) -> Result<f64, SynthesisError> {
    let t = diffusion(&plant.n).trace();
    if t.re < -1e-10 {
        return Err(SynthesisError::NumericalFailure(format!(
            "diffusion trace is negative ({:.3e}); matrices are mis-assembled",
            t.re
        )));
    }
    Ok(t.re.max(0.0))
}

pub struct DesignLmi {
    pub program: LmiProgram,
    pub q: VarId,
    pub y: VarId,
    pub s: VarId,
    pub xi: VarId,
}

/// Builds the design program for either perturbation class.
pub fn design_lmi(plant: &PlantModel, opts: &SynthesisOptions) -> Result<DesignLmi, SynthesisError> {
    let n = plant.modes();
    let mut space = DecisionSpace::new();
    let q = space.scalar("q", Some(opts.eps_q), Some(opts.scalar_max));
    let y = space.doubled_hermitian("Y", n);
    let s = space.scalar("s", Some(opts.eps_q), Some(opts.scalar_max));
    let xi = space.scalar("xi", None, None);
    let nv = space.len();

    let f = drift(plant);
    let j = j_matrix(n);
    let ch = channel(plant);
    let rows = ch.g.rows();
    let r_half = psd_sqrt(&plant.weights.r.assemble())?;
    let i_c = Complex64::new(0.0, 1.0);
    let dim = 2 * n;

    let a = AffineMatrixExpr::scalar_term(&space, q, &f.adjoint() + &f)
        .add(&AffineMatrixExpr::map_variable(&space, y, |b| {
            (&(b * &j) - &(&j * b)).scale(i_c)
        }))?
        .add(&AffineMatrixExpr::scalar_term(
            &space,
            s,
            (&(&j * &ch.g.adjoint()) * &(&ch.g * &j)).scale_re(4.0),
        ))?;
    let rho = plant.weights.rho;
    // Congruence with diag(I, √ρ·I, I, I) turns the −I/ρ block into −I, so the
    // strictness margin does not interact with the size of ρ.
    let yv = AffineMatrixExpr::map_variable(&space, y, |b| b.scale_re(rho.sqrt()));
    let qr = AffineMatrixExpr::scalar_term(&space, q, r_half.clone());
    let qg_adj = AffineMatrixExpr::scalar_term(&space, q, ch.g.adjoint());
    let qg = AffineMatrixExpr::scalar_term(&space, q, ch.g.clone());
    let main = assemble_blocks(
        &[
            vec![a.into(), yv.clone().into(), qr.clone().into(), qg_adj.into()],
            vec![
                yv.into(),
                Block::Const(ComplexMatrix::identity(dim).scale_re(-1.0)),
                Block::Zero,
                Block::Zero,
            ],
            vec![
                qr.into(),
                Block::Zero,
                Block::Const(ComplexMatrix::identity(dim).scale_re(-1.0)),
                Block::Zero,
            ],
            vec![
                qg.into(),
                Block::Zero,
                Block::Zero,
                AffineMatrixExpr::scalar_term(
                    &space,
                    s,
                    ComplexMatrix::identity(rows).scale_re(-ch.gamma * ch.gamma),
                )
                .into(),
            ],
        ],
        nv,
    )?;

    let b = trace_b(plant)?;
    let konst = ComplexMatrix::from_real_rows(&[
        &[0.0, ch.delta.sqrt(), b.sqrt()],
        &[ch.delta.sqrt(), 0.0, 0.0],
        &[b.sqrt(), 0.0, 0.0],
    ]);
    let unit = |k: usize| ComplexMatrix::from_fn(3, 3, |i, l| Complex64::new(if i == k && l == k { -1.0 } else { 0.0 }, 0.0));
    let bound = AffineMatrixExpr::scalar_term(&space, xi, unit(0))
        .add(&AffineMatrixExpr::scalar_term(&space, s, unit(1)))?
        .add(&AffineMatrixExpr::scalar_term(&space, q, unit(2)))?
        .add_constant(&konst)?;

    let xi_index = space.index(xi);
    let mut program = LmiProgram::new(space);
    program.constrain("design", main, opts.eps_margin);
    program.constrain("bound", bound, 0.0);
    program.objective[xi_index] = 1.0;
    Ok(DesignLmi { program, q, y, s, xi })
}

/// Dense form `q(F − iJK)† + (F − iJK)q + 4τ²JG†GJ + q²(G†G/(γ²τ²) + R + ρK²)`,
/// negative definite at every valid design.
pub fn schur_residual(plant: &PlantModel, q: f64, k: &DoubledMatrix, tau: f64) -> ComplexMatrix {
    let n = plant.modes();
    let j = j_matrix(n);
    let ch = channel(plant);
    let kf = k.assemble();
    let fk = &drift(plant) - &(&j * &kf).scale(Complex64::new(0.0, 1.0));
    let gg = &ch.g.adjoint() * &ch.g;
    let mut out = &fk.adjoint().scale_re(q) + &fk.scale_re(q);
    out += &(&(&j * &gg) * &j).scale_re(4.0 * tau * tau);
    let inner = &(&gg.scale_re(1.0 / (ch.gamma * ch.gamma * tau * tau)) + &plant.weights.r.assemble())
        + &(&kf * &kf).scale_re(plant.weights.rho);
    out += &inner.scale_re(q * q);
    out.hermitian_part()
}

fn run(plant: &PlantModel, opts: &SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    let lmi = design_lmi(plant, opts)?;
    let problem = lmi.program.to_sdp()?;
    let sol = solve(&problem, &opts.sdp);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(SynthesisError::Infeasible {
                phase1_value: sol.phase1_value,
            })
        }
        SdpStatus::Unbounded => {
            return Err(SynthesisError::NumericalFailure("design program reported unbounded".into()))
        }
        SdpStatus::NumericalFailure => {
            return Err(SynthesisError::NumericalFailure(
                sol.message.unwrap_or_else(|| "solver failure".into()),
            ))
        }
    }
    let x = &sol.x;
    let space = &lmi.program.space;
    let q = space.value(lmi.q, x);
    let s = space.value(lmi.s, x);
    let xi = space.value(lmi.xi, x);
    let y = space.unpack_doubled(lmi.y, x);
    let k = y.scale(1.0 / q);
    let margins = lmi.program.margins(x)?;

    let violations = validate_structure(&k.assemble(), StructureKind::Hamiltonian);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(SynthesisError::PostCheckFailed(format!(
            "controller fails structure validation: {}",
            list.join("; ")
        )));
    }
    if margins[0] > 0.0 {
        return Err(SynthesisError::PostCheckFailed(format!(
            "design LMI margin {:.3e} is positive at the returned point",
            margins[0]
        )));
    }
    let abscissa = spectral_abscissa(&closed_loop_drift(plant, Some(&k), None)?)?;
    if abscissa >= 0.0 {
        return Err(SynthesisError::PostCheckFailed(format!(
            "closed-loop drift is not Hurwitz (abscissa {abscissa:.6e})"
        )));
    }

    let b = trace_b(plant)?;
    let ch = channel(plant);
    let mut bound = b / q + ch.delta / s;
    let mut mu = None;
    if let Uncertainty::NonQuadratic(nq) = &plant.uncertainty {
        let p = ComplexMatrix::identity(2 * plant.modes()).scale_re(1.0 / q);
        let m = mu_constant(&p, &nq.etilde())?;
        bound += m.norm_sqr() / 4.0 + nq.delta2;
        mu = Some(m);
    }
    let mut warnings = Vec::new();
    let det: f64 = herm_eig(&k.assemble())?.values.iter().product();
    if det.abs() < 1e-12 {
        warnings.push(format!("controller matrix is nearly singular (|det K| = {:.3e})", det.abs()));
    }
    Ok(SynthesisResult {
        k_norm: spectral_norm(&k.assemble())?,
        k,
        q,
        y,
        tau: s.sqrt(),
        xi,
        bound,
        mu,
        closed_loop_abscissa: abscissa,
        margin: margins[0],
        bound_margin: margins[1],
        warnings,
        iterations: sol.iterations,
    })
}

/// Re-evaluates the design program at a stored `(K, q, τ, ξ)`.
pub fn recheck_design(
    plant: &PlantModel,
    k: &DoubledMatrix,
    q: f64,
    tau: f64,
    xi: f64,
    opts: &SynthesisOptions,
) -> Result<CertificateReport, SynthesisError> {
    if k.n() != plant.modes() {
        return Err(ModelError::DimensionMismatch(format!(
            "K has {} modes, plant has {}",
            k.n(),
            plant.modes()
        ))
        .into());
    }
    let lmi = design_lmi(plant, opts)?;
    let space = &lmi.program.space;
    let mut x = vec![0.0; space.len()];
    space.pack_doubled(lmi.y, &k.scale(q), &mut x);
    x[space.index(lmi.q)] = q;
    x[space.index(lmi.s)] = tau * tau;
    x[space.index(lmi.xi)] = xi;
    Ok(check_point(&lmi.program.to_sdp()?, &x)?)
}

pub fn synthesize_quadratic(plant: &PlantModel, opts: &SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    plant.quadratic()?;
    run(plant, opts)
}

pub fn synthesize_nonquadratic(plant: &PlantModel, opts: &SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    plant.nonquadratic()?;
    run(plant, opts)
}

/// Dispatches on the plant's perturbation class.
pub fn synthesize(plant: &PlantModel, opts: &SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    run(plant, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::{CouplingMatrix, NonQuadraticUncertainty, QuadraticUncertainty};

    fn nonquadratic(kappa: f64, e: [f64; 2], d1: f64, d2: f64) -> PlantModel {
        let mut p = PlantModel::squeezed_cavity(kappa);
        p.uncertainty = Uncertainty::NonQuadratic(
            NonQuadraticUncertainty::new(
                vec![Complex64::new(e[0], 0.0)],
                vec![Complex64::new(e[1], 0.0)],
                1.0,
                d1,
                d2,
            )
            .unwrap(),
        );
        p
    }

    #[test]
    fn example_plant_design_passes_post_checks() {
        let plant = PlantModel::squeezed_cavity(6.0);
        let r = synthesize_quadratic(&plant, &SynthesisOptions::default()).unwrap();
        assert!(r.closed_loop_abscissa < 0.0);
        assert!(r.margin <= -0.5e-6);
        assert!(r.bound_margin <= 1e-8);
        assert!((r.bound - r.xi).abs() <= 1e-6 * r.xi, "{} vs {}", r.bound, r.xi);
        let res = schur_residual(&plant, r.q, &r.k, r.tau);
        assert!(herm_eig(&res).unwrap().max() < 0.0);
    }

    #[test]
    fn zero_channel_reduces_to_quadratic() {
        let opts = SynthesisOptions::default();
        let mut quad = PlantModel::squeezed_cavity(2.0);
        quad.uncertainty = Uncertainty::Quadratic(
            QuadraticUncertainty::new(CouplingMatrix::zeros(1, 1), 1.0, 0.0).unwrap(),
        );
        let a = synthesize_quadratic(&quad, &opts).unwrap();
        let b = synthesize_nonquadratic(&nonquadratic(2.0, [0.0, 0.0], 0.0, 0.0), &opts).unwrap();
        assert!((a.bound - b.bound).abs() < 1e-8, "{} vs {}", a.bound, b.bound);
    }

    #[test]
    fn mu_term_vanishes_for_single_sided_channel() {
        let r = synthesize_nonquadratic(&nonquadratic(6.0, [1.0, 0.0], 0.1, 0.2), &SynthesisOptions::default())
            .unwrap();
        assert!(r.mu.unwrap().norm() < 1e-15);
        assert!((r.bound - (r.xi + 0.2)).abs() < 1e-6 * r.bound);
    }

    #[test]
    fn two_sided_channel_adds_mu_term() {
        let r = synthesize_nonquadratic(&nonquadratic(6.0, [1.0, 1.0], 0.1, 0.1), &SynthesisOptions::default())
            .unwrap();
        let mu = r.mu.unwrap();
        assert!((mu - Complex64::new(-2.0 / r.q, 0.0)).norm() < 1e-12);
        assert!(r.bound > r.xi);
    }

    #[test]
    fn stored_design_rechecks() {
        let plant = PlantModel::squeezed_cavity(6.0);
        let opts = SynthesisOptions::default();
        let r = synthesize(&plant, &opts).unwrap();
        let ok = recheck_design(&plant, &r.k, r.q, r.tau, r.xi, &opts).unwrap();
        assert!(ok.pass, "{ok:?}");
        let bad = recheck_design(&plant, &r.k, r.q, r.tau, 0.5 * r.xi, &opts).unwrap();
        assert!(!bad.pass);
    }
}

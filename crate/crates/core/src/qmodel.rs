//! Linear quantum plant model in doubled-up form.
//!
//! Every system matrix acts on the stacked operator vector `[a; a#]` and has
//! the block layout `[[X1, X2], [X2#, X1#]]`. Hamiltonian-type matrices
//! (`M`, `K`, `P`, `Δ`) additionally satisfy `X1 = X1†` and `X2 = X2ᵀ`,
//! which makes the assembled matrix Hermitian.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::numkernel::{herm_eig, spectral_norm, ComplexMatrix, NumError};

const STRUCTURE_TOL: f64 = 1e-10;
const TRACE_IMAG_TOL: f64 = 1e-12;
/// Slack allowed on the admissibility radius `‖Δ‖ ≤ 2/γ`.
pub const DELTA_RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("structure violations: {}", join_violations(.0))]
    Structure(Vec<StructureViolation>),
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("perturbation ‖Δ‖ = {norm:.6} exceeds the admissible radius 2/γ = {radius:.6}")]
    InadmissibleDelta { norm: f64, radius: f64 },
    #[error("trace has imaginary residue {0:.3e}; matrices are mis-assembled")]
    ImaginaryResidue(f64),
    #[error("operation needs {0} uncertainty")]
    WrongUncertaintyKind(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Num(#[from] NumError),
}

fn join_violations(v: &[StructureViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureKind {
    Hamiltonian,
    Coupling,
    Covariance,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureViolation {
    OddDimension { rows: usize, cols: usize },
    NotSquare { rows: usize, cols: usize },
    X2SharpMismatch,
    X1SharpMismatch,
    X1NotHermitian,
    X2NotSymmetric,
    NonFinite,
}

impl fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OddDimension { rows, cols } => {
                write!(f, "dimensions {rows}x{cols} are not both even")
            }
            Self::NotSquare { rows, cols } => write!(f, "{rows}x{cols} matrix is not square"),
            Self::X2SharpMismatch => f.write_str("X2# block mismatch"),
            Self::X1SharpMismatch => f.write_str("X1# block mismatch"),
            Self::X1NotHermitian => f.write_str("X1 block is not Hermitian"),
            Self::X2NotSymmetric => f.write_str("X2 block is not symmetric"),
            Self::NonFinite => f.write_str("non-finite entries"),
        }
    }
}

/// Checks the doubled-up block layout `[[X1, X2], [X2#, X1#]]`, plus
/// `X1 = X1†`, `X2 = X2ᵀ` for Hamiltonian and covariance kinds. Returns every
/// violation found; an empty list means the matrix is well formed.
pub fn validate_structure(x: &ComplexMatrix, kind: StructureKind) -> Vec<StructureViolation> {
    let (rows, cols) = x.shape();
    let mut out = Vec::new();
    if rows % 2 != 0 || cols % 2 != 0 || rows == 0 {
        out.push(StructureViolation::OddDimension { rows, cols });
        return out;
    }
    if kind != StructureKind::Coupling && rows != cols {
        out.push(StructureViolation::NotSquare { rows, cols });
        return out;
    }
    if !x.is_finite() {
        out.push(StructureViolation::NonFinite);
        return out;
    }
    let (m, n) = (rows / 2, cols / 2);
    let tol = STRUCTURE_TOL * x.frobenius_norm();
    let x1 = x.block(0, 0, m, n);
    let x2 = x.block(0, n, m, n);
    let x3 = x.block(m, 0, m, n);
    let x4 = x.block(m, n, m, n);
    if x3.max_abs_diff(&x2.conj()) > tol {
        out.push(StructureViolation::X2SharpMismatch);
    }
    if x4.max_abs_diff(&x1.conj()) > tol {
        out.push(StructureViolation::X1SharpMismatch);
    }
    if kind != StructureKind::Coupling {
        if x1.max_abs_diff(&x1.adjoint()) > tol {
            out.push(StructureViolation::X1NotHermitian);
        }
        if x2.max_abs_diff(&x2.transpose()) > tol {
            out.push(StructureViolation::X2NotSymmetric);
        }
    }
    out
}

/// `J = diag(I_n, −I_n)`.
pub fn j_matrix(n: usize) -> ComplexMatrix {
    let mut d = vec![1.0; n];
    d.extend(std::iter::repeat_n(-1.0, n));
    ComplexMatrix::from_real_diag(&d)
}

/// `Σ = [[0, I_n], [I_n, 0]]`.
pub fn swap_matrix(n: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = Complex64::new(1.0, 0.0);
        s[(n + i, i)] = Complex64::new(1.0, 0.0);
    }
    s
}

fn assemble_doubled(x1: &ComplexMatrix, x2: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = x1.shape();
    let mut out = ComplexMatrix::zeros(2 * m, 2 * n);
    out.set_block(0, 0, x1);
    out.set_block(0, n, x2);
    out.set_block(m, 0, &x2.conj());
    out.set_block(m, n, &x1.conj());
    out
}

/// Square doubled-up matrix `[[X1, X2], [X2#, X1#]]` with `n×n` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubledMatrix {
    x1: ComplexMatrix,
    x2: ComplexMatrix,
}

impl DoubledMatrix {
    /// Hamiltonian-type instance: requires `X1 = X1†` and `X2 = X2ᵀ`.
    pub fn hamiltonian(x1: ComplexMatrix, x2: ComplexMatrix) -> Result<Self, ModelError> {
        if !x1.is_square() || x1.shape() != x2.shape() {
            return Err(ModelError::DimensionMismatch(format!(
                "X1 is {}x{}, X2 is {}x{}",
                x1.rows(),
                x1.cols(),
                x2.rows(),
                x2.cols()
            )));
        }
        let out = Self { x1, x2 };
        let v = validate_structure(&out.assemble(), StructureKind::Hamiltonian);
        if v.is_empty() {
            Ok(out)
        } else {
            Err(ModelError::Structure(v))
        }
    }

    /// Extracts the blocks of a full `2n×2n` matrix after validating it.
    pub fn from_full(x: &ComplexMatrix, kind: StructureKind) -> Result<Self, ModelError> {
        let v = validate_structure(x, kind);
        if !v.is_empty() {
            return Err(ModelError::Structure(v));
        }
        let n = x.rows() / 2;
        Ok(Self {
            x1: x.block(0, 0, n, n),
            x2: x.block(0, n, n, n),
        })
    }

    /// Projects a nearly structured matrix onto the Hamiltonian doubled-up
    /// form by averaging the redundant blocks.
    pub fn project_hamiltonian(x: &ComplexMatrix) -> Self {
        let n = x.rows() / 2;
        let h = x.hermitian_part();
        let x1 = (&h.block(0, 0, n, n) + &h.block(n, n, n, n).conj()).scale_re(0.5);
        let x2 = (&h.block(0, n, n, n) + &h.block(n, 0, n, n).conj()).scale_re(0.5);
        let x2 = (&x2 + &x2.transpose()).scale_re(0.5);
        Self {
            x1: x1.hermitian_part(),
            x2,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x1: ComplexMatrix::zeros(n, n),
            x2: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self {
            x1: ComplexMatrix::identity(n).scale_re(s),
            x2: ComplexMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.x1.rows()
    }

    pub fn x1(&self) -> &ComplexMatrix {
        &self.x1
    }

    pub fn x2(&self) -> &ComplexMatrix {
        &self.x2
    }

    pub fn assemble(&self) -> ComplexMatrix {
        assemble_doubled(&self.x1, &self.x2)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            x1: self.x1.scale_re(s),
            x2: self.x2.scale_re(s),
        }
    }
}

/// Rectangular doubled-up matrix `[[X1, X2], [X2#, X1#]]` with `m×n` blocks.
/// Used for the coupling matrix `N` and the quadratic perturbation channel
/// `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n1: ComplexMatrix,
    n2: ComplexMatrix,
}

impl CouplingMatrix {
    pub fn new(n1: ComplexMatrix, n2: ComplexMatrix) -> Result<Self, ModelError> {
        if n1.shape() != n2.shape() || n1.rows() == 0 || n1.cols() == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "N1 is {}x{}, N2 is {}x{}",
                n1.rows(),
                n1.cols(),
                n2.rows(),
                n2.cols()
            )));
        }
        Ok(Self { n1, n2 })
    }

    pub fn from_full(x: &ComplexMatrix) -> Result<Self, ModelError> {
        let v = validate_structure(x, StructureKind::Coupling);
        if !v.is_empty() {
            return Err(ModelError::Structure(v));
        }
        let (m, n) = (x.rows() / 2, x.cols() / 2);
        Ok(Self {
            n1: x.block(0, 0, m, n),
            n2: x.block(0, n, m, n),
        })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            n1: ComplexMatrix::zeros(m, n),
            n2: ComplexMatrix::zeros(m, n),
        }
    }

    /// `m` channels (rows of each block).
    pub fn outputs(&self) -> usize {
        self.n1.rows()
    }

    /// `n` modes (columns of each block).
    pub fn modes(&self) -> usize {
        self.n1.cols()
    }

    pub fn n1(&self) -> &ComplexMatrix {
        &self.n1
    }

    pub fn n2(&self) -> &ComplexMatrix {
        &self.n2
    }

    pub fn assemble(&self) -> ComplexMatrix {
        assemble_doubled(&self.n1, &self.n2)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            n1: self.n1.scale_re(s),
            n2: self.n2.scale_re(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.n1.max_abs() == 0.0 && self.n2.max_abs() == 0.0
    }
}

/// Quadratic perturbation `H2 = ½ z† Δ z` with `z = E [a; a#]` and
/// `‖Δ‖ ≤ 2/γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticUncertainty {
    /// Doubled-up `E = [[E1, E2], [E2#, E1#]]`.
    pub e: CouplingMatrix,
    pub gamma: f64,
    pub delta: f64,
}

impl QuadraticUncertainty {
    pub fn new(e: CouplingMatrix, gamma: f64, delta: f64) -> Result<Self, ModelError> {
        check_gamma(gamma)?;
        check_nonneg("delta", delta)?;
        Ok(Self { e, gamma, delta })
    }

    pub fn e_full(&self) -> ComplexMatrix {
        self.e.assemble()
    }

    /// Admissibility radius `2/γ` of the perturbation matrix.
    pub fn radius(&self) -> f64 {
        2.0 / self.gamma
    }
}

/// Scalar-channel non-quadratic perturbation `H2 = f(ζ, ζ*)` with
/// `ζ = Ẽ [a; a#]`, constrained by the sector bounds `(γ, δ1)` and `δ2`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonQuadraticUncertainty {
    e1: Vec<Complex64>,
    e2: Vec<Complex64>,
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl NonQuadraticUncertainty {
    pub fn new(
        e1: Vec<Complex64>,
        e2: Vec<Complex64>,
        gamma: f64,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self, ModelError> {
        if e1.len() != e2.len() || e1.is_empty() {
            return Err(ModelError::DimensionMismatch(format!(
                "Ẽ blocks have lengths {} and {}",
                e1.len(),
                e2.len()
            )));
        }
        check_gamma(gamma)?;
        check_nonneg("delta1", delta1)?;
        check_nonneg("delta2", delta2)?;
        Ok(Self {
            e1,
            e2,
            gamma,
            delta1,
            delta2,
        })
    }

    pub fn modes(&self) -> usize {
        self.e1.len()
    }

    /// The `1×2n` row `Ẽ = [E1, E2]`.
    pub fn etilde(&self) -> ComplexMatrix {
        let n = self.e1.len();
        ComplexMatrix::from_fn(1, 2 * n, |_, j| if j < n { self.e1[j] } else { self.e2[j - n] })
    }
}

fn check_gamma(gamma: f64) -> Result<(), ModelError> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!("gamma must be > 0, got {gamma}")))
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!("{name} must be >= 0, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Uncertainty {
    Quadratic(QuadraticUncertainty),
    NonQuadratic(NonQuadraticUncertainty),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostWeights {
    /// State weight `R ≻ 0`.
    pub r: DoubledMatrix,
    /// Controller weight in `R + ρK²`.
    pub rho: f64,
}

impl CostWeights {
    pub fn new(r: DoubledMatrix, rho: f64) -> Result<Self, ModelError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(ModelError::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        let min = herm_eig(&r.assemble())?.min();
        if min <= 0.0 {
            return Err(ModelError::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self { r, rho })
    }
}

/// Everything needed to analyse or control one uncertain plant.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    pub m: DoubledMatrix,
    pub n: CouplingMatrix,
    pub uncertainty: Uncertainty,
    pub weights: CostWeights,
}

impl PlantModel {
    pub fn new(
        m: DoubledMatrix,
        n: CouplingMatrix,
        uncertainty: Uncertainty,
        weights: CostWeights,
    ) -> Result<Self, ModelError> {
        let modes = m.n();
        if n.modes() != modes {
            return Err(ModelError::DimensionMismatch(format!(
                "M has {modes} modes, N has {} columns per block",
                n.modes()
            )));
        }
        if weights.r.n() != modes {
            return Err(ModelError::DimensionMismatch(format!(
                "M has {modes} modes, R has {}",
                weights.r.n()
            )));
        }
        let emodes = match &uncertainty {
            Uncertainty::Quadratic(q) => q.e.modes(),
            Uncertainty::NonQuadratic(nq) => nq.modes(),
        };
        if emodes != modes {
            return Err(ModelError::DimensionMismatch(format!(
                "M has {modes} modes, perturbation channel has {emodes}"
            )));
        }
        Ok(Self {
            m,
            n,
            uncertainty,
            weights,
        })
    }

    /// Single-mode squeezed cavity: `H1 = ¼i((a†)² − a²)`, `L = √κ a`, with
    /// the quadratic perturbation `E = I`, `γ = 1`, `δ = 1` and weights
    /// `R = I`, `ρ = 0.01`.
    pub fn squeezed_cavity(kappa: f64) -> Self {
        let m = squeezed_cavity_hamiltonian();
        let n = CouplingMatrix::new(
            ComplexMatrix::from_real_rows(&[&[kappa.sqrt()]]),
            ComplexMatrix::zeros(1, 1),
        )
        .expect("1x1 blocks");
        let e = CouplingMatrix::new(ComplexMatrix::identity(1), ComplexMatrix::zeros(1, 1))
            .expect("1x1 blocks");
        Self {
            m,
            n,
            uncertainty: Uncertainty::Quadratic(QuadraticUncertainty {
                e,
                gamma: 1.0,
                delta: 1.0,
            }),
            weights: CostWeights {
                r: DoubledMatrix::scaled_identity(1, 1.0),
                rho: 0.01,
            },
        }
    }

    pub fn modes(&self) -> usize {
        self.m.n()
    }

    pub fn quadratic(&self) -> Result<&QuadraticUncertainty, ModelError> {
        match &self.uncertainty {
            Uncertainty::Quadratic(q) => Ok(q),
            Uncertainty::NonQuadratic(_) => Err(ModelError::WrongUncertaintyKind("quadratic")),
        }
    }

    pub fn nonquadratic(&self) -> Result<&NonQuadraticUncertainty, ModelError> {
        match &self.uncertainty {
            Uncertainty::NonQuadratic(q) => Ok(q),
            Uncertainty::Quadratic(_) => Err(ModelError::WrongUncertaintyKind("non-quadratic")),
        }
    }

    /// Copy with the coupling scaled so that `L = √κ · L_base`.
    pub fn with_coupling_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.n = self.n.scale(factor);
        out
    }
}

/// The Hamiltonian matrix of `¼i((a†)² − a²)`: `[[0, i/2], [−i/2, 0]]`.
pub fn squeezed_cavity_hamiltonian() -> DoubledMatrix {
    DoubledMatrix::hamiltonian(
        ComplexMatrix::zeros(1, 1),
        ComplexMatrix::from_rows(&[vec![Complex64::new(0.0, 0.5)]]).expect("1x1"),
    )
    .expect("squeezing Hamiltonian is structured")
}

fn neg_i() -> Complex64 {
    Complex64::new(0.0, -1.0)
}

/// `−½ J N† J N`
fn damping(n: &CouplingMatrix) -> ComplexMatrix {
    let nf = n.assemble();
    let j_out = j_matrix(n.outputs());
    let j = j_matrix(n.modes());
    (&j * &(&nf.adjoint() * &(&j_out * &nf))).scale_re(-0.5)
}

/// Nominal drift `F = −iJM − ½JN†JN`.
pub fn drift(plant: &PlantModel) -> ComplexMatrix {
    let j = j_matrix(plant.modes());
    (&j * &plant.m.assemble()).scale(neg_i()) + damping(&plant.n)
}

/// Closed-loop drift `−iJ(M + K + E†ΔE) − ½JN†JN`. Omitted terms are zero.
pub fn closed_loop_drift(
    plant: &PlantModel,
    k: Option<&DoubledMatrix>,
    delta: Option<&DoubledMatrix>,
) -> Result<ComplexMatrix, ModelError> {
    let n = plant.modes();
    let mut h = plant.m.assemble();
    if let Some(k) = k {
        if k.n() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "K has {} modes, plant has {n}",
                k.n()
            )));
        }
        h += &k.assemble();
    }
    if let Some(d) = delta {
        h += &perturbation_hamiltonian(plant, d)?;
    }
    let j = j_matrix(n);
    Ok((&j * &h).scale(neg_i()) + damping(&plant.n))
}

/// `E†ΔE` after checking `Δ` against the admissibility radius.
pub fn perturbation_hamiltonian(
    plant: &PlantModel,
    delta: &DoubledMatrix,
) -> Result<ComplexMatrix, ModelError> {
    let q = plant.quadratic()?;
    if delta.n() != q.e.outputs() {
        return Err(ModelError::DimensionMismatch(format!(
            "Δ is {0}x{0} blocks, E has {1} outputs",
            delta.n(),
            q.e.outputs()
        )));
    }
    let d = delta.assemble();
    let norm = spectral_norm(&d)?;
    if norm > q.radius() + DELTA_RADIUS_SLACK {
        return Err(ModelError::InadmissibleDelta {
            norm,
            radius: q.radius(),
        });
    }
    let e = q.e_full();
    Ok(&e.adjoint() * &(&d * &e))
}

/// Diffusion term `D = J N† diag(I_m, 0) N J` of the second-moment dynamics.
/// `Tr(P·D)` reproduces the constant term of the Lindblad generator acting
/// on `[a; a#]† P [a; a#]` for every structured `P`.
pub fn diffusion(n: &CouplingMatrix) -> ComplexMatrix {
    let m = n.outputs();
    let mut sel = vec![1.0; m];
    sel.extend(std::iter::repeat_n(0.0, m));
    let sel = ComplexMatrix::from_real_diag(&sel);
    let nf = n.assemble();
    let j = j_matrix(n.modes());
    let d = &j * &(&nf.adjoint() * &(&sel * &(&nf * &j)));
    d.hermitian_part()
}

/// Real trace of a product that must be real; larger imaginary residues are
/// reported as assembly errors.
pub fn real_trace(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64, ModelError> {
    let t = a.trace_product(b);
    let scale = 1.0_f64.max(a.frobenius_norm() * b.frobenius_norm());
    if t.im.abs() > TRACE_IMAG_TOL * scale {
        return Err(ModelError::ImaginaryResidue(t.im));
    }
    Ok(t.re)
}

/// `λ̃ = Tr(P J N† diag(I,0) N J)` for structured `P ≻ 0`.
pub fn lambda_tilde(p: &DoubledMatrix, n: &CouplingMatrix) -> Result<f64, ModelError> {
    let pf = p.assemble();
    let min = herm_eig(&pf)?.min();
    if min <= 0.0 {
        return Err(ModelError::NotPositiveDefinite { min_eigenvalue: min });
    }
    real_trace(&pf, &diffusion(n))
}

/// `μ = −Ẽ Σ J P J Ẽᵀ` for any full `2n×2n` matrix `P` (linear in `P`).
pub fn mu_constant(p: &ComplexMatrix, etilde: &ComplexMatrix) -> Result<Complex64, ModelError> {
    let n2 = etilde.cols();
    if etilde.rows() != 1 || p.shape() != (n2, n2) || !n2.is_multiple_of(2) {
        return Err(ModelError::DimensionMismatch(format!(
            "Ẽ is {}x{}, P is {}x{}",
            etilde.rows(),
            n2,
            p.rows(),
            p.cols()
        )));
    }
    let n = n2 / 2;
    let j = j_matrix(n);
    let s = swap_matrix(n);
    let v = &(&(&(etilde * &s) * &j) * p) * &(&j * &etilde.transpose());
    Ok(-v[(0, 0)])
}

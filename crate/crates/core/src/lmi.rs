//! Affine Hermitian matrix expressions over a real decision vector.
//!
//! Decision variables are scalars or structured doubled-up Hermitian
//! matrices. A doubled Hermitian `P = [[P1, P2], [P2#, P1#]]` with `n×n`
//! blocks has `2n² + n` real parameters: `n²` for Hermitian `P1` and
//! `n(n+1)` for complex symmetric `P2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::numkernel::{herm_eig, real_embed_unchecked, ComplexMatrix, NumError, RealMatrix};
use crate::qmodel::DoubledMatrix;
use crate::sdp::{Bound, RealAffineExpr, SdpProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmiError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("block grid is not Hermitian at ({row}, {col})")]
    NotHermitianGrid { row: usize, col: usize },
    #[error("expression is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum VariableKind {
    /// Scalar with `lower ≤ x ≤ upper`.
    Scalar { lower: Option<f64>, upper: Option<f64> },
    /// Doubled-up Hermitian matrix with `n×n` blocks.
    DoubledHermitian { n: usize },
}

impl VariableKind {
    fn len(&self) -> usize {
        match self {
            Self::Scalar { .. } => 1,
            Self::DoubledHermitian { n } => 2 * n * n + n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarId(usize);

#[derive(Clone, Debug, PartialEq)]
struct Variable {
    name: String,
    kind: VariableKind,
    offset: usize,
}

/// Ordered set of decision variables and their packing into `x ∈ ℝᵏ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionSpace {
    vars: Vec<Variable>,
    len: usize,
}

impl DecisionSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: VariableKind) -> VarId {
        let offset = self.len;
        self.len += kind.len();
        self.vars.push(Variable {
            name: name.into(),
            kind,
            offset,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn scalar(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> VarId {
        self.add(name, VariableKind::Scalar { lower, upper })
    }

    pub fn doubled_hermitian(&mut self, name: impl Into<String>, n: usize) -> VarId {
        self.add(name, VariableKind::DoubledHermitian { n })
    }

    /// Total number of real parameters.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.vars[id.0].name
    }

    pub fn kind(&self, id: VarId) -> &VariableKind {
        &self.vars[id.0].kind
    }

    /// Index range of the variable inside `x`.
    pub fn range(&self, id: VarId) -> std::ops::Range<usize> {
        let v = &self.vars[id.0];
        v.offset..v.offset + v.kind.len()
    }

    /// Index of a scalar variable.
    pub fn index(&self, id: VarId) -> usize {
        let v = &self.vars[id.0];
        assert!(matches!(v.kind, VariableKind::Scalar { .. }), "{} is not a scalar", v.name);
        v.offset
    }

    /// Per-parameter bounds for the solver.
    pub fn bounds(&self) -> Vec<Bound> {
        let mut out = vec![Bound::default(); self.len];
        for v in &self.vars {
            if let VariableKind::Scalar { lower, upper } = v.kind {
                out[v.offset] = Bound { lower, upper };
            }
        }
        out
    }

    /// Full `2n×2n` basis matrices of a doubled Hermitian variable, one per
    /// real parameter, in packing order.
    pub fn basis(&self, id: VarId) -> Vec<ComplexMatrix> {
        match self.vars[id.0].kind {
            VariableKind::Scalar { .. } => vec![ComplexMatrix::identity(1)],
            VariableKind::DoubledHermitian { n } => doubled_basis(n),
        }
    }

    pub fn pack_doubled(&self, id: VarId, p: &DoubledMatrix, x: &mut [f64]) {
        let VariableKind::DoubledHermitian { n } = self.vars[id.0].kind else {
            panic!("{} is not a doubled Hermitian variable", self.vars[id.0].name);
        };
        assert_eq!(p.n(), n, "block size");
        let params = pack_params(p);
        x[self.range(id)].copy_from_slice(&params);
    }

    pub fn unpack_doubled(&self, id: VarId, x: &[f64]) -> DoubledMatrix {
        let VariableKind::DoubledHermitian { n } = self.vars[id.0].kind else {
            panic!("{} is not a doubled Hermitian variable", self.vars[id.0].name);
        };
        unpack_params(n, &x[self.range(id)])
    }

    pub fn value(&self, id: VarId, x: &[f64]) -> f64 {
        x[self.index(id)]
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Parameter order: `P1` diagonal, `P1` strict upper (re, im) pairs, then
/// `P2` upper triangle including the diagonal (re, im) pairs.
fn doubled_basis(n: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(2 * n * n + n);
    let mut push = |x1: ComplexMatrix, x2: ComplexMatrix| {
        let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
        m.set_block(0, 0, &x1);
        m.set_block(0, n, &x2);
        m.set_block(n, 0, &x2.conj());
        m.set_block(n, n, &x1.conj());
        out.push(m);
    };
    let z = || ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let mut x1 = z();
        x1[(k, k)] = c(1.0, 0.0);
        push(x1, z());
    }
    for k in 0..n {
        for l in k + 1..n {
            let mut x1 = z();
            x1[(k, l)] = c(1.0, 0.0);
            x1[(l, k)] = c(1.0, 0.0);
            push(x1, z());
            let mut x1 = z();
            x1[(k, l)] = c(0.0, 1.0);
            x1[(l, k)] = c(0.0, -1.0);
            push(x1, z());
        }
    }
    for k in 0..n {
        for l in k..n {
            for unit in [c(1.0, 0.0), c(0.0, 1.0)] {
                let mut x2 = z();
                x2[(k, l)] = unit;
                x2[(l, k)] = unit;
                push(z(), x2);
            }
        }
    }
    out
}

fn pack_params(p: &DoubledMatrix) -> Vec<f64> {
    let n = p.n();
    let (x1, x2) = (p.x1(), p.x2());
    let mut out = Vec::with_capacity(2 * n * n + n);
    for k in 0..n {
        out.push(x1[(k, k)].re);
    }
    for k in 0..n {
        for l in k + 1..n {
            out.push(x1[(k, l)].re);
            out.push(x1[(k, l)].im);
        }
    }
    for k in 0..n {
        for l in k..n {
            out.push(x2[(k, l)].re);
            out.push(x2[(k, l)].im);
        }
    }
    out
}

fn unpack_params(n: usize, x: &[f64]) -> DoubledMatrix {
    let mut x1 = ComplexMatrix::zeros(n, n);
    let mut x2 = ComplexMatrix::zeros(n, n);
    let mut it = x.iter().copied();
    let mut next = || it.next().expect("parameter count");
    for k in 0..n {
        x1[(k, k)] = c(next(), 0.0);
    }
    for k in 0..n {
        for l in k + 1..n {
            let v = c(next(), next());
            x1[(k, l)] = v;
            x1[(l, k)] = v.conj();
        }
    }
    for k in 0..n {
        for l in k..n {
            let v = c(next(), next());
            x2[(k, l)] = v;
            x2[(l, k)] = v;
        }
    }
    DoubledMatrix::hamiltonian(x1, x2).expect("unpacked blocks are structured by construction")
}

/// `C + Σ x_i A_i` with complex matrix coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMatrixExpr {
    rows: usize,
    cols: usize,
    constant: ComplexMatrix,
    coeffs: Vec<Option<ComplexMatrix>>,
}

impl AffineMatrixExpr {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        Self::constant(ComplexMatrix::zeros(rows, cols), nvars)
    }

    pub fn constant(c: ComplexMatrix, nvars: usize) -> Self {
        Self {
            rows: c.rows(),
            cols: c.cols(),
            constant: c,
            coeffs: vec![None; nvars],
        }
    }

    /// `x_id · m` for a scalar variable.
    pub fn scalar_term(space: &DecisionSpace, id: VarId, m: ComplexMatrix) -> Self {
        let mut out = Self::zeros(m.rows(), m.cols(), space.len());
        out.coeffs[space.index(id)] = Some(m);
        out
    }

    /// `f(V)` for a linear map `f` applied to the matrix variable `V`,
    /// expanded over the basis of `V`.
    pub fn map_variable(
        space: &DecisionSpace,
        id: VarId,
        mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix,
    ) -> Self {
        let range = space.range(id);
        let basis = space.basis(id);
        let images: Vec<ComplexMatrix> = basis.iter().map(&mut f).collect();
        let (rows, cols) = images[0].shape();
        let mut out = Self::zeros(rows, cols, space.len());
        for (k, img) in range.zip(images) {
            if img.max_abs() != 0.0 {
                out.coeffs[k] = Some(img);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn constant_part(&self) -> &ComplexMatrix {
        &self.constant
    }

    pub fn coefficient(&self, i: usize) -> Option<&ComplexMatrix> {
        self.coeffs[i].as_ref()
    }

    pub fn evaluate(&self, x: &[f64]) -> ComplexMatrix {
        assert_eq!(x.len(), self.nvars(), "decision vector length");
        let mut out = self.constant.clone();
        for (xi, a) in x.iter().zip(&self.coeffs) {
            if let Some(a) = a {
                if *xi != 0.0 {
                    out += &a.scale_re(*xi);
                }
            }
        }
        out
    }

    fn map_all(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let constant = f(&self.constant);
        Self {
            rows: constant.rows(),
            cols: constant.cols(),
            coeffs: self.coeffs.iter().map(|a| a.as_ref().map(&f)).collect(),
            constant,
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map_all(ComplexMatrix::adjoint)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_all(|m| m.scale_re(s))
    }

    /// `A · expr`
    pub fn left_mul(&self, a: &ComplexMatrix) -> Self {
        self.map_all(|m| a * m)
    }

    /// `expr · B`
    pub fn right_mul(&self, b: &ComplexMatrix) -> Self {
        self.map_all(|m| m * b)
    }

    /// `expr + expr†`
    pub fn plus_adjoint(&self) -> Self {
        self.map_all(|m| m + &m.adjoint())
    }

    pub fn add(&self, other: &Self) -> Result<Self, LmiError> {
        if (self.rows, self.cols, self.nvars()) != (other.rows, other.cols, other.nvars()) {
            return Err(LmiError::DimensionMismatch(format!(
                "cannot add {}x{} ({} vars) and {}x{} ({} vars)",
                self.rows,
                self.cols,
                self.nvars(),
                other.rows,
                other.cols,
                other.nvars()
            )));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (None, None) => None,
            })
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            constant: &self.constant + &other.constant,
            coeffs,
        })
    }

    pub fn add_constant(&self, c: &ComplexMatrix) -> Result<Self, LmiError> {
        self.add(&Self::constant(c.clone(), self.nvars()))
    }

    /// Largest Hermitian residual over the constant and every coefficient.
    pub fn hermitian_residual(&self) -> f64 {
        std::iter::once(&self.constant)
            .chain(self.coeffs.iter().flatten())
            .map(|m| m.hermitian_residual() / m.frobenius_norm().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Real symmetric form with the same spectrum, every multiplicity
    /// doubled. Fails for non-Hermitian expressions.
    pub fn realify(&self) -> Result<RealAffineExpr, LmiError> {
        if self.rows != self.cols {
            return Err(LmiError::DimensionMismatch(format!(
                "LMI expression is {}x{}",
                self.rows, self.cols
            )));
        }
        let res = self.hermitian_residual();
        if res > 1e-10 {
            return Err(LmiError::NotHermitian(res));
        }
        let emb = |m: &ComplexMatrix| real_embed_unchecked(&m.hermitian_part());
        Ok(RealAffineExpr::new(
            emb(&self.constant),
            self.coeffs
                .iter()
                .map(|a| a.as_ref().map(emb).filter(|m: &RealMatrix| !m.is_zero()))
                .collect(),
        ))
    }
}

/// Entry of a block grid.
#[derive(Clone, Debug)]
pub enum Block {
    Expr(AffineMatrixExpr),
    Const(ComplexMatrix),
    /// Zero block; its shape is inferred from the row and column.
    Zero,
}

impl From<AffineMatrixExpr> for Block {
    fn from(e: AffineMatrixExpr) -> Self {
        Self::Expr(e)
    }
}

impl From<ComplexMatrix> for Block {
    fn from(m: ComplexMatrix) -> Self {
        Self::Const(m)
    }
}

impl Block {
    fn shape(&self) -> Option<(usize, usize)> {
        match self {
            Self::Expr(e) => Some((e.rows, e.cols)),
            Self::Const(m) => Some(m.shape()),
            Self::Zero => None,
        }
    }
}

/// Assembles a Hermitian block matrix. The grid must be square, shapes must
/// agree along rows and columns, and block `(j, i)` must equal the adjoint
/// of block `(i, j)`.
pub fn assemble_blocks(grid: &[Vec<Block>], nvars: usize) -> Result<AffineMatrixExpr, LmiError> {
    let nb = grid.len();
    if nb == 0 || grid.iter().any(|r| r.len() != nb) {
        return Err(LmiError::DimensionMismatch("block grid must be square".into()));
    }
    let mut heights = vec![None; nb];
    let mut widths = vec![None; nb];
    for (i, row) in grid.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            if let Block::Expr(e) = b {
                if e.nvars() != nvars {
                    return Err(LmiError::DimensionMismatch(format!(
                        "block ({i}, {j}) has {} variables, expected {nvars}",
                        e.nvars()
                    )));
                }
            }
            if let Some((r, c)) = b.shape() {
                for (slot, v, what) in [(&mut heights[i], r, "row"), (&mut widths[j], c, "column")] {
                    match slot {
                        Some(prev) if *prev != v => {
                            return Err(LmiError::DimensionMismatch(format!(
                                "block ({i}, {j}) disagrees on {what} size: {v} vs {prev}"
                            )))
                        }
                        _ => *slot = Some(v),
                    }
                }
            }
        }
    }
    for k in 0..nb {
        let (h, w) = (heights[k], widths[k]);
        match (h, w) {
            (Some(h), Some(w)) if h != w => {
                return Err(LmiError::NotHermitianGrid { row: k, col: k });
            }
            (None, None) => {
                return Err(LmiError::DimensionMismatch(format!(
                    "block row/column {k} has no sized entry"
                )))
            }
            _ => {}
        }
    }
    let sizes: Vec<usize> = (0..nb).map(|k| heights[k].or(widths[k]).unwrap()).collect();
    let total: usize = sizes.iter().sum();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();

    let mut out = AffineMatrixExpr::zeros(total, total, nvars);
    let place = |dst: &mut ComplexMatrix, r: usize, c: usize, src: &ComplexMatrix| {
        dst.set_block(r, c, src);
    };
    for (i, row) in grid.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            match b {
                Block::Zero => {}
                Block::Const(m) => place(&mut out.constant, offsets[i], offsets[j], m),
                Block::Expr(e) => {
                    place(&mut out.constant, offsets[i], offsets[j], &e.constant);
                    for (k, a) in e.coeffs.iter().enumerate() {
                        if let Some(a) = a {
                            let slot = out.coeffs[k]
                                .get_or_insert_with(|| ComplexMatrix::zeros(total, total));
                            place(slot, offsets[i], offsets[j], a);
                        }
                    }
                }
            }
        }
    }
    let tol = 1e-10 * (1.0 + out.constant.frobenius_norm());
    let check = |m: &ComplexMatrix| -> Result<(), LmiError> {
        for i in 0..nb {
            for j in i..nb {
                let a = m.block(offsets[i], offsets[j], sizes[i], sizes[j]);
                let b = m.block(offsets[j], offsets[i], sizes[j], sizes[i]);
                if a.max_abs_diff(&b.adjoint()) > tol.max(1e-10 * a.frobenius_norm()) {
                    return Err(LmiError::NotHermitianGrid { row: j, col: i });
                }
            }
        }
        Ok(())
    };
    check(&out.constant)?;
    for a in out.coeffs.iter().flatten() {
        check(a)?;
    }
    Ok(out)
}

/// `λmax(expr(x))`; the LMI `expr ⪯ 0` holds iff this is non-positive.
pub fn feasibility_margin(expr: &AffineMatrixExpr, x: &[f64]) -> Result<f64, LmiError> {
    if x.len() != expr.nvars() {
        return Err(LmiError::DimensionMismatch(format!(
            "point has {} entries, expression has {} variables",
            x.len(),
            expr.nvars()
        )));
    }
    Ok(herm_eig(&expr.evaluate(x).hermitian_part())?.max())
}

/// A named LMI constraint `expr ⪯ −shift·I`.
#[derive(Clone, Debug)]
pub struct LmiConstraintSpec {
    pub label: String,
    pub expr: AffineMatrixExpr,
    pub shift: f64,
}

/// Linear objective plus LMI constraints over a [`DecisionSpace`].
#[derive(Clone, Debug)]
pub struct LmiProgram {
    pub space: DecisionSpace,
    pub objective: Vec<f64>,
    pub constraints: Vec<LmiConstraintSpec>,
}

impl LmiProgram {
    pub fn new(space: DecisionSpace) -> Self {
        let n = space.len();
        Self {
            space,
            objective: vec![0.0; n],
            constraints: Vec::new(),
        }
    }

    pub fn constrain(&mut self, label: impl Into<String>, expr: AffineMatrixExpr, shift: f64) {
        self.constraints.push(LmiConstraintSpec {
            label: label.into(),
            expr,
            shift,
        });
    }

    /// Real symmetric SDP with the variable bounds of the decision space.
    pub fn to_sdp(&self) -> Result<SdpProblem, LmiError> {
        let mut p = SdpProblem::new(self.objective.clone());
        p.bounds = self.space.bounds();
        for c in &self.constraints {
            p.add_constraint(c.label.clone(), c.expr.realify()?, c.shift);
        }
        Ok(p)
    }

    /// `λmax` of every constraint expression at `x`, in constraint order.
    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>, LmiError> {
        self.constraints
            .iter()
            .map(|c| feasibility_margin(&c.expr, x))
            .collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

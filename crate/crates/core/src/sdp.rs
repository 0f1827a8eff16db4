//! Dense log-barrier interior-point solver for small LMI problems.
//!
//! Problem form: minimise `cᵀx` subject to `A_j(x) + shift_j·I ⪯ 0` for
//! real symmetric affine `A_j`, and optional per-variable bounds. Strict
//! inequalities are expressed through a positive `shift_j`.
//!
//! Phase I minimises `s` subject to `A_j(x) + shift_j·I ⪯ s·I` (with
//! `s ≥ −1`); a central point with `s < 0` starts phase II. A phase-I lower
//! bound above the feasibility tolerance is the infeasibility witness.

use crate::numkernel::{
    backward_substitute_transpose, forward_substitute, herm_eig, NumError, RealMatrix,
};

/// Real symmetric affine matrix function `C + Σ x_i A_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealAffineExpr {
    pub dim: usize,
    pub constant: RealMatrix,
    /// One entry per decision variable; `None` is an all-zero coefficient.
    pub coeffs: Vec<Option<RealMatrix>>,
}

impl RealAffineExpr {
    pub fn new(constant: RealMatrix, coeffs: Vec<Option<RealMatrix>>) -> Self {
        let dim = constant.rows();
        assert_eq!(constant.cols(), dim, "constant must be square");
        for c in coeffs.iter().flatten() {
            assert_eq!((c.rows(), c.cols()), (dim, dim), "coefficient shape");
        }
        Self {
            dim,
            constant,
            coeffs,
        }
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn evaluate(&self, x: &[f64]) -> RealMatrix {
        assert_eq!(x.len(), self.coeffs.len(), "decision vector length");
        let mut out = self.constant.clone();
        for (xi, c) in x.iter().zip(&self.coeffs) {
            if let Some(c) = c {
                if *xi != 0.0 {
                    out.axpy(*xi, c);
                }
            }
        }
        out
    }
}

/// `expr(x) + shift·I ⪯ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiConstraint {
    pub label: String,
    pub expr: RealAffineExpr,
    pub shift: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<LmiConstraint>,
    pub bounds: Vec<Bound>,
    /// Starting point for phase I. Defaults to zero clipped into the bounds.
    pub initial_guess: Option<Vec<f64>>,
}

impl SdpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![Bound::default(); n],
            initial_guess: None,
        }
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, expr: RealAffineExpr, shift: f64) {
        assert_eq!(expr.nvars(), self.nvars(), "constraint variable count");
        self.constraints.push(LmiConstraint {
            label: label.into(),
            expr,
            shift,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lower: Option<f64>, upper: Option<f64>) {
        self.bounds[var] = Bound { lower, upper };
    }

    fn validate(&self) -> Result<(), String> {
        if self.constraints.is_empty() {
            return Err("problem has no LMI constraints".into());
        }
        if self.bounds.len() != self.nvars() {
            return Err("bounds length differs from variable count".into());
        }
        if let Some(g) = &self.initial_guess {
            if g.len() != self.nvars() {
                return Err("initial guess length differs from variable count".into());
            }
        }
        for c in &self.constraints {
            if c.expr.nvars() != self.nvars() {
                return Err(format!("constraint '{}' has wrong variable count", c.label));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("objective has non-finite entries".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpOptions {
    /// Newton-step budget for each phase.
    pub max_iterations: usize,
    /// Initial barrier weight on the objective.
    pub t0: f64,
    /// Barrier weight growth per outer iteration (barrier parameter μ ← μ/10).
    pub barrier_factor: f64,
    /// Stop when `θ/t ≤ gap_tol·(1 + |cᵀx|)`.
    pub gap_tol: f64,
    /// Centering stops when half the squared Newton decrement drops below this.
    pub newton_tol: f64,
    /// Phase-I optimum at or above this value certifies infeasibility.
    pub feasibility_tol: f64,
    /// Objective values below `−unbounded_threshold` report unboundedness.
    pub unbounded_threshold: f64,
    /// Implicit `|x_i| ≤ box_radius` for every side without an explicit
    /// bound. A solution beyond half this radius is reported as unbounded.
    pub box_radius: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            t0: 1.0,
            barrier_factor: 10.0,
            gap_tol: 1e-9,
            newton_tol: 1e-10,
            feasibility_tol: 1e-8,
            unbounded_threshold: 1e12,
            box_radius: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Largest eigenvalue over all constraint expressions at `x`, without
    /// their shifts.
    pub worst_margin: f64,
    /// Total Newton steps over both phases.
    pub iterations: usize,
    /// Final phase-I value; positive values witness infeasibility.
    pub phase1_value: f64,
    pub message: Option<String>,
}

/// One barrier block: slack `S(y) = S0 + Σ y_i S_i ≻ 0`.
#[derive(Clone, Debug)]
struct Block {
    s0: RealMatrix,
    terms: Vec<(usize, RealMatrix)>,
}

impl Block {
    fn dim(&self) -> usize {
        self.s0.rows()
    }

    fn slack(&self, y: &[f64]) -> RealMatrix {
        let mut s = self.s0.clone();
        for (i, m) in &self.terms {
            if y[*i] != 0.0 {
                s.axpy(y[*i], m);
            }
        }
        s
    }
}

/// Converts `A(x) + shift·I ⪯ 0` into the slack `−A(x) − shift·I`, with an
/// optional extra variable `s` entering as `+s·I`.
fn constraint_block(c: &LmiConstraint, s_index: Option<usize>) -> Block {
    let mut s0 = c.expr.constant.clone();
    s0.add_diagonal(c.shift);
    for v in s0.as_mut_slice() {
        *v = -*v;
    }
    let mut terms: Vec<(usize, RealMatrix)> = c
        .expr
        .coeffs
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.as_ref().filter(|m| !m.is_zero()).map(|m| (i, neg(m))))
        .collect();
    if let Some(si) = s_index {
        terms.push((si, RealMatrix::identity(c.expr.dim)));
    }
    Block { s0, terms }
}

fn neg(m: &RealMatrix) -> RealMatrix {
    let mut out = m.clone();
    for v in out.as_mut_slice() {
        *v = -*v;
    }
    out
}

fn scalar_block(constant: f64, terms: &[(usize, f64)]) -> Block {
    Block {
        s0: RealMatrix::from_rows(&[&[constant]]),
        terms: terms
            .iter()
            .map(|&(i, v)| (i, RealMatrix::from_rows(&[&[v]])))
            .collect(),
    }
}

fn bound_blocks(bounds: &[Bound], radius: f64, s_index: Option<usize>) -> Vec<Block> {
    let mut out = Vec::new();
    for (i, b) in bounds.iter().enumerate() {
        let b = Bound {
            lower: Some(b.lower.unwrap_or(-radius)),
            upper: Some(b.upper.unwrap_or(radius)),
        };
        let mut push = |constant: f64, coef: f64| {
            let mut terms = vec![(i, coef)];
            if let Some(si) = s_index {
                terms.push((si, 1.0));
            }
            out.push(scalar_block(constant, &terms));
        };
        // x_i - lo > 0
        if let Some(lo) = b.lower {
            push(-lo, 1.0);
        }
        // hi - x_i > 0
        if let Some(hi) = b.upper {
            push(hi, -1.0);
        }
    }
    out
}

fn max_sym_eigenvalue(m: &RealMatrix) -> f64 {
    match herm_eig(&m.to_complex()) {
        Ok(e) => e.max(),
        Err(_) => f64::INFINITY,
    }
}

enum CenterError {
    NotInterior,
    Singular,
    Budget,
}

struct Barrier<'a> {
    blocks: &'a [Block],
    c: &'a [f64],
    theta: f64,
}

impl Barrier<'_> {
    /// `−Σ log det S_j(y)`, or `None` outside the domain.
    fn barrier(&self, y: &[f64]) -> Option<f64> {
        let mut acc = 0.0;
        for b in self.blocks {
            let l = b.slack(y).cholesky()?;
            for k in 0..l.rows() {
                acc -= 2.0 * l[(k, k)].ln();
            }
        }
        Some(acc)
    }

    fn objective(&self, y: &[f64]) -> f64 {
        self.c.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// Gradient and Hessian of the barrier alone.
    fn derivatives(&self, y: &[f64]) -> Result<(Vec<f64>, RealMatrix), CenterError> {
        let k = y.len();
        let mut grad = vec![0.0; k];
        let mut hess = RealMatrix::zeros(k, k);
        for b in self.blocks {
            let l = b.slack(y).cholesky().ok_or(CenterError::NotInterior)?;
            let ws: Vec<(usize, RealMatrix)> =
                b.terms.iter().map(|(i, m)| (*i, congruence(&l, m))).collect();
            for (a, (i, wi)) in ws.iter().enumerate() {
                grad[*i] -= trace(wi);
                for (j, wj) in ws.iter().skip(a) {
                    let v = frob_inner(wi, wj);
                    hess[(*i, *j)] += v;
                    if i != j {
                        hess[(*j, *i)] += v;
                    }
                }
            }
        }
        Ok((grad, hess))
    }

    /// Barrier weight whose central point is closest to `y` in the local
    /// Hessian norm: `t = −cᵀH⁻¹g / cᵀH⁻¹c`.
    fn initial_weight(&self, y: &[f64]) -> Option<f64> {
        let (g, h) = self.derivatives(y).ok()?;
        let neg_c: Vec<f64> = self.c.iter().map(|v| -v).collect();
        let hc = solve_newton(&h, &neg_c)?;
        let chc: f64 = self.c.iter().zip(&hc).map(|(a, b)| a * b).sum();
        let chg: f64 = g.iter().zip(&hc).map(|(a, b)| a * b).sum();
        let t = -chg / chc;
        (t.is_finite() && t > 0.0 && chc > 0.0).then_some(t)
    }

    /// Newton centering for `t·cᵀy − Σ log det S_j(y)`.
    fn center(
        &self,
        t: f64,
        y: &mut [f64],
        budget: &mut usize,
        tol: f64,
        mut abort: impl FnMut(&[f64]) -> bool,
    ) -> Result<(), CenterError> {
        loop {
            if abort(y) {
                return Ok(());
            }
            let (mut grad, hess) = self.derivatives(y)?;
            for (g, ci) in grad.iter_mut().zip(self.c) {
                *g += t * ci;
            }
            let step = solve_newton(&hess, &grad).ok_or(CenterError::Singular)?;
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, d)| g * d).sum::<f64>();
            if decrement / 2.0 <= tol {
                return Ok(());
            }
            if *budget == 0 {
                return Err(CenterError::Budget);
            }
            *budget -= 1;

            let f0 = t * self.objective(y) + self.barrier(y).ok_or(CenterError::NotInterior)?;
            let slope = -decrement;
            let mut alpha = 1.0;
            let mut trial = y.to_vec();
            loop {
                for ((tr, yi), di) in trial.iter_mut().zip(y.iter()).zip(&step) {
                    *tr = yi + alpha * di;
                }
                if let Some(bv) = self.barrier(&trial) {
                    let f1 = t * self.objective(&trial) + bv;
                    if f1 <= f0 + 0.25 * alpha * slope {
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-16 {
                    // No progress possible at this precision; accept the point.
                    return Ok(());
                }
            }
            if trial.as_slice() == &*y {
                // Step is below the floating-point resolution of y.
                return Ok(());
            }
            y.copy_from_slice(&trial);
        }
    }
}

/// `L⁻¹ M L⁻ᵀ` for lower-triangular `L`.
fn congruence(l: &RealMatrix, m: &RealMatrix) -> RealMatrix {
    let n = l.rows();
    // X = L^{-1} M (column by column), then W = L^{-1} Xᵀ.
    let mut x = RealMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            col[i] = m[(i, j)];
        }
        forward_substitute(l, &mut col);
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    let mut w = RealMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            col[i] = x[(j, i)];
        }
        forward_substitute(l, &mut col);
        for i in 0..n {
            w[(i, j)] = col[i];
        }
    }
    w
}

fn trace(m: &RealMatrix) -> f64 {
    (0..m.rows()).map(|i| m[(i, i)]).sum()
}

fn frob_inner(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// Solves `H d = −g` with Jacobi scaling and escalating diagonal
/// regularisation when `H` is numerically singular.
fn solve_newton(h: &RealMatrix, g: &[f64]) -> Option<Vec<f64>> {
    let k = g.len();
    let scale: Vec<f64> = (0..k)
        .map(|i| {
            let d = h[(i, i)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut hs = RealMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            hs[(i, j)] = h[(i, j)] * scale[i] * scale[j];
        }
    }
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut m = hs.clone();
        m.add_diagonal(reg);
        if let Some(l) = m.cholesky() {
            let mut d: Vec<f64> = (0..k).map(|i| -g[i] * scale[i]).collect();
            forward_substitute(&l, &mut d);
            backward_substitute_transpose(&l, &mut d);
            for (di, si) in d.iter_mut().zip(&scale) {
                *di *= si;
            }
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

fn default_start(problem: &SdpProblem) -> Vec<f64> {
    if let Some(g) = &problem.initial_guess {
        return g.clone();
    }
    problem
        .bounds
        .iter()
        .map(|b| {
            let mut v: f64 = 0.0;
            if let Some(lo) = b.lower {
                v = if lo >= 0.0 { lo.max(1.0) } else { v.max(lo) };
            }
            if let Some(hi) = b.upper {
                v = v.min(hi);
            }
            v
        })
        .collect()
}

fn failure(x: Vec<f64>, iterations: usize, phase1_value: f64, msg: impl Into<String>) -> SdpSolution {
    SdpSolution {
        status: SdpStatus::NumericalFailure,
        x,
        objective_value: f64::NAN,
        worst_margin: f64::NAN,
        iterations,
        phase1_value,
        message: Some(msg.into()),
    }
}

/// Solves the problem; every outcome, including numerical trouble, is
/// reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, options: &SdpOptions) -> SdpSolution {
    let n = problem.nvars();
    if let Err(e) = problem.validate() {
        return failure(vec![0.0; n], 0, f64::NAN, e);
    }

    // ---- phase I ----
    let s_idx = n;
    let x0 = default_start(problem);
    let mut blocks1: Vec<Block> = problem
        .constraints
        .iter()
        .map(|c| constraint_block(c, Some(s_idx)))
        .collect();
    blocks1.extend(bound_blocks(&problem.bounds, options.box_radius, Some(s_idx)));
    // s ≥ −1 keeps phase I bounded.
    blocks1.push(scalar_block(1.0, &[(s_idx, 1.0)]));

    let mut worst0 = f64::NEG_INFINITY;
    for b in &blocks1[..blocks1.len() - 1] {
        let mut y = x0.clone();
        y.push(0.0);
        let s = b.slack(&y);
        // slack = -(A + shift) at s = 0, so the violation is λmax(-slack)
        worst0 = worst0.max(max_sym_eigenvalue(&neg(&s)));
    }
    if !worst0.is_finite() {
        return failure(x0, 0, f64::NAN, "non-finite constraint values at the start point");
    }
    let mut y: Vec<f64> = x0.clone();
    y.push(worst0.max(0.0) + 1.0);
    let mut c1 = vec![0.0; n];
    c1.push(1.0);
    let theta1: f64 = blocks1.iter().map(Block::dim).sum::<usize>() as f64;
    let bar1 = Barrier {
        blocks: &blocks1,
        c: &c1,
        theta: theta1,
    };
    let mut budget = options.max_iterations;
    let mut t = options.t0;
    let phase1_value;
    loop {
        let res = bar1.center(t, &mut y, &mut budget, options.newton_tol, |y| y[n] < 0.0);
        let used = options.max_iterations - budget;
        match res {
            Ok(()) => {}
            Err(CenterError::Budget) => {
                return failure(y[..n].to_vec(), used, y[n], "phase I iteration budget exhausted")
            }
            Err(CenterError::Singular) => {
                return failure(y[..n].to_vec(), used, y[n], "phase I Newton system is singular")
            }
            Err(CenterError::NotInterior) => {
                return failure(y[..n].to_vec(), used, y[n], "phase I left the barrier domain")
            }
        }
        let s = y[n];
        let gap = bar1.theta / t;
        if s < 0.0 {
            phase1_value = s;
            break;
        }
        if s - gap >= options.feasibility_tol {
            return SdpSolution {
                status: SdpStatus::Infeasible,
                x: y[..n].to_vec(),
                objective_value: f64::NAN,
                worst_margin: f64::NAN,
                iterations: used,
                phase1_value: s,
                message: None,
            };
        }
        if gap <= options.gap_tol {
            return failure(
                y[..n].to_vec(),
                used,
                s,
                format!("phase I optimum {s:.3e} is on the feasibility boundary"),
            );
        }
        t *= options.barrier_factor;
    }
    let phase1_iters = options.max_iterations - budget;

    // ---- phase II ----
    let mut blocks2: Vec<Block> = problem
        .constraints
        .iter()
        .map(|c| constraint_block(c, None))
        .collect();
    blocks2.extend(bound_blocks(&problem.bounds, options.box_radius, None));
    let theta2: f64 = blocks2.iter().map(Block::dim).sum::<usize>() as f64;
    let bar2 = Barrier {
        blocks: &blocks2,
        c: &problem.objective,
        theta: theta2,
    };
    let mut x = y[..n].to_vec();
    let mut budget = options.max_iterations;
    let mut t = bar2.initial_weight(&x).unwrap_or(options.t0);
    let threshold = -options.unbounded_threshold;
    loop {
        let mut unbounded = false;
        let res = bar2.center(t, &mut x, &mut budget, options.newton_tol, |x| {
            let below = bar2.objective(x) < threshold;
            unbounded |= below;
            below
        });
        let used = phase1_iters + options.max_iterations - budget;
        if unbounded {
            return SdpSolution {
                status: SdpStatus::Unbounded,
                objective_value: bar2.objective(&x),
                worst_margin: worst_margin(problem, &x),
                x,
                iterations: used,
                phase1_value,
                message: None,
            };
        }
        match res {
            Ok(()) => {}
            Err(CenterError::Budget) => {
                return failure(x, used, phase1_value, "phase II iteration budget exhausted")
            }
            Err(CenterError::Singular) => {
                return failure(x, used, phase1_value, "phase II Newton system is singular")
            }
            Err(CenterError::NotInterior) => {
                return failure(x, used, phase1_value, "phase II left the barrier domain")
            }
        }
        let obj = bar2.objective(&x);
        if bar2.theta / t <= options.gap_tol * (1.0 + obj.abs()) {
            let escaped = problem.bounds.iter().zip(&x).any(|(b, &xi)| {
                (b.lower.is_none() && xi < -0.5 * options.box_radius)
                    || (b.upper.is_none() && xi > 0.5 * options.box_radius)
            });
            return SdpSolution {
                status: if escaped {
                    SdpStatus::Unbounded
                } else {
                    SdpStatus::Optimal
                },
                objective_value: obj,
                worst_margin: worst_margin(problem, &x),
                x,
                iterations: used,
                phase1_value,
                message: None,
            };
        }
        t *= options.barrier_factor;
    }
}

fn worst_margin(problem: &SdpProblem, x: &[f64]) -> f64 {
    problem
        .constraints
        .iter()
        .map(|c| max_sym_eigenvalue(&c.expr.evaluate(x)))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMargin {
    pub label: String,
    /// `λmax(A(x))`.
    pub margin: f64,
    /// `λmax(A(x)) + shift`; non-positive when the requested strictness holds.
    pub shifted_margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub margins: Vec<ConstraintMargin>,
    pub max_margin: f64,
    pub objective: f64,
    pub max_bound_violation: f64,
    pub pass: bool,
}

/// Tolerance used by [`check_certificate`].
pub const CERTIFICATE_TOL: f64 = 1e-8;

/// Re-evaluates every constraint at the returned point with the Hermitian
/// eigensolver.
pub fn check_certificate(problem: &SdpProblem, solution: &SdpSolution) -> Result<CertificateReport, NumError> {
    check_point(problem, &solution.x)
}

pub fn check_point(problem: &SdpProblem, x: &[f64]) -> Result<CertificateReport, NumError> {
    if x.len() != problem.nvars() {
        return Err(NumError::DimensionMismatch(format!(
            "point has {} entries, problem has {} variables",
            x.len(),
            problem.nvars()
        )));
    }
    let mut margins = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let m = herm_eig(&c.expr.evaluate(x).to_complex())?.max();
        margins.push(ConstraintMargin {
            label: c.label.clone(),
            margin: m,
            shifted_margin: m + c.shift,
        });
    }
    let max_margin = margins.iter().map(|m| m.margin).fold(f64::NEG_INFINITY, f64::max);
    let max_bound_violation = problem
        .bounds
        .iter()
        .zip(x)
        .map(|(b, &xi)| {
            let lo = b.lower.map_or(0.0, |lo| (lo - xi).max(0.0));
            let hi = b.upper.map_or(0.0, |hi| (xi - hi).max(0.0));
            lo.max(hi)
        })
        .fold(0.0, f64::max);
    let objective = problem.objective.iter().zip(x).map(|(a, b)| a * b).sum();
    Ok(CertificateReport {
        pass: max_margin <= CERTIFICATE_TOL && max_bound_violation <= CERTIFICATE_TOL,
        margins,
        max_margin,
        objective,
        max_bound_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_expr(constant: f64, coeffs: &[f64]) -> RealAffineExpr {
        RealAffineExpr::new(
            RealMatrix::from_rows(&[&[constant]]),
            coeffs.iter().map(|&c| Some(RealMatrix::from_rows(&[&[c]]))).collect(),
        )
    }

    /// min x s.t. [[x, 1], [1, x]] ⪰ 0.
    fn toy_two_by_two() -> SdpProblem {
        let mut p = SdpProblem::new(vec![1.0]);
        let expr = RealAffineExpr::new(
            RealMatrix::from_rows(&[&[0.0, -1.0], &[-1.0, 0.0]]),
            vec![Some(RealMatrix::from_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]))],
        );
        p.add_constraint("psd", expr, 0.0);
        p
    }

    #[test]
    fn two_by_two_toy_optimum_is_one() {
        let sol = solve(&toy_two_by_two(), &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Optimal, "{sol:?}");
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "{}", sol.x[0]);
        let rep = check_certificate(&toy_two_by_two(), &sol).unwrap();
        assert!(rep.pass);
        assert!(rep.max_margin.abs() < 1e-6);
    }

    #[test]
    fn scalar_toy_optimum_is_three_and_perturbation_fails_check() {
        let mut p = SdpProblem::new(vec![-1.0]);
        p.add_constraint("x <= 3", scalar_expr(-3.0, &[1.0]), 0.0);
        let sol = solve(&p, &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-6);
        let mut bumped = sol.clone();
        bumped.x[0] = sol.x[0] + 1e-3;
        let rep = check_certificate(&p, &bumped).unwrap();
        assert!(!rep.pass);
        assert!((rep.max_margin - 1e-3).abs() < 2e-6, "{}", rep.max_margin);
    }

    #[test]
    fn identity_constraint_is_infeasible() {
        let mut p = SdpProblem::new(vec![0.0]);
        let expr = RealAffineExpr::new(RealMatrix::identity(2), vec![None]);
        p.add_constraint("I <= 0", expr, 0.0);
        let sol = solve(&p, &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert!(sol.phase1_value >= 1e-8);
    }

    #[test]
    fn unbounded_objective_is_reported() {
        let mut p = SdpProblem::new(vec![1.0]);
        p.add_constraint("x <= 3", scalar_expr(-3.0, &[1.0]), 0.0);
        let sol = solve(&p, &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Unbounded);
    }

    #[test]
    fn bounds_are_respected() {
        let mut p = SdpProblem::new(vec![1.0]);
        p.add_constraint("x <= 3", scalar_expr(-3.0, &[1.0]), 0.0);
        p.set_bounds(0, Some(-2.0), None);
        let sol = solve(&p, &SdpOptions::default());
        assert_eq!(sol.status, SdpStatus::Optimal, "{sol:?}");
        assert!((sol.x[0] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn strict_shift_moves_optimum() {
        let mut p = SdpProblem::new(vec![-1.0]);
        p.add_constraint("x <= 3", scalar_expr(-3.0, &[1.0]), 0.5);
        let sol = solve(&p, &SdpOptions::default());
        assert!((sol.x[0] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn solver_is_deterministic() {
        let a = solve(&toy_two_by_two(), &SdpOptions::default());
        let b = solve(&toy_two_by_two(), &SdpOptions::default());
        assert_eq!(a, b);
    }
}

//! Shared generators for integration tests.

#![allow(dead_code)]

use qgcc_core::numkernel::RealMatrix;
use qgcc_core::sdp::{RealAffineExpr, SdpProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symmetric(d: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    let mut m = RealMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v: f64 = rng.gen_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_pd(d: usize, floor: f64, rng: &mut ChaCha8Rng) -> RealMatrix {
    let b = random_symmetric(d, rng);
    let mut out = RealMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            out[(i, j)] = (0..d).map(|k| b[(i, k)] * b[(k, j)]).sum::<f64>();
        }
    }
    out.add_diagonal(floor);
    out
}

fn inner(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

/// `A(x) ⪯ 0` with a known interior point: `A(x0) = −S`, `S ⪰ 0.1·I`. The
/// variables are boxed so that a random objective stays bounded.
pub fn feasible_problem(seed: u64) -> (SdpProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(2..=5);
    let k = rng.gen_range(1..=4);
    let coeffs: Vec<RealMatrix> = (0..k).map(|_| random_symmetric(d, &mut rng)).collect();
    let x0: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut c = random_pd(d, 0.1, &mut rng);
    for v in c.as_mut_slice() {
        *v = -*v;
    }
    for (a, xi) in coeffs.iter().zip(&x0) {
        c.axpy(-xi, a);
    }
    let objective = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut p = SdpProblem::new(objective);
    p.add_constraint("generated", RealAffineExpr::new(c, coeffs.into_iter().map(Some).collect()), 0.0);
    for i in 0..k {
        p.set_bounds(i, Some(-10.0), Some(10.0));
    }
    (p, x0)
}

/// `A(x) ⪯ 0` with a Farkas witness `Z ≻ 0`: `⟨Z, A_i⟩ = 0` for every
/// coefficient and `⟨Z, C⟩ = 1`, so `⟨Z, A(x)⟩ = 1` for all `x`.
pub fn infeasible_problem(seed: u64) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000);
    let d = rng.gen_range(2..=5);
    let k = rng.gen_range(1..=4);
    let mut z = random_pd(d, 0.2, &mut rng);
    let scale = 1.0 / (0..d).map(|i| z[(i, i)]).sum::<f64>();
    for v in z.as_mut_slice() {
        *v *= scale;
    }
    let zz = inner(&z, &z);
    let project = |m: &mut RealMatrix, target: f64| {
        let a = (target - inner(&z, m)) / zz;
        m.axpy(a, &z);
    };
    let coeffs: Vec<RealMatrix> = (0..k)
        .map(|_| {
            let mut a = random_symmetric(d, &mut rng);
            project(&mut a, 0.0);
            a
        })
        .collect();
    let mut c = random_symmetric(d, &mut rng);
    project(&mut c, 1.0);
    let objective = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut p = SdpProblem::new(objective);
    p.add_constraint("generated", RealAffineExpr::new(c, coeffs.into_iter().map(Some).collect()), 0.0);
    p
}

use qgcc_core::lmi::{assemble_blocks, AffineMatrixExpr, Block, DecisionSpace, LmiProgram};
use qgcc_core::numkernel::{psd_sqrt, ComplexMatrix};
use qgcc_core::qmodel::{diffusion, drift, j_matrix, PlantModel};
use qgcc_core::sdp::{solve, SdpOptions, SdpStatus};
use qgcc_core::Complex64;

pub const EPS: f64 = 1e-6;

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GridBest {
    pub value: f64,
    pub at: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: Option<GridBest>,
    pub feasible: usize,
    pub total: usize,
}

fn record(best: &mut Option<GridBest>, value: f64, at: (f64, f64)) {
    if best.is_none_or(|b| value < b.value) {
        *best = Some(GridBest { value, at });
    }
}

/// Quadratic-class certificate with `τ` held fixed: an SDP in `P` alone,
/// assembled directly from `F`, `E`, `R`, `D`.
pub fn tau_grid_oracle(plant: &PlantModel, taus: &[f64]) -> GridOutcome {
    let q = plant.quadratic().expect("quadratic plant");
    let n = plant.modes();
    let f = drift(plant);
    let j = j_matrix(n);
    let e = q.e_full();
    let r = plant.weights.r.assemble();
    let d = diffusion(&plant.n);
    let rows = e.rows();
    let mut out = GridOutcome {
        best: None,
        feasible: 0,
        total: taus.len(),
    };
    for &tau in taus {
        let u = 1.0 / (tau * tau);
        let mut space = DecisionSpace::new();
        let p = space.doubled_hermitian("P", n);
        let nv = space.len();
        let ee = (&e.adjoint() * &e).scale_re(u / (q.gamma * q.gamma));
        let b11 = AffineMatrixExpr::map_variable(&space, p, |b| &(&f.adjoint() * b) + &(b * &f))
            .add_constant(&(&ee + &r))
            .unwrap();
        let jet = &j * &e.adjoint();
        let b12 = AffineMatrixExpr::map_variable(&space, p, |b| (b * &jet).scale_re(2.0));
        let b21 = b12.adjoint();
        let main = assemble_blocks(
            &[
                vec![b11.into(), b12.into()],
                vec![b21.into(), Block::Const(ComplexMatrix::identity(rows).scale_re(-u))],
            ],
            nv,
        )
        .unwrap();
        let neg_p = AffineMatrixExpr::map_variable(&space, p, |b| b.scale_re(-1.0));
        let mut prog = LmiProgram::new(space);
        prog.constrain("certificate", main, EPS);
        prog.constrain("P positive", neg_p, EPS);
        let basis = prog.space.basis(p);
        for (k, b) in prog.space.range(p).zip(&basis) {
            prog.objective[k] = b.trace_product(&d).re;
        }
        let sol = solve(&prog.to_sdp().unwrap(), &SdpOptions::default());
        if sol.status == SdpStatus::Optimal {
            out.feasible += 1;
            record(&mut out.best, sol.objective_value + q.delta * u, (tau, u));
        }
    }
    out
}

/// Design conditions with `q` and `s` held fixed: a feasibility problem in
/// `Y` with the `−I/ρ` block kept as is. Feasible cells give
/// `ξ = B/q + δ/s` directly.
pub fn qs_grid_oracle(plant: &PlantModel, qs: &[f64], ss: &[f64]) -> GridOutcome {
    let qu = plant.quadratic().expect("quadratic plant");
    let n = plant.modes();
    let dim = 2 * n;
    let f = drift(plant);
    let j = j_matrix(n);
    let e = qu.e_full();
    let rows = e.rows();
    let r_half = psd_sqrt(&plant.weights.r.assemble()).unwrap();
    let b = diffusion(&plant.n).trace().re;
    let rho = plant.weights.rho;
    let i_c = Complex64::new(0.0, 1.0);
    let mut out = GridOutcome {
        best: None,
        feasible: 0,
        total: qs.len() * ss.len(),
    };
    for &q in qs {
        for &s in ss {
            let mut space = DecisionSpace::new();
            let y = space.doubled_hermitian("Y", n);
            let nv = space.len();
            let konst = &(&f.adjoint() + &f).scale_re(q) + &(&(&j * &e.adjoint()) * &(&e * &j)).scale_re(4.0 * s);
            let a = AffineMatrixExpr::map_variable(&space, y, |m| (&(m * &j) - &(&j * m)).scale(i_c))
                .add_constant(&konst)
                .unwrap();
            let yv = AffineMatrixExpr::map_variable(&space, y, |m| m.clone());
            let qr = r_half.scale_re(q);
            let main = assemble_blocks(
                &[
                    vec![a.into(), yv.clone().into(), Block::Const(qr.clone()), Block::Const(e.adjoint().scale_re(q))],
                    vec![yv.into(), Block::Const(ComplexMatrix::identity(dim).scale_re(-1.0 / rho)), Block::Zero, Block::Zero],
                    vec![Block::Const(qr), Block::Zero, Block::Const(ComplexMatrix::identity(dim).scale_re(-1.0)), Block::Zero],
                    vec![
                        Block::Const(e.scale_re(q)),
                        Block::Zero,
                        Block::Zero,
                        Block::Const(ComplexMatrix::identity(rows).scale_re(-qu.gamma * qu.gamma * s)),
                    ],
                ],
                nv,
            )
            .unwrap();
            let mut prog = LmiProgram::new(space);
            prog.constrain("design", main, EPS);
            let sol = solve(&prog.to_sdp().unwrap(), &SdpOptions::default());
            if sol.status == SdpStatus::Optimal {
                out.feasible += 1;
                record(&mut out.best, b / q + qu.delta / s, (q, s));
            }
        }
    }
    out
}

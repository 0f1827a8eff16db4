//! Dense complex linear algebra used by every other module.

mod eig;
mod matrix;

use num_complex::Complex64;
use thiserror::Error;

pub use eig::{eigenvalues, herm_eig, herm_eig_with, hessenberg, spectral_abscissa, EigResult};
pub use matrix::{backward_substitute_transpose, forward_substitute, ComplexMatrix, RealMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("matrix is not Hermitian (residual {residual:.3e}, norm {norm:.3e})")]
    NotHermitian { residual: f64, norm: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },
    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },
    #[error("linear system is singular to working precision")]
    SingularSystem,
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("expected a square matrix, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Relative tolerances of the numerical kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// `‖A − A†‖ ≤ hermitian·‖A‖` is accepted as Hermitian.
    pub hermitian: f64,
    /// Eigenvalues above `−psd_clip·‖A‖` are clipped to zero by [`psd_sqrt`].
    pub psd_clip: f64,
    /// Eigenvalues below `−psd_reject·‖A‖` make [`psd_sqrt`] fail.
    pub psd_reject: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            psd_clip: 1e-12,
            psd_reject: 1e-8,
        }
    }
}

/// Solves `A X = B` by LU factorisation with partial pivoting.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare(a.rows(), a.cols()));
    }
    if a.rows() != b.rows() {
        return Err(NumError::DimensionMismatch(format!(
            "lhs is {}x{}, rhs has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let n = a.rows();
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(NumError::SingularSystem);
    }
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pmax <= 1e-14 * scale {
            return Err(NumError::SingularSystem);
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        let d = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            lu[(i, k)] = f;
            for j in k + 1..n {
                let t = lu[(k, j)];
                lu[(i, j)] -= f * t;
            }
            for j in 0..x.cols() {
                let t = x[(k, j)];
                x[(i, j)] -= f * t;
            }
        }
    }
    for j in 0..x.cols() {
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Solves `AΣ + ΣA† + D = 0` for Hurwitz `A` and Hermitian `D` through the
/// Kronecker-sum system `(I⊗A + Ā⊗I) vec(Σ) = −vec(D)`.
pub fn solve_lyapunov(a: &ComplexMatrix, d: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare(a.rows(), a.cols()));
    }
    let n = a.rows();
    if d.shape() != (n, n) {
        return Err(NumError::DimensionMismatch(format!(
            "Lyapunov: A is {n}x{n}, D is {}x{}",
            d.rows(),
            d.cols()
        )));
    }
    let dn = d.frobenius_norm();
    let dres = d.hermitian_residual();
    if dres > Tolerances::default().hermitian * dn {
        return Err(NumError::NotHermitian {
            residual: dres,
            norm: dn,
        });
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(NumError::NotHurwitz { abscissa });
    }
    // Column-stacked vec: index(i, j) = j*n + i.
    let nn = n * n;
    let mut k = ComplexMatrix::zeros(nn, nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            // (I⊗A): sum_l A[i,l] Σ[l,j]
            for l in 0..n {
                k[(row, j * n + l)] += a[(i, l)];
            }
            // (Ā⊗I): sum_l conj(A[j,l]) Σ[i,l]
            for l in 0..n {
                k[(row, l * n + i)] += a[(j, l)].conj();
            }
        }
    }
    let rhs = ComplexMatrix::from_fn(nn, 1, |r, _| -d[(r % n, r / n)]);
    let v = solve_linear(&k, &rhs)?;
    let sigma = ComplexMatrix::from_fn(n, n, |i, j| v[(j * n + i, 0)]);
    Ok(sigma.hermitian_part())
}

/// Hermitian PSD square root.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    let tol = Tolerances::default();
    let e = herm_eig_with(a, &tol)?;
    let norm = a.frobenius_norm();
    if e.min() < -tol.psd_reject * norm {
        return Err(NumError::NotPsd {
            min_eigenvalue: e.min(),
        });
    }
    let s = e.reconstruct_with(|x| if x > 0.0 { x.sqrt() } else { 0.0 });
    Ok(s.hermitian_part())
}

/// `[[Re H, −Im H], [Im H, Re H]]`: a real symmetric matrix whose spectrum is
/// the spectrum of `H` with every multiplicity doubled.
pub fn real_embed(h: &ComplexMatrix) -> Result<RealMatrix, NumError> {
    let norm = h.frobenius_norm();
    let residual = h.hermitian_residual();
    if residual > Tolerances::default().hermitian * norm {
        return Err(NumError::NotHermitian { residual, norm });
    }
    Ok(real_embed_unchecked(h))
}

pub(crate) fn real_embed_unchecked(h: &ComplexMatrix) -> RealMatrix {
    let n = h.rows();
    let m = h.cols();
    let mut out = RealMatrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i, m + j)] = -z.im;
            out[(n + i, j)] = z.im;
            out[(n + i, m + j)] = z.re;
        }
    }
    out
}

/// Largest singular value, via the Hermitian eigensolver on `A†A`.
pub fn spectral_norm(a: &ComplexMatrix) -> Result<f64, NumError> {
    let g = (&a.adjoint() * a).hermitian_part();
    Ok(herm_eig(&g)?.max().max(0.0).sqrt())
}

/// Largest eigenvalue of a Hermitian matrix.
pub fn max_eigenvalue(a: &ComplexMatrix) -> Result<f64, NumError> {
    Ok(herm_eig(a)?.max())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn lyapunov_scaled_identity() {
        let a = -ComplexMatrix::identity(2);
        let d = ComplexMatrix::identity(2).scale_re(2.0);
        let s = solve_lyapunov(&a, &d).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn lyapunov_diagonal() {
        let a = ComplexMatrix::from_real_diag(&[-1.0, -2.0]);
        let d = ComplexMatrix::from_real_diag(&[2.0, 4.0]);
        let s = solve_lyapunov(&a, &d).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn lyapunov_example_plant_kappa2() {
        let a = ComplexMatrix::from_real_rows(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        let d = ComplexMatrix::from_real_diag(&[2.0, 0.0]);
        let s = solve_lyapunov(&a, &d).unwrap();
        let want = ComplexMatrix::from_real_rows(&[&[7.0 / 6.0, 1.0 / 3.0], &[1.0 / 3.0, 1.0 / 6.0]]);
        assert!(s.max_abs_diff(&want) < 1e-14, "{s:?}");
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = ComplexMatrix::from_real_rows(&[&[-0.25, 0.5], &[0.5, -0.25]]);
        let d = ComplexMatrix::identity(2);
        assert!(matches!(solve_lyapunov(&a, &d), Err(NumError::NotHurwitz { .. })));
    }

    #[test]
    fn psd_sqrt_examples() {
        let s = psd_sqrt(&ComplexMatrix::identity(3)).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-14);
        let s = psd_sqrt(&ComplexMatrix::from_real_diag(&[4.0, 9.0])).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::from_real_diag(&[2.0, 3.0])) < 1e-14);
        assert!(matches!(
            psd_sqrt(&ComplexMatrix::from_real_diag(&[1.0, -1.0])),
            Err(NumError::NotPsd { .. })
        ));
    }

    #[test]
    fn real_embed_examples() {
        let e = real_embed(&ComplexMatrix::identity(1)).unwrap();
        assert_eq!(e, RealMatrix::identity(2));
        let h = ComplexMatrix::from_rows(&[vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]])
            .unwrap();
        let r = real_embed(&h).unwrap();
        let ev = herm_eig(&r.to_complex()).unwrap().values;
        for (got, want) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let bad = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(real_embed(&bad).is_err());
    }

    #[test]
    fn singular_system_detected() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let b = ComplexMatrix::from_real_rows(&[&[1.0], &[1.0]]);
        assert_eq!(solve_linear(&a, &b), Err(NumError::SingularSystem));
    }
}

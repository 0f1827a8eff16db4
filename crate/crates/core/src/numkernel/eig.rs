//! Eigenvalue routines.
//!
//! Hermitian matrices use cyclic complex Jacobi: each rotation first removes
//! the phase of the pivot entry and then applies a real symmetric Schur
//! rotation. For the ≤ 20×20 matrices met here it converges in a handful of
//! sweeps and gives eigenvectors orthonormal to working precision.
//!
//! General complex matrices go through Householder reduction to Hessenberg
//! form followed by explicitly shifted QR with Wilkinson shifts.

use num_complex::Complex64;

use super::{ComplexMatrix, NumError, Tolerances};

const MAX_JACOBI_SWEEPS: usize = 60;
const MAX_QR_ITERS_PER_EIGENVALUE: usize = 80;

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigResult {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: ComplexMatrix,
}

impl EigResult {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    /// `V f(Λ) V†`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| v[(i, k)] * f(self.values[k]) * v[(j, k)].conj())
                .sum()
        })
    }
}

pub fn herm_eig(a: &ComplexMatrix) -> Result<EigResult, NumError> {
    herm_eig_with(a, &Tolerances::default())
}

pub fn herm_eig_with(a: &ComplexMatrix, tol: &Tolerances) -> Result<EigResult, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare(a.rows(), a.cols()));
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite);
    }
    let norm = a.frobenius_norm();
    let residual = a.hermitian_residual();
    if residual > tol.hermitian * norm {
        return Err(NumError::NotHermitian { residual, norm });
    }
    let n = a.rows();
    let mut h = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    let mut converged = n <= 1;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let off = off_diagonal_norm(&h);
        if off <= 1e-15 * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut h, &mut v, p, q);
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&h);
        if off > 1e-12 * norm {
            return Err(NumError::ConvergenceFailure {
                what: "Hermitian Jacobi sweeps",
                iterations: MAX_JACOBI_SWEEPS,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| h[(i, i)].re.total_cmp(&h[(j, j)].re));
    let values = order.iter().map(|&i| h[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigResult { values, vectors })
}

fn off_diagonal_norm(h: &ComplexMatrix) -> f64 {
    let n = h.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += h[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi_rotate(h: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = h[(p, q)];
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let phase_conj = (apq / r).conj();
    let app = h[(p, p)].re;
    let aqq = h[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // W = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let w00 = Complex64::new(c, 0.0);
    let w01 = Complex64::new(s, 0.0);
    let w10 = phase_conj * (-s);
    let w11 = phase_conj * c;

    let n = h.rows();
    for k in 0..n {
        let x = h[(k, p)];
        let y = h[(k, q)];
        h[(k, p)] = x * w00 + y * w10;
        h[(k, q)] = x * w01 + y * w11;
    }
    for k in 0..n {
        let x = h[(p, k)];
        let y = h[(q, k)];
        h[(p, k)] = w00.conj() * x + w10.conj() * y;
        h[(q, k)] = w01.conj() * x + w11.conj() * y;
    }
    h[(p, q)] = Complex64::new(0.0, 0.0);
    h[(q, p)] = Complex64::new(0.0, 0.0);
    h[(p, p)] = Complex64::new(h[(p, p)].re, 0.0);
    h[(q, q)] = Complex64::new(h[(q, q)].re, 0.0);
    for k in 0..n {
        let x = v[(k, p)];
        let y = v[(k, q)];
        v[(k, p)] = x * w00 + y * w10;
        v[(k, q)] = x * w01 + y * w11;
    }
}

/// Reduces a square matrix to upper Hessenberg form by Householder
/// similarity transforms.
pub fn hessenberg(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let mut h = a.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if xnorm == 0.0 || tail == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 {
            x[0] / x[0].norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2vv†) H on rows k+1..n
        for j in 0..n {
            let dot: Complex64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..v.len() {
                h[(k + 1 + i, j)] -= v[i] * dot * 2.0;
            }
        }
        // H <- H (I - 2vv†) on columns k+1..n
        for i in 0..n {
            let dot: Complex64 = (0..v.len()).map(|j| h[(i, k + 1 + j)] * v[j]).sum();
            for j in 0..v.len() {
                h[(i, k + 1 + j)] -= dot * v[j].conj() * 2.0;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
    h
}

fn eig2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Unitary Givens pair `(c, s)` with real `c` such that
/// `[[c, s], [-s*, c]] · [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let na = a.norm();
    let nb = b.norm();
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let nu = na.hypot(nb);
    (na / nu, (a / na) * b.conj() / nu)
}

/// All eigenvalues of a general complex square matrix (unordered).
pub fn eigenvalues(a: &ComplexMatrix) -> Result<Vec<Complex64>, NumError> {
    if !a.is_square() {
        return Err(NumError::NotSquare(a.rows(), a.cols()));
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite);
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut h = hessenberg(a);
    let mut out = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iter = 0usize;
    loop {
        if hi == 0 {
            out.push(h[(0, 0)]);
            break;
        }
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[(l, l - 1)].norm() <= f64::EPSILON * s {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            out.push(h[(hi, hi)]);
            hi -= 1;
            iter = 0;
            continue;
        }
        if l + 1 == hi {
            let (e1, e2) = eig2x2(h[(l, l)], h[(l, hi)], h[(hi, l)], h[(hi, hi)]);
            out.push(e1);
            out.push(e2);
            if l == 0 {
                break;
            }
            hi = l - 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > MAX_QR_ITERS_PER_EIGENVALUE {
            return Err(NumError::ConvergenceFailure {
                what: "shifted Hessenberg QR",
                iterations: iter,
            });
        }
        let shift = if iter % 11 == 10 {
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.5 * h[(hi, hi - 1)].norm())
        } else {
            let (e1, e2) = eig2x2(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            );
            let d = h[(hi, hi)];
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        qr_step(&mut h, l, hi, shift);
    }
    Ok(out)
}

fn qr_step(h: &mut ComplexMatrix, l: usize, hi: usize, shift: Complex64) {
    for k in l..=hi {
        h[(k, k)] -= shift;
    }
    let mut rots = Vec::with_capacity(hi - l);
    for k in l..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..=hi {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = -s.conj() * x + y * c;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = l + idx;
        for i in l..=(k + 2).min(hi) {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + s.conj() * y;
            h[(i, k + 1)] = -s * x + y * c;
        }
    }
    for k in l..=hi {
        h[(k, k)] += shift;
    }
}

/// Maximum real part over the spectrum; negative iff the matrix is Hurwitz.
pub fn spectral_abscissa(a: &ComplexMatrix) -> Result<f64, NumError> {
    let ev = eigenvalues(a)?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_drift(kappa: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[-kappa / 2.0, 0.5], &[0.5, -kappa / 2.0]])
    }

    #[test]
    fn diagonal_eigenvalues_ascend() {
        let e = herm_eig(&ComplexMatrix::from_real_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 3.0]);
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        let e = herm_eig(&ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn example_drift_eigenvalues_kappa3() {
        let e = herm_eig(&example_drift(3.0)).unwrap();
        assert!((e.values[0] + 2.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(herm_eig(&a), Err(NumError::NotHermitian { .. })));
    }

    #[test]
    fn abscissa_examples() {
        let minus_i = -ComplexMatrix::identity(3);
        assert!((spectral_abscissa(&minus_i).unwrap() + 1.0).abs() < 1e-14);
        assert!((spectral_abscissa(&example_drift(0.5)).unwrap() - 0.25).abs() < 1e-13);
        assert!((spectral_abscissa(&example_drift(2.0)).unwrap() + 0.5).abs() < 1e-13);
    }

    #[test]
    fn rotation_generator_has_imaginary_spectrum() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.im.total_cmp(&y.im));
        assert!((ev[0] - Complex64::new(0.0, -1.0)).norm() < 1e-13);
        assert!((ev[1] - Complex64::new(0.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let a = ComplexMatrix::from_real_rows(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let mut ev: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}

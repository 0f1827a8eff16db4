//! Moment-dynamics oracle for quadratic perturbations.
//!
//! With a constant admissible `Δ` the closed loop is linear, so the second
//! moments `Σ = ⟨ζζ†⟩` (with `ζ = [a; a#]`, up to transposition) obey
//! `Σ' = F_cl Σ + Σ F_cl† + D`. The realised time-averaged cost is the
//! steady value `Tr(W Σ∞)` with `W = R + ρK²`. Two independent routes are
//! provided: a Lyapunov solve and fixed-step RK4 integration.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numkernel::{solve_lyapunov, spectral_abscissa, spectral_norm, ComplexMatrix, NumError};
use crate::qmodel::{closed_loop_drift, diffusion, DoubledMatrix, ModelError, PlantModel};

/// Relative slack used when counting bound violations.
pub const VIOLATION_TOL: f64 = 1e-6;
const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("closed loop is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },
    #[error("moment trajectory diverged at t = {time:.3}")]
    Diverged { time: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<NumError> for OracleError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::NotHurwitz { abscissa } => Self::NotHurwitz { abscissa },
            other => Self::Model(ModelError::Num(other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaMode {
    /// Gaussian structured draw rescaled to a uniform fraction of the radius.
    Random,
    /// Gaussian structured draw rescaled onto the radius.
    Boundary,
    /// Boundary draw with a zero `Δ1` block (pure two-photon coupling).
    BoundaryPairing,
    /// `[[0, i/2], [−i/2, 0]]`; single output channel only.
    Example,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSample {
    pub delta: DoubledMatrix,
    /// Spectral norm of the assembled `Δ`.
    pub norm: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian_structured(m: usize, rng: &mut ChaCha8Rng, zero_x1: bool) -> DoubledMatrix {
    let mut g = || -> f64 { rng.sample(StandardNormal) };
    let mut x1 = ComplexMatrix::zeros(m, m);
    let mut x2 = ComplexMatrix::zeros(m, m);
    for k in 0..m {
        x1[(k, k)] = c(g(), 0.0);
        for l in k + 1..m {
            let v = c(g(), g());
            x1[(k, l)] = v;
            x1[(l, k)] = v.conj();
        }
    }
    for k in 0..m {
        for l in k..m {
            let v = c(g(), g());
            x2[(k, l)] = v;
            x2[(l, k)] = v;
        }
    }
    if zero_x1 {
        x1 = ComplexMatrix::zeros(m, m);
    }
    DoubledMatrix::hamiltonian(x1, x2).expect("structured by construction")
}

fn sample_with(m: usize, gamma: f64, rng: &mut ChaCha8Rng, mode: DeltaMode) -> Result<DeltaSample, OracleError> {
    if m == 0 {
        return Err(OracleError::DimensionMismatch("Δ needs at least one channel".into()));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(OracleError::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    let radius = 2.0 / gamma;
    if mode == DeltaMode::Example {
        if m != 1 {
            return Err(OracleError::DimensionMismatch(format!(
                "the fixed example Δ has one channel, E has {m}"
            )));
        }
        let delta = DoubledMatrix::hamiltonian(
            ComplexMatrix::zeros(1, 1),
            ComplexMatrix::from_rows(&[vec![c(0.0, 0.5)]]).expect("1x1"),
        )
        .expect("structured");
        return Ok(DeltaSample { delta, norm: 0.5 });
    }
    loop {
        let raw = gaussian_structured(m, rng, mode == DeltaMode::BoundaryPairing);
        let norm = spectral_norm(&raw.assemble())?;
        if norm < 1e-12 {
            continue;
        }
        let target = match mode {
            DeltaMode::Random => radius * rng.gen::<f64>(),
            _ => radius,
        };
        let delta = raw.scale(target / norm);
        let norm = spectral_norm(&delta.assemble())?;
        return Ok(DeltaSample { delta, norm });
    }
}

/// Draws one structured admissible `Δ` (`2m×2m`, `‖Δ‖ ≤ 2/γ`).
pub fn sample_delta(m: usize, gamma: f64, seed: u64, mode: DeltaMode) -> Result<DeltaSample, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(m, gamma, &mut rng, mode)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub sigma: ComplexMatrix,
    pub cost: f64,
}

/// `R + ρK²`, or `R` without a controller.
pub fn cost_weight(plant: &PlantModel, k: Option<&DoubledMatrix>) -> ComplexMatrix {
    let r = plant.weights.r.assemble();
    match k {
        Some(k) => {
            let kf = k.assemble();
            &r + &(&kf * &kf).scale_re(plant.weights.rho)
        }
        None => r,
    }
}

fn weighted_cost(w: &ComplexMatrix, sigma: &ComplexMatrix) -> f64 {
    w.trace_product(sigma).re
}

/// Steady second moments and realised cost for a fixed controller and
/// perturbation.
pub fn steady_state_cost(
    plant: &PlantModel,
    k: Option<&DoubledMatrix>,
    delta: Option<&DoubledMatrix>,
) -> Result<SteadyState, OracleError> {
    let f = closed_loop_drift(plant, k, delta)?;
    let sigma = solve_lyapunov(&f, &diffusion(&plant.n))?;
    let cost = weighted_cost(&cost_weight(plant, k), &sigma);
    Ok(SteadyState { sigma, cost })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    /// `Tr(W Σ(t))`.
    pub cost: f64,
    /// `(1/t)∫₀ᵗ Tr(W Σ) dt`; equals `cost` at `t = 0`.
    pub average_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub final_sigma: ComplexMatrix,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory has at least one point")
    }
}

/// Integrates `Σ' = F_cl Σ + Σ F_cl† + D` and the cost integral with
/// classical RK4. One point is recorded per step.
pub fn integrate_moments(
    plant: &PlantModel,
    k: Option<&DoubledMatrix>,
    delta: Option<&DoubledMatrix>,
    sigma0: &ComplexMatrix,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, OracleError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(OracleError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 100.0 * dt) {
        return Err(OracleError::InvalidParameter(format!(
            "horizon {t_end} is shorter than 100 steps of {dt}"
        )));
    }
    let f = closed_loop_drift(plant, k, delta)?;
    let dim = f.rows();
    if sigma0.shape() != (dim, dim) {
        return Err(OracleError::DimensionMismatch(format!(
            "Σ0 is {}x{}, closed loop is {dim}x{dim}",
            sigma0.rows(),
            sigma0.cols()
        )));
    }
    let d = diffusion(&plant.n);
    let w = cost_weight(plant, k);
    let fa = f.adjoint();
    let rhs = |s: &ComplexMatrix| -> ComplexMatrix { &(&(&f * s) + &(s * &fa)) + &d };

    let steps = (t_end / dt).round() as usize;
    let h = t_end / steps as f64;
    let mut sigma = sigma0.clone();
    let mut integral = 0.0;
    let c0 = weighted_cost(&w, &sigma);
    let mut points = Vec::with_capacity(steps + 1);
    points.push(TrajectoryPoint {
        time: 0.0,
        cost: c0,
        average_cost: c0,
    });
    for step in 1..=steps {
        let k1 = rhs(&sigma);
        let s2 = &sigma + &k1.scale_re(h / 2.0);
        let k2 = rhs(&s2);
        let s3 = &sigma + &k2.scale_re(h / 2.0);
        let k3 = rhs(&s3);
        let s4 = &sigma + &k3.scale_re(h);
        let k4 = rhs(&s4);
        // The cost integrand is linear in Σ, so its RK4 stages reuse the
        // Σ stages.
        let ci = |s: &ComplexMatrix| weighted_cost(&w, s);
        integral += h / 6.0 * (ci(&sigma) + 2.0 * ci(&s2) + 2.0 * ci(&s3) + ci(&s4));
        let incr = &(&k1 + &k2.scale_re(2.0)) + &(&k3.scale_re(2.0) + &k4);
        sigma = &sigma + &incr.scale_re(h / 6.0);
        let time = step as f64 * h;
        if !sigma.is_finite() || sigma.max_abs() > DIVERGENCE_LIMIT {
            return Err(OracleError::Diverged { time });
        }
        points.push(TrajectoryPoint {
            time,
            cost: ci(&sigma),
            average_cost: integral / time,
        });
    }
    Ok(Trajectory {
        points,
        final_sigma: sigma.hermitian_part(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// Largest realised cost over Hurwitz samples.
    pub max_realized_cost: f64,
    pub guaranteed_bound: f64,
    /// Samples above the bound plus samples with a non-Hurwitz closed loop.
    pub violations: usize,
    pub unstable_samples: usize,
    /// The unstable sample if any, else the sample of largest cost.
    pub worst_delta: DeltaSample,
}

/// Samples admissible perturbations and compares realised costs with a
/// certified bound.
///
/// Sample 0 is `Δ = 0`; for single-channel plants sample 1 is the fixed
/// example perturbation. The rest cycle through random-interior (5 of 10),
/// boundary (4 of 10) and boundary-pairing (1 of 10) draws. Each sample has
/// its own ChaCha stream, so the report does not depend on evaluation order.
pub fn validate_bound(
    plant: &PlantModel,
    k: Option<&DoubledMatrix>,
    bound: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport, OracleError> {
    if !bound.is_finite() {
        return Err(OracleError::InvalidParameter(format!("bound must be finite, got {bound}")));
    }
    if n_samples == 0 {
        return Err(OracleError::InvalidParameter("need at least one sample".into()));
    }
    let q = plant.quadratic()?;
    let m = q.e.outputs();
    let gamma = q.gamma;
    let count = if q.e.is_zero() { 1 } else { n_samples };

    let mut max_cost = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut unstable = 0;
    let mut worst: Option<(f64, DeltaSample)> = None;
    let limit = bound + VIOLATION_TOL * (1.0 + bound.abs());
    for i in 0..count {
        let sample = if i == 0 {
            DeltaSample {
                delta: DoubledMatrix::zeros(m),
                norm: 0.0,
            }
        } else if i == 1 && m == 1 {
            sample_with(m, gamma, &mut ChaCha8Rng::seed_from_u64(seed), DeltaMode::Example)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mode = match i % 10 {
                0..=4 => DeltaMode::Random,
                5..=8 => DeltaMode::Boundary,
                _ => DeltaMode::BoundaryPairing,
            };
            sample_with(m, gamma, &mut rng, mode)?
        };
        let f = closed_loop_drift(plant, k, Some(&sample.delta))?;
        let abscissa = spectral_abscissa(&f)?;
        if abscissa >= 0.0 {
            violations += 1;
            unstable += 1;
            if unstable == 1 {
                worst = Some((f64::INFINITY, sample));
            }
            continue;
        }
        let cost = steady_state_cost(plant, k, Some(&sample.delta))?.cost;
        if cost > limit {
            violations += 1;
        }
        max_cost = max_cost.max(cost);
        if worst.as_ref().is_none_or(|(c, _)| cost > *c) {
            worst = Some((cost, sample));
        }
    }
    Ok(ValidationReport {
        samples: count,
        max_realized_cost: max_cost,
        guaranteed_bound: bound,
        violations,
        unstable_samples: unstable,
        worst_delta: worst.expect("at least one sample").1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmodel::{CouplingMatrix, QuadraticUncertainty, Uncertainty};

    fn unperturbed(kappa: f64) -> PlantModel {
        let mut p = PlantModel::squeezed_cavity(kappa);
        p.uncertainty = Uncertainty::Quadratic(
            QuadraticUncertainty::new(CouplingMatrix::zeros(1, 1), 1.0, 0.0).unwrap(),
        );
        p
    }

    /// `F = −I`, `D = diag(2, 0)`: zero Hamiltonian, `L = √2·a`.
    fn unit_damped() -> PlantModel {
        let mut p = unperturbed(2.0);
        p.m = DoubledMatrix::zeros(1);
        p
    }

    #[test]
    fn example_delta_squares_to_quarter_identity() {
        let s = sample_delta(1, 1.0, 0, DeltaMode::Example).unwrap();
        let d = s.delta.assemble();
        assert!((&d * &d).max_abs_diff(&ComplexMatrix::identity(2).scale_re(0.25)) < 1e-15);
        assert!(sample_delta(2, 1.0, 0, DeltaMode::Example).is_err());
    }

    #[test]
    fn boundary_samples_sit_on_radius() {
        for seed in 0..20 {
            let s = sample_delta(2, 1.0, seed, DeltaMode::Boundary).unwrap();
            assert!((s.norm - 2.0).abs() < 1e-10);
            let r = sample_delta(2, 0.5, seed, DeltaMode::Random).unwrap();
            assert!(r.norm <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = sample_delta(2, 1.0, 7, DeltaMode::Random).unwrap();
        let b = sample_delta(2, 1.0, 7, DeltaMode::Random).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steady_cost_fixtures() {
        let s = steady_state_cost(&unperturbed(2.0), None, None).unwrap();
        assert!((s.cost - 4.0 / 3.0).abs() < 1e-12);
        let u = steady_state_cost(&unit_damped(), None, None).unwrap();
        assert!((u.cost - 1.0).abs() < 1e-12, "{}", u.cost);
        let mut undamped = unperturbed(2.0);
        undamped.n = CouplingMatrix::zeros(1, 1);
        assert!(matches!(
            steady_state_cost(&undamped, None, None),
            Err(OracleError::NotHurwitz { .. })
        ));
    }

    #[test]
    fn integration_matches_lyapunov() {
        let plant = unperturbed(2.0);
        let tr = integrate_moments(&plant, None, None, &ComplexMatrix::zeros(2, 2), 40.0, 0.01).unwrap();
        assert!((tr.last().cost - 4.0 / 3.0).abs() < 1e-4);
        let from_ten = integrate_moments(&plant, None, None, &ComplexMatrix::identity(2).scale_re(10.0), 40.0, 0.01)
            .unwrap();
        assert!((from_ten.last().cost - 4.0 / 3.0).abs() < 1e-4);
        let unit = integrate_moments(&unit_damped(), None, None, &ComplexMatrix::zeros(2, 2), 40.0, 0.01).unwrap();
        let want = ComplexMatrix::from_real_diag(&[1.0, 0.0]);
        assert!(unit.final_sigma.max_abs_diff(&want) < 1e-6);
        // Running average from Σ0 = 0 lags by (1/T)∫(1 − e^{−2t})dt ≈ 1/(2T).
        assert!((unit.last().average_cost - (1.0 - 0.5 / 40.0)).abs() < 1e-6);
    }

    #[test]
    fn divergence_is_detected() {
        let plant = PlantModel::squeezed_cavity(0.2);
        let r = integrate_moments(&plant, None, None, &ComplexMatrix::identity(2), 400.0, 0.01);
        assert!(matches!(r, Err(OracleError::Diverged { .. })), "{r:?}");
    }

    #[test]
    fn zero_channel_uses_single_sample() {
        let rep = validate_bound(&unperturbed(2.0), None, 4.0 / 3.0 + 1e-3, 200, 1).unwrap();
        assert_eq!(rep.samples, 1);
        assert_eq!(rep.violations, 0);
        assert!((rep.max_realized_cost - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_samples_count_as_violations() {
        // κ = 3 cannot withstand every admissible Δ with γ = 1.
        let rep = validate_bound(&PlantModel::squeezed_cavity(3.0), None, 1e6, 50, 3).unwrap();
        assert!(rep.unstable_samples > 0);
        assert_eq!(rep.violations, rep.unstable_samples);
    }
}

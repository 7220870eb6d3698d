//! The stochastic Cauchy problem `dU = AU dt + B dW_H` on a finite-dimensional
//! space: solutions on finite horizons, the invariant measure, and the
//! frequency-side γ-norm of `R(i·, A)B`.

mod certify;
mod perturbation;

pub use certify::{datko_pazy_certify, rank_one_failure_witness, DatkoPazyReport, FailureWitness, RankOneSweep};
pub use perturbation::{
    bounded_perturbation_solution, operator_norm_bound, perturbation_margin, perturbed_invariant_measure_check, MarginReport,
    PerturbationReport, SolutionPerturbationReport,
};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_norm_from_covariance, EstimateMethod, GaussianSumEstimate};
use crate::linalg::{
    c64, frobenius_norm, from_real, hermitian_part, identity, is_real, realify, spectral_norm, stack_columns, van_loan_gramian, CMat,
};
use crate::mc::Sampling;
use crate::quadrature::integrate_adaptive;
use crate::semigroup::{controllability_gramian, spectral_abscissa, Generator, HURWITZ_MARGIN};
use crate::serial;

/// Relative agreement required between the frequency quadrature and the
/// Plancherel value.
pub const PLANCHEREL_TOLERANCE: f64 = 1e-6;

/// `dU = AU dt + B dW_H` with `B : ℂᵈ → E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpProblem {
    gen: Generator,
    b: CMat,
}

impl ScpProblem {
    pub fn new(gen: Generator, b: CMat) -> Result<Self> {
        if b.ncols() == 0 {
            return Err(Error::InvalidArgument("noise dimension d must be at least 1".into()));
        }
        if b.nrows() != gen.dim() {
            return Err(Error::DimensionMismatch { expected: gen.dim(), found: b.nrows() });
        }
        if !b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidArgument("B has non-finite entries".into()));
        }
        Ok(Self { gen, b })
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn with_generator(&self, gen: Generator) -> Result<Self> {
        Self::new(gen, self.b.clone())
    }

    /// `BB*`.
    pub fn noise_covariance(&self) -> CMat {
        &self.b * self.b.adjoint()
    }

    fn is_real(&self) -> bool {
        self.gen.is_real() && is_real(&self.b)
    }
}

/// γ-norm of `T(·)B` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub horizon: f64,
    /// Always true in finite dimension.
    pub exists: bool,
    pub norm: GaussianSumEstimate,
}

fn real_part_symmetric(q: &CMat) -> DMatrix<f64> {
    let re = q.map(|z| z.re);
    (&re + re.transpose()) * 0.5
}

/// Stacked real covariance of `∫₀^T T(t)B dW(t)`.
fn finite_horizon_covariance(prob: &ScpProblem, horizon: f64) -> (DMatrix<f64>, bool) {
    let a = prob.gen.matrix();
    if prob.is_real() {
        return (real_part_symmetric(&van_loan_gramian(a, &prob.noise_covariance(), horizon)), false);
    }
    let ar = from_real(&realify(a));
    let br = stack_columns(&prob.b);
    let q = van_loan_gramian(&ar, &from_real(&(&br * br.transpose())), horizon);
    (real_part_symmetric(&q), true)
}

/// The solution of the problem on `[0, T]` exists for every `A` in finite
/// dimension; the returned norm is `‖T(·)B‖_{γ([0,T],H,E)}`, from the Van Loan
/// Gramian `∫₀^T T(t)BB*T(t)* dt`.
pub fn solution_exists(prob: &ScpProblem, horizon: f64, sampling: Sampling) -> Result<SolutionReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive and finite, got {horizon}")));
    }
    let space = prob.gen.space();
    let norm = if space.is_hilbert() && !matches!(sampling, Sampling::MonteCarlo(_)) {
        let q = van_loan_gramian(prob.gen.matrix(), &prob.noise_covariance(), horizon);
        GaussianSumEstimate::exact(q.trace().re.max(0.0).sqrt())
    } else {
        let (cov, complex) = finite_horizon_covariance(prob, horizon);
        gaussian_norm_from_covariance(&cov, complex, space, sampling)?
    };
    if !norm.value.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {horizon} overflows the Gramian")));
    }
    Ok(SolutionReport { horizon, exists: true, norm })
}

/// `Q∞ = ∫₀^∞ T(t)BB*T(t)* dt`, the solution of `AQ + QA* = −BB*`.
pub fn invariant_covariance(prob: &ScpProblem) -> Result<CMat> {
    Ok(hermitian_part(&controllability_gramian(&prob.gen, &prob.noise_covariance())?))
}

/// Stacked real covariance of the invariant measure.
fn invariant_stacked_covariance(prob: &ScpProblem, q: &CMat) -> Result<(DMatrix<f64>, bool)> {
    if prob.is_real() {
        return Ok((real_part_symmetric(q), false));
    }
    let ar = from_real(&realify(prob.gen.matrix()));
    let br = stack_columns(&prob.b);
    let qr = crate::linalg::solve_lyapunov(&ar, &from_real(&(&br * br.transpose())))?;
    Ok((real_part_symmetric(&qr), true))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMeasureReport {
    pub exists: bool,
    #[serde(serialize_with = "serial::option_matrix")]
    pub covariance_q: Option<CMat>,
    /// `‖T(·)B‖_{γ(ℝ₊,H,E)}`.
    pub gamma_norm_orbit: Option<GaussianSumEstimate>,
    pub unique: bool,
    pub s_numeric: f64,
}

/// An invariant measure exists iff `T(·)B ∈ γ(ℝ₊, H, E)`. In finite dimension
/// this holds when `A` is Hurwitz, and trivially when `B = 0`; it is unique
/// when no eigenvalue lies on the closed right half-plane.
pub fn invariant_measure_exists(prob: &ScpProblem, sampling: Sampling) -> Result<InvariantMeasureReport> {
    let s = spectral_abscissa(&prob.gen)?;
    let hurwitz = s < -HURWITZ_MARGIN;
    let zero_noise = prob.b.iter().all(|z| *z == c64(0.0, 0.0));
    if !hurwitz && !zero_noise {
        return Ok(InvariantMeasureReport { exists: false, covariance_q: None, gamma_norm_orbit: None, unique: false, s_numeric: s });
    }
    let m = prob.gen.dim();
    let q = if hurwitz { invariant_covariance(prob)? } else { CMat::zeros(m, m) };
    let space = prob.gen.space();
    let norm = if zero_noise {
        GaussianSumEstimate::exact(0.0)
    } else if space.is_hilbert() && !matches!(sampling, Sampling::MonteCarlo(_)) {
        GaussianSumEstimate::exact(q.trace().re.max(0.0).sqrt())
    } else {
        let (cov, complex) = invariant_stacked_covariance(prob, &q)?;
        gaussian_norm_from_covariance(&cov, complex, space, sampling)?
    };
    Ok(InvariantMeasureReport { exists: true, covariance_q: Some(q), gamma_norm_orbit: Some(norm), unique: hurwitz, s_numeric: s })
}

/// `‖R(i·, A)B‖_{γ(ℝ,H,E)}` with its two Euclidean evaluations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformNorm {
    pub value: f64,
    pub stderr: f64,
    pub method: EstimateMethod,
    /// `sqrt(2π tr Q∞)`.
    pub plancherel: f64,
    /// `sqrt(∫_ℝ ‖R(is, A)B‖²_HS ds)` by adaptive quadrature.
    pub quadrature: f64,
    pub relative_gap: f64,
}

/// `∫_ℝ ‖R(is, A)B‖²_HS ds`, mapped onto a finite interval by `s = w·tan θ`.
pub fn frequency_hs_integral(a: &CMat, b: &CMat) -> f64 {
    let n = a.nrows();
    let w = spectral_norm(a).max(1e-12);
    let integrand = |theta: f64| {
        let s = w * theta.tan();
        let shifted = identity(n) * c64(0.0, s) - a;
        let x = shifted.lu().solve(b).unwrap_or_else(|| CMat::from_element(n, b.ncols(), c64(f64::NAN, 0.0)));
        let sec = 1.0 / theta.cos();
        frobenius_norm(&x).powi(2) * w * sec * sec
    };
    let half = 0.5 * PI;
    integrate_adaptive(integrand, -half, half, 1e-11, 0.0)
}

/// `‖R(i·, A)B‖_{γ(ℝ,H,E)}`. The covariance `∫_ℝ R(is)BB*R(is)* ds` equals
/// `2πQ∞` and the pseudo-covariance vanishes, which gives the exact value on
/// `ℓ²` and the Gaussian to sample on `ℓᵖ`. The frequency-side quadrature is
/// cross-checked against the Plancherel value in every case.
pub fn resolvent_transform_norm(prob: &ScpProblem, sampling: Sampling) -> Result<TransformNorm> {
    let q = invariant_covariance(prob)?;
    let plancherel = (2.0 * PI * q.trace().re.max(0.0)).sqrt();
    let quadrature = frequency_hs_integral(prob.gen.matrix(), &prob.b).max(0.0).sqrt();
    let relative_gap = if plancherel > 0.0 { (quadrature - plancherel).abs() / plancherel } else { quadrature };
    if !(relative_gap <= PLANCHEREL_TOLERANCE) {
        return Err(Error::CrossCheckFailed(format!(
            "frequency quadrature {quadrature:.12e} vs Plancherel {plancherel:.12e} (relative gap {relative_gap:.3e})"
        )));
    }
    let space = prob.gen.space();
    let est = if space.is_hilbert() && !matches!(sampling, Sampling::MonteCarlo(_)) {
        GaussianSumEstimate::exact(plancherel)
    } else {
        let cov = realify(&q) * PI;
        gaussian_norm_from_covariance(&cov, true, space, sampling)?
    };
    Ok(TransformNorm { value: est.value, stderr: est.stderr, method: est.method, plancherel, quadrature, relative_gap })
}

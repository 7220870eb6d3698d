//! Matrix semigroups `T(t) = e^{tA}` on a finite-dimensional space.
//!
//! In finite dimension the growth bound equals the spectral abscissa, and the
//! γ-norm of an orbit `t ↦ T(t)x` is the norm of the centered Gaussian vector
//! with covariance `∫₀^∞ T(t)xx*T(t)* dt`, which solves a Lyapunov equation.

mod datko;
mod laplace;
mod rbound;

pub use datko::{
    abscissa_bound, c_univ, minimal_decay_constant, neumann_resolvent, resolvent_rbound_datko, DatkoConfig, LinePoint, NeumannApprox,
    ProfilePoint, StabilityCertificate, C_UNIV, C_UNIV_FORMULA,
};
pub use laplace::{laplace_transform, rbound_laplace_check, EstimateCheck, LaplaceCheckConfig, LaplaceCheckReport, PettisOperator};
pub use rbound::{half_plane_resolvent_sup, rbound_estimate, resolvent_line_sup, LineSup, RBoundEstimate};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_norm_from_covariance, GaussianSumEstimate};
use crate::linalg::{
    c64, eigenvalues, from_real, gaussian_matrix, hermitian_eigenvalues, identity, is_finite, is_real, lu_solve_identity,
    matrix_exp, realify, solve_lyapunov, stack_columns, CMat, CVec, C64,
};
use crate::mc::{derive_seed, Sampling};
use crate::space::SpaceSpec;

/// Margin below zero required of `s(A)` before `A` counts as Hurwitz.
pub const HURWITZ_MARGIN: f64 = 1e-10;
/// Distance to the spectrum below which a resolvent is refused.
pub const SPECTRUM_TOLERANCE: f64 = 1e-12;
const RANDOM_DIRECTIONS: usize = 8;

/// The generator `A` of `T(t) = e^{tA}` together with the norm on its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    a: CMat,
    space: SpaceSpec,
}

impl Generator {
    pub fn new(a: CMat, space: SpaceSpec) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::InvalidArgument(format!("generator must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if !is_finite(&a) {
            return Err(Error::InvalidArgument("generator has non-finite entries".into()));
        }
        if space.dim != a.nrows() {
            return Err(Error::DimensionMismatch { expected: space.dim, found: a.nrows() });
        }
        Ok(Self { a, space })
    }

    pub fn from_real(a: &DMatrix<f64>, space: SpaceSpec) -> Result<Self> {
        Self::new(from_real(a), space)
    }

    /// Generator on `ℓ²` of matching dimension.
    pub fn l2(a: CMat) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, SpaceSpec::l2(n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.a
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_real(&self) -> bool {
        is_real(&self.a)
    }

    /// `A + ω I`.
    pub fn shifted(&self, omega: f64) -> Self {
        Self { a: &self.a + identity(self.dim()) * c64(omega, 0.0), space: self.space }
    }

    /// `A + P`.
    pub fn perturbed(&self, p: &CMat) -> Result<Self> {
        if p.shape() != self.a.shape() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: p.nrows() });
        }
        Self::new(&self.a + p, self.space)
    }

    pub fn on_l2(&self) -> Self {
        Self { a: self.a.clone(), space: SpaceSpec::l2(self.dim()) }
    }
}

/// `T(t) = e^{tA}`.
pub fn expm(gen: &Generator, t: f64) -> Result<CMat> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(matrix_exp(&(gen.matrix() * c64(t, 0.0))))
}

pub fn spectrum(gen: &Generator) -> Result<Vec<C64>> {
    eigenvalues(gen.matrix())
}

/// `s(A) = max Re σ(A)`.
pub fn spectral_abscissa(gen: &Generator) -> Result<f64> {
    Ok(spectrum(gen)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Returns `s(A)` if `A` is Hurwitz, `NotStable` otherwise.
pub fn require_stable(gen: &Generator) -> Result<f64> {
    let s = spectral_abscissa(gen)?;
    if s < -HURWITZ_MARGIN {
        Ok(s)
    } else {
        Err(Error::NotStable(s))
    }
}

/// `R(λ, A) = (λI − A)⁻¹`.
pub fn resolvent(gen: &Generator, lambda: C64) -> Result<CMat> {
    let distance = spectrum(gen)?.iter().map(|mu| (lambda - mu).norm()).fold(f64::INFINITY, f64::min);
    if distance < SPECTRUM_TOLERANCE {
        return Err(Error::SpectrumHit { re: lambda.re, im: lambda.im, distance });
    }
    let shifted = identity(gen.dim()) * lambda - gen.matrix();
    lu_solve_identity(&shifted).ok_or(Error::SpectrumHit { re: lambda.re, im: lambda.im, distance })
}

/// `X` solving `A*X + XA = −I`, so that `x*Xx = ∫₀^∞ ‖T(t)x‖₂² dt`.
pub fn observability_gramian(gen: &Generator) -> Result<CMat> {
    require_stable(gen)?;
    solve_lyapunov(&gen.matrix().adjoint(), &identity(gen.dim()))
}

/// `∫₀^∞ T(t) C T(t)* dt` for Hermitian `C ⪰ 0`, solving `AQ + QA* = −C`.
pub fn controllability_gramian(gen: &Generator, c: &CMat) -> Result<CMat> {
    require_stable(gen)?;
    solve_lyapunov(gen.matrix(), c)
}

/// Covariance of the real coordinates of `∫₀^∞ T(t)B dW(t)`: `m × m` when
/// `A` and `B` are real, `[Re; Im]`-stacked `2m × 2m` otherwise.
pub(crate) fn stacked_orbit_covariance(a: &CMat, b: &CMat) -> Result<(DMatrix<f64>, bool)> {
    if is_real(a) && is_real(b) {
        let q = solve_lyapunov(a, &(b * b.adjoint()))?;
        let re = q.map(|z| z.re);
        return Ok(((&re + re.transpose()) * 0.5, false));
    }
    let ar = from_real(&realify(a));
    let br = stack_columns(b);
    let q = solve_lyapunov(&ar, &from_real(&(&br * br.transpose())))?;
    let re = q.map(|z| z.re);
    Ok(((&re + re.transpose()) * 0.5, true))
}

/// `‖T(·)x‖_{γ(ℝ₊,E)}`. On `ℓ²` this is `sqrt(x*Xx)`; on `ℓᵖ` it is
/// estimated from the exact orbit covariance.
pub fn orbit_gamma_norm(gen: &Generator, x: &CVec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    if x.len() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: x.len() });
    }
    require_stable(gen)?;
    if gen.space().is_hilbert() && !matches!(sampling, Sampling::MonteCarlo(_)) {
        let xg = observability_gramian(gen)?;
        let value = (x.adjoint() * xg * x)[(0, 0)].re.max(0.0).sqrt();
        return Ok(GaussianSumEstimate::exact(value));
    }
    let b = CMat::from_column_slice(x.len(), 1, x.as_slice());
    let (cov, complex) = stacked_orbit_covariance(gen.matrix(), &b)?;
    gaussian_norm_from_covariance(&cov, complex, gen.space(), sampling)
}

/// Constant `M` with `‖T(·)x‖_γ ≤ M‖x‖` for all `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitBound {
    /// Certified value used downstream.
    pub value: f64,
    /// Largest observed ratio over the probed directions.
    pub lower_estimate: f64,
    /// `m^{|1/2−1/p|}·M₂`; equal to `value` on `ℓ²`.
    pub upper_envelope: f64,
    /// `sqrt(λ_max(X))` for the Euclidean norm.
    pub l2_value: f64,
    pub exact: bool,
}

/// Uniform orbit bound. Exact on `ℓ²`; on `ℓᵖ` the certified value is the
/// norm-equivalence envelope and a basis-plus-random sweep gives a lower
/// estimate.
pub fn uniform_orbit_bound(gen: &Generator, sampling: Sampling) -> Result<OrbitBound> {
    let xg = observability_gramian(gen)?;
    let eig = hermitian_eigenvalues(&xg);
    let l2_value = eig[eig.len() - 1].max(0.0).sqrt();
    let space = gen.space();
    if space.is_hilbert() {
        return Ok(OrbitBound { value: l2_value, lower_estimate: l2_value, upper_envelope: l2_value, l2_value, exact: true });
    }
    let upper = space.l2_equivalence() * l2_value;
    let m = gen.dim();
    let seed = sampling.config().map(|c| c.seed).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x0b17));
    let mut directions: Vec<CVec> = (0..m)
        .map(|i| {
            let mut e = CVec::zeros(m);
            e[i] = c64(1.0, 0.0);
            e
        })
        .collect();
    let complex = !gen.is_real();
    directions.extend((0..RANDOM_DIRECTIONS).map(|_| gaussian_matrix(&mut rng, m, 1, complex).column(0).into_owned()));
    let mut lower: f64 = 0.0;
    for (k, x) in directions.iter().enumerate() {
        let norm = space.norm_of(x.iter().copied());
        let est = orbit_gamma_norm(gen, x, sampling.derive(k as u64))?;
        lower = lower.max(est.value / norm);
    }
    Ok(OrbitBound { value: upper, lower_estimate: lower, upper_envelope: upper, l2_value, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, CVec};
    use crate::mc::McConfig;
    use crate::quadrature::integrate_adaptive;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    pub(crate) fn real_gen(rows: usize, data: &[f64]) -> Generator {
        Generator::from_real(&DMatrix::from_row_slice(rows, rows, data), SpaceSpec::l2(rows)).unwrap()
    }

    pub(crate) fn random_hurwitz(seed: u64, m: usize) -> Generator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = gaussian_matrix(&mut rng, m, m, false) * c64(1.0 / (m as f64).sqrt(), 0.0);
        let s = eigenvalues(&g).unwrap().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Generator::l2(g - identity(m) * c64(s + 0.5, 0.0)).unwrap()
    }

    #[test]
    fn expm_examples() {
        let zero = real_gen(2, &[0.0; 4]);
        assert_eq!(expm(&zero, 3.0).unwrap(), identity(2));
        assert_relative_eq!(expm(&real_gen(1, &[-1.0]), 1.0).unwrap()[(0, 0)].re, (-1.0f64).exp(), max_relative = 1e-14);
        let nil = real_gen(2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&nil, 1.0).unwrap();
        assert!(frobenius_norm(&(e - from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])))) < 1e-14);
        assert!(expm(&nil, -1.0).is_err());
    }

    #[test]
    fn spectral_abscissa_examples() {
        assert_relative_eq!(spectral_abscissa(&real_gen(2, &[-1.0, 0.0, 0.0, -3.0])).unwrap(), -1.0, epsilon = 1e-14);
        assert_relative_eq!(spectral_abscissa(&real_gen(2, &[-1.0, 5.0, 0.0, -2.0])).unwrap(), -1.0, epsilon = 1e-12);
        assert!(spectral_abscissa(&real_gen(2, &[0.0, -1.0, 1.0, 0.0])).unwrap().abs() < 1e-14);
    }

    #[test]
    fn resolvent_examples() {
        let g = real_gen(1, &[-1.0]);
        assert_relative_eq!(resolvent(&g, c64(0.0, 0.0)).unwrap()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(resolvent(&g, c64(1.0, 0.0)).unwrap()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert!(matches!(resolvent(&g, c64(-1.0, 0.0)), Err(Error::SpectrumHit { .. })));
        let h = random_hurwitz(3, 5);
        let lambda = c64(0.3, 1.7);
        let r = resolvent(&h, lambda).unwrap();
        let check = (identity(5) * lambda - h.matrix()) * &r;
        assert!(frobenius_norm(&(check - identity(5))) < 1e-10);
        let dist = spectrum(&h).unwrap().iter().map(|mu| (lambda - mu).norm()).fold(f64::INFINITY, f64::min);
        assert!(crate::linalg::spectral_norm(&r) >= 1.0 / dist * (1.0 - 1e-12));
    }

    #[test]
    fn orbit_norm_examples() {
        let one = CVec::from_element(1, c64(1.0, 0.0));
        let g = real_gen(1, &[-1.0]);
        assert_relative_eq!(orbit_gamma_norm(&g, &one, Sampling::Exact).unwrap().value, 0.5f64.sqrt(), max_relative = 1e-14);
        let g = real_gen(1, &[-3.0]);
        assert_relative_eq!(orbit_gamma_norm(&g, &one, Sampling::Exact).unwrap().value, (1.0 / 6.0f64).sqrt(), max_relative = 1e-14);
        assert_eq!(orbit_gamma_norm(&g, &CVec::zeros(1), Sampling::Exact).unwrap().value, 0.0);
        let rot = real_gen(2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(orbit_gamma_norm(&rot, &CVec::zeros(2), Sampling::Exact), Err(Error::NotStable(_))));
    }

    #[test]
    fn orbit_norm_lp_matches_quadrature_of_pettis_operator() {
        let g = random_hurwitz(5, 3);
        let gen = Generator::new(g.matrix().clone(), SpaceSpec::lp(3, 4.0).unwrap()).unwrap();
        let x = CVec::from_vec(vec![c64(1.0, 0.0), c64(-0.5, 0.0), c64(0.25, 0.0)]);
        let sampling = Sampling::MonteCarlo(McConfig::new(100_000, 1));
        let via_covariance = orbit_gamma_norm(&gen, &x, sampling).unwrap();
        let pettis = PettisOperator::orbit(&gen, &x, 60.0, 600, 8).unwrap();
        let via_quadrature = pettis.gamma_norm(gen.space(), sampling).unwrap();
        let tol = 3.0 * (via_covariance.stderr.powi(2) + via_quadrature.stderr.powi(2)).sqrt();
        assert!((via_covariance.value - via_quadrature.value).abs() <= tol);
    }

    #[test]
    fn uniform_bound_examples() {
        for a in [0.5, 1.0, 3.0] {
            let g = Generator::l2(identity(3) * c64(-a, 0.0)).unwrap();
            assert_relative_eq!(uniform_orbit_bound(&g, Sampling::Exact).unwrap().value, 1.0 / (2.0 * a).sqrt(), max_relative = 1e-13);
            let half = Generator::l2(identity(3) * c64(-a / 2.0, 0.0)).unwrap();
            let ratio = uniform_orbit_bound(&half, Sampling::Exact).unwrap().value / uniform_orbit_bound(&g, Sampling::Exact).unwrap().value;
            assert_relative_eq!(ratio, 2f64.sqrt(), max_relative = 1e-13);
        }
        let g = real_gen(2, &[-1.0, 0.0, 0.0, -4.0]);
        assert_relative_eq!(uniform_orbit_bound(&g, Sampling::Exact).unwrap().value, 0.5f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn lp_uniform_bound_is_bracketed() {
        let g = random_hurwitz(9, 4);
        let gen = Generator::new(g.matrix().clone(), SpaceSpec::lp(4, 3.0).unwrap()).unwrap();
        let b = uniform_orbit_bound(&gen, Sampling::MonteCarlo(McConfig::new(20_000, 3))).unwrap();
        assert!(!b.exact);
        assert!(b.lower_estimate <= b.upper_envelope * 1.01);
        assert_relative_eq!(b.upper_envelope, 4f64.powf(1.0 / 6.0) * b.l2_value, max_relative = 1e-12);
    }

    /// `x*Xx` against adaptive quadrature of `∫‖T(t)x‖² dt`.
    #[test]
    fn lyapunov_matches_quadrature() {
        for seed in 0..5 {
            let g = random_hurwitz(seed, 4);
            let x = CVec::from_vec(vec![c64(1.0, 0.0), c64(0.0, 1.0), c64(-0.5, 0.0), c64(0.3, 0.2)]);
            let exact = orbit_gamma_norm(&g, &x, Sampling::Exact).unwrap().value.powi(2);
            let s = spectral_abscissa(&g).unwrap();
            let horizon = 40.0 / s.abs();
            let quad = integrate_adaptive(|t| (expm(&g, t).unwrap() * &x).norm_squared(), 0.0, horizon, 1e-10, 0.0);
            assert_relative_eq!(exact, quad, max_relative = 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn semigroup_law(seed in 0u64..500, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let g = random_hurwitz(seed, 5);
            let lhs = expm(&g, s + t).unwrap();
            let rhs = expm(&g, s).unwrap() * expm(&g, t).unwrap();
            prop_assert!(frobenius_norm(&(&lhs - rhs)) <= 1e-10 * frobenius_norm(&lhs).max(1.0));
        }

        #[test]
        fn resolvent_identity(seed in 0u64..500, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = random_hurwitz(seed, 5);
            let lambda = c64(1.0 + a.abs(), b);
            let mu = c64(0.5, a);
            let rl = resolvent(&g, lambda).unwrap();
            let rm = resolvent(&g, mu).unwrap();
            let lhs = &rl - &rm;
            let rhs = (&rl * &rm) * (mu - lambda);
            prop_assert!(frobenius_norm(&(&lhs - rhs)) <= 1e-10 * frobenius_norm(&lhs).max(1.0));
        }
    }
}

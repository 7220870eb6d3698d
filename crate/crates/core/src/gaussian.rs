//! Gaussian and Rademacher sums in finite-dimensional `ℓᵖ` spaces.
//!
//! `‖Σ γₙ xₙ‖_{L²(Ω;E)}` is exact on `ℓ²` (the square root of `Σ‖xₙ‖²`) and
//! estimated by seeded Monte Carlo on `ℓᵖ`. For an operator `R` from a
//! finite-dimensional Hilbert space, the γ-radonifying norm is that sum over
//! the images of an orthonormal basis, i.e. over the columns of `R`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frames::{frame_constants_gram, FrameConstants};
use crate::linalg::{column_span_basis, haar_orthonormal, is_finite, is_real, psd_sqrt, stack_columns, CMat, CVec, C64};
use crate::mc::{derive_seed, sample_moments, McConfig, Sampling};
use crate::space::SpaceSpec;

pub use crate::space::Norm;

/// Number of combined standard errors a Monte Carlo deficit may reach
/// before an inequality counts as violated.
pub const VIOLATION_SIGMAS: f64 = 3.0;
const SPAN_RANK_TOLERANCE: f64 = 1e-10;
const MAX_ENUMERATED_SIGNS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    Exact,
    MonteCarlo,
}

/// Estimate of `sqrt(𝔼‖X‖²)` for a centered Gaussian or Rademacher sum `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSumEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub method: EstimateMethod,
}

impl GaussianSumEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0, samples: 0, seed: None, method: EstimateMethod::Exact }
    }

    pub fn is_exact(&self) -> bool {
        self.method == EstimateMethod::Exact
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { value: self.value * c, stderr: self.stderr * c.abs(), ..*self }
    }
}

/// Combined Monte Carlo tolerance for comparing two estimates, each scaled.
pub fn combined_tolerance(terms: &[(f64, &GaussianSumEstimate)]) -> f64 {
    VIOLATION_SIGMAS * terms.iter().map(|(c, e)| (c * e.stderr).powi(2)).sum::<f64>().sqrt()
}

/// `X = factor · z` with `z` standard normal, in real coordinates: `m` rows
/// for real vectors, `2m` stacked rows `[Re; Im]` for complex ones.
#[derive(Debug, Clone)]
pub(crate) struct StackedGaussian {
    factor: DMatrix<f64>,
    dim: usize,
    complex: bool,
}

impl StackedGaussian {
    pub(crate) fn from_columns(cols: &CMat) -> Self {
        let dim = cols.nrows();
        let complex = !is_real(cols);
        let factor = if complex { stack_columns(cols) } else { cols.map(|z| z.re) };
        Self { factor, dim, complex }.compressed()
    }

    /// From the covariance of the real (or stacked complex) coordinates.
    pub(crate) fn from_covariance(cov: &DMatrix<f64>, dim: usize, complex: bool) -> Self {
        debug_assert_eq!(cov.nrows(), if complex { 2 * dim } else { dim });
        Self { factor: psd_sqrt(cov), dim, complex }
    }

    /// Same distribution with at most `rows` columns.
    fn compressed(self) -> Self {
        if self.factor.ncols() <= self.factor.nrows() {
            return self;
        }
        let cov = &self.factor * self.factor.transpose();
        Self { factor: psd_sqrt(&cov), ..self }
    }

    fn second_moment(&self) -> f64 {
        self.factor.iter().map(|x| x * x).sum()
    }

    fn squared_norm(&self, y: &DVector<f64>, p: f64) -> f64 {
        let m = self.dim;
        let modulus = |i: usize| if self.complex { y[i].hypot(y[i + m]) } else { y[i].abs() };
        if p == 2.0 {
            return (0..m).map(|i| modulus(i).powi(2)).sum();
        }
        let s: f64 = (0..m).map(|i| modulus(i).powf(p)).sum();
        s.powf(2.0 / p)
    }

    pub(crate) fn estimate(&self, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
        let cfg = match (space.is_hilbert(), sampling) {
            (true, Sampling::Exact | Sampling::Auto(_)) => {
                return Ok(GaussianSumEstimate::exact(self.second_moment().sqrt()));
            }
            (false, Sampling::Exact) => return Err(Error::ExactPathUnavailable),
            (_, Sampling::MonteCarlo(cfg) | Sampling::Auto(cfg)) => cfg,
        };
        self.monte_carlo(space.p(), &cfg)
    }

    fn monte_carlo(&self, p: f64, cfg: &McConfig) -> Result<GaussianSumEstimate> {
        if cfg.samples == 0 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
        }
        let k = self.factor.ncols();
        let rows = self.factor.nrows();
        if k == 0 {
            return Ok(GaussianSumEstimate { value: 0.0, stderr: 0.0, samples: cfg.samples, seed: Some(cfg.seed), method: EstimateMethod::MonteCarlo });
        }
        let moments = sample_moments(
            cfg,
            || (DVector::<f64>::zeros(k), DVector::<f64>::zeros(rows)),
            |(z, y), rng| {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                self.factor.mul_to(z, y);
                self.squared_norm(y, p)
            },
        );
        let (value, stderr) = moments.sqrt_mean();
        Ok(GaussianSumEstimate { value, stderr, samples: cfg.samples, seed: Some(cfg.seed), method: EstimateMethod::MonteCarlo })
    }
}

fn columns_from_vectors(vectors: &[CVec], space: &SpaceSpec) -> Result<CMat> {
    for v in vectors {
        if v.len() != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, found: v.len() });
        }
    }
    Ok(CMat::from_fn(space.dim, vectors.len(), |i, j| vectors[j][i]))
}

/// `‖Σ γₙ xₙ‖_{L²(Ω;E)}` for standard Gaussians `γₙ`.
pub fn gaussian_sum_norm(vectors: &[CVec], space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    let cols = columns_from_vectors(vectors, space)?;
    gaussian_sum_norm_of_columns(&cols, space, sampling)
}

/// [`gaussian_sum_norm`] over the columns of a matrix.
pub fn gaussian_sum_norm_of_columns(cols: &CMat, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    if cols.nrows() != space.dim {
        return Err(Error::DimensionMismatch { expected: space.dim, found: cols.nrows() });
    }
    StackedGaussian::from_columns(cols).estimate(space, sampling)
}

/// Norm of a centered Gaussian vector given by the covariance of its real
/// coordinates (`[Re; Im]`-stacked when `complex`).
pub fn gaussian_norm_from_covariance(cov: &DMatrix<f64>, complex: bool, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    let rows = if complex { 2 * space.dim } else { space.dim };
    if cov.shape() != (rows, rows) {
        return Err(Error::DimensionMismatch { expected: rows, found: cov.nrows() });
    }
    StackedGaussian::from_covariance(cov, space.dim, complex).estimate(space, sampling)
}

/// `R ∈ 𝓑(ℂⁿ, E)` as an `m × n` matrix in an orthonormal basis of the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(CMat);

impl OperatorMatrix {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidArgument("operator matrix must have positive dimensions".into()));
        }
        if !is_finite(&entries) {
            return Err(Error::InvalidArgument("operator matrix has non-finite entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_real(entries: &DMatrix<f64>) -> Result<Self> {
        Self::new(crate::linalg::from_real(entries))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }
}

/// γ-radonifying norm: the Gaussian sum over the columns of `R`. On `ℓ²`
/// this is the Hilbert–Schmidt norm.
pub fn gamma_norm(r: &OperatorMatrix, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    gaussian_sum_norm_of_columns(r.matrix(), space, sampling)
}

/// Almost-summing norm. In finite dimensions the supremum over orthonormal
/// systems is attained by a full basis, so this equals [`gamma_norm`];
/// [`almost_summing_search`] probes that claim.
pub fn almost_summing_norm(r: &OperatorMatrix, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    gamma_norm(r, space, sampling)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupremumSearch {
    pub full_basis: GaussianSumEstimate,
    pub best_partial: GaussianSumEstimate,
    pub best_partial_size: usize,
    pub systems: usize,
    /// Some sampled system beat the full basis by more than the tolerance.
    pub exceeded: bool,
}

/// Evaluates the Gaussian sum over `systems` random partial orthonormal
/// systems (Haar distributed, random size) and compares with the full basis.
pub fn almost_summing_search(r: &OperatorMatrix, space: &SpaceSpec, sampling: Sampling, systems: usize, seed: u64) -> Result<SupremumSearch> {
    let full = gamma_norm(r, space, sampling)?;
    let n = r.cols();
    let complex = !is_real(r.matrix());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = GaussianSumEstimate::exact(0.0);
    let mut best_size = 0;
    let mut exceeded = false;
    for s in 0..systems {
        let k = rng.random_range(1..=n);
        let q = haar_orthonormal(&mut rng, n, k, complex);
        let est = gaussian_sum_norm_of_columns(&(r.matrix() * q), space, sampling.derive(derive_seed(seed, s as u64)))?;
        if est.value - full.value > combined_tolerance(&[(1.0, &full), (1.0, &est)]) + 1e-12 * full.value {
            exceeded = true;
        }
        if est.value > best.value {
            best = est;
            best_size = k;
        }
    }
    Ok(SupremumSearch { full_basis: full, best_partial: best, best_partial_size: best_size, systems, exceeded })
}

/// One side-by-side comparison `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub constant: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub method: EstimateMethod,
    pub violated: bool,
}

impl BoundReport {
    fn new(lhs: (f64, &GaussianSumEstimate), rhs: (f64, &GaussianSumEstimate), constant: f64) -> Self {
        let l = lhs.1.scaled(lhs.0);
        let r = rhs.1.scaled(rhs.0);
        let tolerance = combined_tolerance(&[(lhs.0, lhs.1), (rhs.0, rhs.1)]);
        let margin = r.value - l.value;
        // rounding slack for the exact path
        let slack = 1e-12 * l.value.abs().max(r.value.abs());
        let method = if l.is_exact() && r.is_exact() { EstimateMethod::Exact } else { EstimateMethod::MonteCarlo };
        Self {
            lhs: l.value,
            lhs_stderr: l.stderr,
            rhs: r.value,
            rhs_stderr: r.stderr,
            constant,
            margin,
            tolerance,
            method,
            violated: margin < -(tolerance + slack),
        }
    }
}

fn family_images(r: &OperatorMatrix, f_cols: &CMat) -> Result<CMat> {
    if f_cols.nrows() != r.cols() {
        return Err(Error::DimensionMismatch { expected: r.cols(), found: f_cols.nrows() });
    }
    if f_cols.ncols() == 0 {
        return Err(Error::EmptyIndexSet);
    }
    Ok(r.matrix() * f_cols)
}

fn check_space(r: &OperatorMatrix, space: &SpaceSpec) -> Result<()> {
    if r.rows() != space.dim {
        return Err(Error::DimensionMismatch { expected: space.dim, found: r.rows() });
    }
    Ok(())
}

/// Frame constants of the columns of `f_cols`, from their Gram matrix.
pub fn column_frame_constants(f_cols: &CMat) -> Result<FrameConstants> {
    frame_constants_gram(&(f_cols.adjoint() * f_cols))
}

/// `‖Σ γₙ R fₙ‖ ≤ C_H ‖R‖_γ` for a Hilbert sequence `(fₙ)` given by its
/// coordinates in the domain basis of `R`. `c_hilbert` defaults to the
/// Gram constant of the columns.
pub fn check_hilbert_sequence_bound(
    r: &OperatorMatrix,
    f_cols: &CMat,
    c_hilbert: Option<f64>,
    space: &SpaceSpec,
    sampling: Sampling,
) -> Result<BoundReport> {
    check_space(r, space)?;
    let images = family_images(r, f_cols)?;
    let c_h = match c_hilbert {
        Some(c) => c,
        None => column_frame_constants(f_cols)?.c_hilbert,
    };
    let lhs = gaussian_sum_norm_of_columns(&images, space, sampling)?;
    let gamma = gamma_norm(r, space, sampling)?;
    Ok(BoundReport::new((1.0, &lhs), (c_h, &gamma), c_h))
}

/// `‖R‖_{γ(𝓗_f,E)} ≤ C_B⁻¹ ‖Σ γₙ R fₙ‖` where `𝓗_f` is the span of the
/// family; `c_bessel` defaults to the Gram constant of the columns.
pub fn check_bessel_sequence_bound(
    r: &OperatorMatrix,
    f_cols: &CMat,
    c_bessel: Option<f64>,
    space: &SpaceSpec,
    sampling: Sampling,
) -> Result<BoundReport> {
    check_space(r, space)?;
    let images = family_images(r, f_cols)?;
    let c_b = match c_bessel {
        Some(c) => c,
        None => column_frame_constants(f_cols)?.c_bessel,
    };
    let scale = f_cols.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !(c_b > 1e-12 * scale) {
        return Err(Error::DegenerateFamily(c_b));
    }
    let span = column_span_basis(f_cols, SPAN_RANK_TOLERANCE);
    let restricted = OperatorMatrix::new(r.matrix() * span)?;
    let lhs = gamma_norm(&restricted, space, sampling)?;
    let sum = gaussian_sum_norm_of_columns(&images, space, sampling)?;
    Ok(BoundReport::new((1.0, &lhs), (1.0 / c_b, &sum), c_b))
}

/// Both sides of `C_B‖R‖_γ ≤ ‖Σ γₙ R fₙ‖ ≤ C_H‖R‖_γ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub lower: BoundReport,
    pub upper: BoundReport,
    pub holds: bool,
}

pub fn riesz_sandwich(r: &OperatorMatrix, f_cols: &CMat, constants: &FrameConstants, space: &SpaceSpec, sampling: Sampling) -> Result<SandwichReport> {
    check_space(r, space)?;
    let images = family_images(r, f_cols)?;
    let middle = gaussian_sum_norm_of_columns(&images, space, sampling)?;
    let gamma = gamma_norm(r, space, sampling)?;
    let lower = BoundReport::new((constants.c_bessel, &gamma), (1.0, &middle), constants.c_bessel);
    let upper = BoundReport::new((1.0, &middle), (constants.c_hilbert, &gamma), constants.c_hilbert);
    let holds = !lower.violated && !upper.violated;
    Ok(SandwichReport { lower, upper, holds })
}

/// `sqrt(𝔼‖Σ rₙ xₙ‖²)` for a Rademacher sequence `(rₙ)`. On `ℓ²` this is
/// `sqrt(Σ‖xₙ‖²)`; elsewhere the expectation is enumerated over all sign
/// patterns when there are few vectors, and sampled otherwise.
pub fn rademacher_sum_norm(vectors: &[CVec], space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    let cols = columns_from_vectors(vectors, space)?;
    rademacher_sum_norm_of_columns(&cols, space, sampling)
}

pub fn rademacher_sum_norm_of_columns(cols: &CMat, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
    if cols.nrows() != space.dim {
        return Err(Error::DimensionMismatch { expected: space.dim, found: cols.nrows() });
    }
    let k = cols.ncols();
    let p = space.p();
    let sq_norm = |v: &CVec| space.norm_of(v.iter().copied()).powi(2);
    let exact = |cols: &CMat| -> f64 {
        if space.is_hilbert() {
            return cols.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        }
        if k == 0 {
            return 0.0;
        }
        // ±x symmetry: fix the first sign
        let patterns = 1usize << (k - 1);
        let mut total = 0.0;
        let mut v = CVec::zeros(cols.nrows());
        for mask in 0..patterns {
            v.copy_from(&cols.column(0));
            for j in 1..k {
                if mask & (1 << (j - 1)) != 0 {
                    v -= cols.column(j);
                } else {
                    v += cols.column(j);
                }
            }
            total += sq_norm(&v);
        }
        (total / patterns as f64).sqrt()
    };
    let enumerable = space.is_hilbert() || k <= MAX_ENUMERATED_SIGNS;
    let cfg = match sampling {
        Sampling::Exact if enumerable => return Ok(GaussianSumEstimate::exact(exact(cols))),
        Sampling::Exact => return Err(Error::ExactPathUnavailable),
        Sampling::Auto(_) if space.is_hilbert() || k <= 12 => return Ok(GaussianSumEstimate::exact(exact(cols))),
        Sampling::Auto(cfg) | Sampling::MonteCarlo(cfg) => cfg,
    };
    if cfg.samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let moments = sample_moments(
        &cfg,
        || CVec::zeros(cols.nrows()),
        |v, rng| {
            v.fill(C64::new(0.0, 0.0));
            for j in 0..k {
                if rng.random::<bool>() {
                    *v += cols.column(j);
                } else {
                    *v -= cols.column(j);
                }
            }
            let s: f64 = v.iter().map(|z| z.norm().powf(p)).sum();
            s.powf(2.0 / p)
        },
    );
    let (value, stderr) = moments.sqrt_mean();
    Ok(GaussianSumEstimate { value, stderr, samples: cfg.samples, seed: Some(cfg.seed), method: EstimateMethod::MonteCarlo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, from_real, gaussian_matrix, lp_operator_norm_upper, spectral_norm};
    use crate::quadrature::gauss_legendre;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn mc(samples: usize, seed: u64) -> Sampling {
        Sampling::MonteCarlo(McConfig::new(samples, seed))
    }

    fn rvec(xs: &[f64]) -> CVec {
        CVec::from_iterator(xs.len(), xs.iter().map(|&x| c64(x, 0.0)))
    }

    fn random_op(seed: u64, m: usize, n: usize, complex: bool) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OperatorMatrix::new(gaussian_matrix(&mut rng, m, n, complex)).unwrap()
    }

    #[test]
    fn exact_l2_sum() {
        let v = [rvec(&[3.0, 0.0]), rvec(&[0.0, 4.0])];
        let est = gaussian_sum_norm(&v, &SpaceSpec::l2(2), Sampling::Exact).unwrap();
        assert_eq!(est.value, 5.0);
        assert_eq!(est.stderr, 0.0);
        assert!(est.is_exact());
    }

    #[test]
    fn exact_path_unavailable_on_lp() {
        let v = [rvec(&[1.0, 0.0])];
        let space = SpaceSpec::lp(2, 4.0).unwrap();
        assert_eq!(gaussian_sum_norm(&v, &space, Sampling::Exact), Err(Error::ExactPathUnavailable));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = [rvec(&[1.0, 0.0, 2.0])];
        assert_eq!(
            gaussian_sum_norm(&v, &SpaceSpec::l2(2), Sampling::Exact),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn single_vector_any_norm() {
        let x = rvec(&[1.0, -2.0, 0.5]);
        for space in [SpaceSpec::l2(3), SpaceSpec::lp(3, 3.0).unwrap(), SpaceSpec::lp(3, 1.0).unwrap()] {
            let est = gaussian_sum_norm(std::slice::from_ref(&x), &space, mc(100_000, 7)).unwrap();
            let norm = space.norm_of(x.iter().copied());
            assert!((est.value - norm).abs() <= 3.0 * est.stderr, "{} vs {norm} ± {}", est.value, est.stderr);
        }
    }

    /// `(𝔼(γ₁⁴ + γ₂⁴)^{1/2})^{1/2}` by tensor Gauss–Hermite quadrature.
    fn gauss_hermite_l4_oracle() -> f64 {
        let n = 80;
        // Golub–Welsch for the probabilists' Hermite weight e^{-x²/2}
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64).sqrt();
            jac[(i, i - 1)] = b;
            jac[(i - 1, i)] = b;
        }
        let eig = nalgebra::SymmetricEigen::new(jac);
        let nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let weights: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += weights[i] * weights[j] * (nodes[i].powi(4) + nodes[j].powi(4)).sqrt();
            }
        }
        total.sqrt()
    }

    #[test]
    fn l4_basis_sum_matches_quadrature() {
        let oracle = gauss_hermite_l4_oracle();
        // polar cross-check: 𝔼r²·mean_θ (cos⁴+sin⁴)^{1/2}
        let (x, w) = gauss_legendre(64);
        let polar: f64 = x.iter().zip(&w).map(|(t, wt)| {
            let th = std::f64::consts::PI * (t + 1.0);
            wt * (th.cos().powi(4) + th.sin().powi(4)).sqrt()
        }).sum::<f64>() / 2.0 * 2.0;
        assert_relative_eq!(oracle, polar.sqrt(), max_relative = 1e-4);
        let v = [rvec(&[1.0, 0.0]), rvec(&[0.0, 1.0])];
        let est = gaussian_sum_norm(&v, &SpaceSpec::lp(2, 4.0).unwrap(), mc(100_000, 3)).unwrap();
        assert!((est.value - oracle).abs() <= 3.0 * est.stderr, "{} vs {oracle} ± {}", est.value, est.stderr);
    }

    #[test]
    fn gamma_norm_examples() {
        let r = OperatorMatrix::from_real(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
        assert_relative_eq!(gamma_norm(&r, &SpaceSpec::l2(2), Sampling::Exact).unwrap().value, 5f64.sqrt(), max_relative = 1e-15);
        let zero = OperatorMatrix::new(CMat::zeros(2, 2)).unwrap();
        assert_eq!(gamma_norm(&zero, &SpaceSpec::l2(2), Sampling::Exact).unwrap().value, 0.0);
        let space = SpaceSpec::lp(2, 4.0).unwrap();
        let id = OperatorMatrix::new(CMat::identity(2, 2)).unwrap();
        let a = gamma_norm(&id, &space, mc(20_000, 5)).unwrap();
        let b = gaussian_sum_norm(&[rvec(&[1.0, 0.0]), rvec(&[0.0, 1.0])], &space, mc(20_000, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn almost_summing_equals_gamma_and_search_stays_below() {
        let id3 = OperatorMatrix::new(CMat::identity(3, 3)).unwrap();
        assert_relative_eq!(almost_summing_norm(&id3, &SpaceSpec::l2(3), Sampling::Exact).unwrap().value, 3f64.sqrt(), max_relative = 1e-15);
        let diag = OperatorMatrix::from_real(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]))).unwrap();
        let s = almost_summing_search(&diag, &SpaceSpec::l2(2), Sampling::Exact, 50, 1).unwrap();
        assert!(!s.exceeded && s.best_partial.value <= 5f64.sqrt() + 1e-12);
        let r = random_op(8, 4, 4, false);
        let s = almost_summing_search(&r, &SpaceSpec::lp(4, 3.0).unwrap(), mc(20_000, 2), 100, 3).unwrap();
        assert!(!s.exceeded, "{s:?}");
    }

    #[test]
    fn hilbert_bound_equality_cases() {
        let r = random_op(1, 3, 3, false);
        let space = SpaceSpec::l2(3);
        let on = CMat::identity(3, 3);
        let rep = check_hilbert_sequence_bound(&r, &on, Some(1.0), &space, Sampling::Exact).unwrap();
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-13);
        let scaled = CMat::identity(3, 3) * c64(2.0, 0.0);
        let rep = check_hilbert_sequence_bound(&r, &scaled, None, &space, Sampling::Exact).unwrap();
        assert_relative_eq!(rep.constant, 2.0, max_relative = 1e-13);
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-13);
        assert!(!rep.violated);
    }

    #[test]
    fn bessel_bound_equality_cases() {
        let r = random_op(2, 3, 3, true);
        let space = SpaceSpec::l2(3);
        let rep = check_bessel_sequence_bound(&r, &CMat::identity(3, 3), Some(1.0), &space, Sampling::Exact).unwrap();
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-13);
        let half = CMat::identity(3, 3) * c64(0.5, 0.0);
        let rep = check_bessel_sequence_bound(&r, &half, None, &space, Sampling::Exact).unwrap();
        assert_relative_eq!(rep.constant, 0.5, max_relative = 1e-13);
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-13);
        let hs = crate::linalg::frobenius_norm(r.matrix());
        assert_relative_eq!(rep.lhs, hs, max_relative = 1e-13);
    }

    #[test]
    fn degenerate_family_is_rejected() {
        let r = random_op(3, 2, 2, false);
        let f = from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]));
        assert!(matches!(
            check_bessel_sequence_bound(&r, &f, None, &SpaceSpec::l2(2), Sampling::Exact),
            Err(Error::DegenerateFamily(_))
        ));
    }

    #[test]
    fn bounds_on_random_exponential_families() {
        use crate::frames::{exponential_family_constants, gram_embedding, gram_matrix, ExponentialFamily};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for i in 0..100 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let a = rng.random_range(0.25..2.0);
            let rho = rng.random_range(0.0..1.0);
            let fam = ExponentialFamily::new(a, rho, -(n as i64) / 2, (n as i64 + 1) / 2 - 1).unwrap();
            let f = gram_embedding(&gram_matrix(&fam, &fam.indices()).unwrap());
            let r = OperatorMatrix::new(gaussian_matrix(&mut rng, m, n, i % 2 == 0)).unwrap();
            let consts = exponential_family_constants(a).unwrap();
            let space = SpaceSpec::l2(m);
            let h = check_hilbert_sequence_bound(&r, &f, Some(consts.c_hilbert), &space, Sampling::Exact).unwrap();
            assert!(h.margin >= -1e-12 * h.rhs, "{h:?}");
            let b = check_bessel_sequence_bound(&r, &f, Some(consts.c_bessel), &space, Sampling::Exact).unwrap();
            assert!(b.margin >= -1e-12 * b.rhs, "{b:?}");
        }
    }

    #[test]
    fn bessel_bound_on_l4() {
        use crate::frames::{exponential_family_constants, gram_embedding, gram_matrix, ExponentialFamily};
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for i in 0..20 {
            let n = rng.random_range(1..=5);
            let fam = ExponentialFamily::with_len(rng.random_range(0.25..2.0), 0.0, n).unwrap();
            let f = gram_embedding(&gram_matrix(&fam, &fam.indices()).unwrap());
            let r = OperatorMatrix::new(gaussian_matrix(&mut rng, 4, n, false)).unwrap();
            let consts = exponential_family_constants(fam.a).unwrap();
            let rep = check_bessel_sequence_bound(&r, &f, Some(consts.c_bessel), &SpaceSpec::lp(4, 4.0).unwrap(), mc(20_000, i)).unwrap();
            assert!(rep.margin >= -rep.tolerance, "{rep:?}");
        }
    }

    #[test]
    fn monte_carlo_agrees_with_exact_on_l2() {
        let r = random_op(4, 5, 7, true);
        let space = SpaceSpec::l2(5);
        let exact = gamma_norm(&r, &space, Sampling::Exact).unwrap();
        let est = gamma_norm(&r, &space, mc(100_000, 9)).unwrap();
        assert!((exact.value - est.value).abs() <= 3.0 * est.stderr);
        assert_relative_eq!(exact.value, crate::linalg::frobenius_norm(r.matrix()), max_relative = 1e-14);
    }

    #[test]
    fn stderr_shrinks_like_inverse_sqrt() {
        let r = random_op(5, 4, 4, false);
        let space = SpaceSpec::lp(4, 3.0).unwrap();
        let mut ratio = 0.0;
        for rep in 0..20 {
            let a = gamma_norm(&r, &space, mc(10_000, 100 + rep)).unwrap();
            let b = gamma_norm(&r, &space, mc(20_000, 200 + rep)).unwrap();
            ratio += b.stderr / a.stderr;
        }
        ratio /= 20.0;
        assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "mean ratio {ratio}");
    }

    #[test]
    fn ideal_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (i, space) in [SpaceSpec::l2(4), SpaceSpec::lp(4, 3.0).unwrap()].iter().enumerate() {
            for k in 0..5 {
                let left = gaussian_matrix(&mut rng, 4, 4, false);
                let r = gaussian_matrix(&mut rng, 4, 3, false);
                let right = gaussian_matrix(&mut rng, 3, 3, false);
                let sampling = mc(40_000, 10 * i as u64 + k);
                let lhs = gamma_norm(&OperatorMatrix::new(&left * &r * &right).unwrap(), space, sampling).unwrap();
                let inner = gamma_norm(&OperatorMatrix::new(r.clone()).unwrap(), space, sampling).unwrap();
                let c = lp_operator_norm_upper(&left, space.p()) * spectral_norm(&right);
                assert!(lhs.value <= c * inner.value + combined_tolerance(&[(1.0, &lhs), (c, &inner)]));
            }
        }
    }

    #[test]
    fn rademacher_sums() {
        let v = [rvec(&[3.0, 0.0]), rvec(&[0.0, 4.0])];
        assert_eq!(rademacher_sum_norm(&v, &SpaceSpec::l2(2), Sampling::Exact).unwrap().value, 5.0);
        // ℓ¹: 𝔼|±3|+|±4| squared = 49 deterministically
        let l1 = SpaceSpec::lp(2, 1.0).unwrap();
        assert_relative_eq!(rademacher_sum_norm(&v, &l1, Sampling::Exact).unwrap().value, 7.0, max_relative = 1e-15);
        let r = random_op(6, 3, 6, false);
        let cols: Vec<CVec> = (0..6).map(|j| r.matrix().column(j).into_owned()).collect();
        let exact = rademacher_sum_norm(&cols, &SpaceSpec::l2(3), Sampling::Exact).unwrap();
        let est = rademacher_sum_norm(&cols, &SpaceSpec::l2(3), mc(50_000, 4)).unwrap();
        assert!((exact.value - est.value).abs() <= 3.0 * est.stderr);
        let l3 = SpaceSpec::lp(3, 3.0).unwrap();
        let enumerated = rademacher_sum_norm(&cols, &l3, Sampling::Exact).unwrap();
        let sampled = rademacher_sum_norm(&cols, &l3, mc(50_000, 4)).unwrap();
        assert!((enumerated.value - sampled.value).abs() <= 3.0 * sampled.stderr);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn estimates_are_deterministic(seed in 0u64..1000, p in 1.0f64..6.0) {
            let r = random_op(seed, 3, 4, seed % 2 == 0);
            let space = SpaceSpec::lp(3, p).unwrap();
            let a = gamma_norm(&r, &space, mc(5_000, seed)).unwrap();
            let b = gamma_norm(&r, &space, mc(5_000, seed)).unwrap();
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
            prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }

        #[test]
        fn riesz_sandwich_holds_exactly_on_l2(seed in 0u64..1000, a in 0.25f64..2.0, n in 1usize..8) {
            use crate::frames::{exponential_family_constants, gram_embedding, gram_matrix, ExponentialFamily};
            let fam = ExponentialFamily::with_len(a, 0.5, n).unwrap();
            let f = gram_embedding(&gram_matrix(&fam, &fam.indices()).unwrap());
            let r = random_op(seed, 3, n, true);
            let rep = riesz_sandwich(&r, &f, &exponential_family_constants(a).unwrap(), &SpaceSpec::l2(3), Sampling::Exact).unwrap();
            prop_assert!(rep.holds);
        }
    }
}

//! From γ-integrable orbits to exponential stability: the ε-shifted orbits stay
//! γ-integrable, and invariant measures for rank-one noise already decide the
//! question for all noise operators.

use serde::Serialize;

use super::perturbation::perturbation_margin;
use super::{invariant_measure_exists, ScpProblem};
use crate::error::{Error, Result};
use crate::gaussian::GaussianSumEstimate;
use crate::linalg::{c64, identity, CMat, CVec};
use crate::mc::Sampling;
use crate::semigroup::{
    orbit_gamma_norm, require_stable, resolvent_rbound_datko, spectral_abscissa, spectrum, DatkoConfig, Generator, StabilityCertificate,
    HURWITZ_MARGIN,
};
use crate::serial;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOneSweep {
    /// Number of `x ⊗ h` pairs with `x`, `h` basis vectors.
    pub pairs: usize,
    pub all_exist: bool,
    /// Invariant measure for `B = I`.
    pub full_exists: bool,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatkoPazyReport {
    /// `min(ε₀, δ)/2`.
    pub epsilon: f64,
    pub epsilon0: f64,
    pub margin: f64,
    pub certificate: StabilityCertificate,
    /// `s(A + εI)`.
    pub shifted_abscissa: f64,
    /// `‖e^{ε·}T(·)eᵢ‖_{γ(ℝ₊,E)}` over the basis.
    pub shifted_basis_norms: Vec<GaussianSumEstimate>,
    pub shifted_norms_finite: bool,
    /// `s(A) ≤ −ε`.
    pub abscissa_bound_holds: bool,
    pub rank_one: RankOneSweep,
}

fn basis_vector(m: usize, i: usize) -> CVec {
    let mut e = CVec::zeros(m);
    e[i] = c64(1.0, 0.0);
    e
}

/// Invariant measures of `dU = AU dt + (x ⊗ h) dW` for basis pairs `(x, h)`,
/// compared with the full-rank noise `B = I`.
pub fn rank_one_sweep(gen: &Generator, noise_dim: usize) -> Result<RankOneSweep> {
    let m = gen.dim();
    let euclid = gen.on_l2();
    let mut all_exist = true;
    for i in 0..m {
        for j in 0..noise_dim {
            let mut b = CMat::zeros(m, noise_dim);
            b[(i, j)] = c64(1.0, 0.0);
            let prob = ScpProblem::new(euclid.clone(), b)?;
            all_exist &= invariant_measure_exists(&prob, Sampling::Exact)?.exists;
        }
    }
    let full_exists = invariant_measure_exists(&ScpProblem::new(euclid, identity(m))?, Sampling::Exact)?.exists;
    Ok(RankOneSweep { pairs: m * noise_dim, all_exist, full_exists, consistent: all_exist == full_exists })
}

/// Certifies exponential stability from γ-integrable orbits: builds the
/// resolvent certificate, picks `ε = min(ε₀, δ)/2` from the certificate and
/// the perturbation margin of `P = εI`, and checks that every basis orbit of
/// `e^{εt}T(t)` is γ-integrable and that rank-one noise gives invariant
/// measures for `A + εI`.
pub fn datko_pazy_certify(gen: &Generator, sampling: Sampling) -> Result<DatkoPazyReport> {
    let s = require_stable(gen)?;
    let certificate = resolvent_rbound_datko(gen, &DatkoConfig::default(), sampling)?;
    let margin = perturbation_margin(gen)?.delta;
    let epsilon = 0.5 * certificate.epsilon0.min(margin);
    let shifted = gen.shifted(epsilon);
    let shifted_abscissa = spectral_abscissa(&shifted)?;
    let m = gen.dim();
    let mut shifted_basis_norms = Vec::with_capacity(m);
    for i in 0..m {
        shifted_basis_norms.push(orbit_gamma_norm(&shifted, &basis_vector(m, i), sampling.derive(0xc0 + i as u64))?);
    }
    let shifted_norms_finite = shifted_abscissa < -HURWITZ_MARGIN && shifted_basis_norms.iter().all(|n| n.value.is_finite());
    let rank_one = rank_one_sweep(&shifted, m)?;
    Ok(DatkoPazyReport {
        epsilon,
        epsilon0: certificate.epsilon0,
        margin,
        certificate,
        shifted_abscissa,
        shifted_basis_norms,
        shifted_norms_finite,
        abscissa_bound_holds: s <= -epsilon,
        rank_one,
    })
}

/// Rank-one noise `x ⊗ e₁` whose orbit never decays, built from an eigenvector
/// of an eigenvalue with `Re μ ≥ 0`. Only meaningful outside the stable case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureWitness {
    pub eigenvalue: [f64; 2],
    #[serde(serialize_with = "serial::vector")]
    pub direction: CVec,
    /// `‖(A − μ)x‖`.
    pub residual: f64,
    pub out_of_theorem: bool,
}

pub fn rank_one_failure_witness(gen: &Generator) -> Result<Option<FailureWitness>> {
    let spec = spectrum(gen)?;
    let Some(mu) = spec.iter().copied().filter(|mu| mu.re >= -HURWITZ_MARGIN).max_by(|a, b| a.re.total_cmp(&b.re)) else {
        return Ok(None);
    };
    let shifted = gen.matrix() - identity(gen.dim()) * mu;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::EigenSolverFailure)?;
    let (k, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).ok_or(Error::EigenSolverFailure)?;
    let x: CVec = v_t.row(k).adjoint();
    let residual = (gen.matrix() * &x - &x * mu).norm();
    Ok(Some(FailureWitness { eigenvalue: [mu.re, mu.im], direction: x, residual, out_of_theorem: true }))
}

//! Bounded perturbations `A + P`: the invariant-measure margin and the
//! finite-horizon solution under arbitrary bounded `P`.

use serde::Serialize;

use super::{invariant_measure_exists, resolvent_transform_norm, solution_exists, InvariantMeasureReport, ScpProblem, SolutionReport, TransformNorm};
use crate::error::{Error, Result};
use crate::gaussian::VIOLATION_SIGMAS;
use crate::linalg::{c64, frobenius_norm, identity, lp_operator_norm_upper, CMat};
use crate::mc::Sampling;
use crate::semigroup::{orbit_gamma_norm, require_stable, resolvent, resolvent_line_sup, spectral_abscissa, Generator};
use crate::space::SpaceSpec;

/// Certified upper bound on `‖P‖` in the operator norm of `space`.
pub fn operator_norm_bound(p: &CMat, space: &SpaceSpec) -> f64 {
    lp_operator_norm_upper(p, space.p())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    /// `δ = 1/𝓡{R(is, A) : s ∈ ℝ}`.
    pub delta: f64,
    /// R-bound used for `δ`: exact on `ℓ²`, the certified envelope otherwise.
    pub rbound: f64,
    pub rbound_exact: bool,
    /// Euclidean supremum `sup_s ‖R(is, A)‖₂`.
    pub l2_rbound: f64,
    pub argmax_im: f64,
}

/// `δ = 1/𝓡{R(is, A) : s ∈ ℝ}`. On `ℓᵖ` the R-bound is replaced by
/// `m^{|1/2−1/p|}` times its Euclidean value, which makes `δ` a lower margin.
pub fn perturbation_margin(gen: &Generator) -> Result<MarginReport> {
    require_stable(gen)?;
    let line = resolvent_line_sup(&gen.on_l2(), 0.0)?;
    let exact = gen.space().is_hilbert();
    let rbound = if exact { line.value } else { gen.space().l2_equivalence() * line.value };
    Ok(MarginReport { delta: 1.0 / rbound, rbound, rbound_exact: exact, l2_rbound: line.value, argmax_im: line.argmax_im })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub delta_margin: f64,
    pub p_norm: f64,
    /// `C = 𝓡{R(is, A)}·‖P‖`.
    pub contraction_c: f64,
    /// `1/(1 − C)`.
    pub norm_inflation: f64,
    pub base_transform: TransformNorm,
    pub perturbed_transform: TransformNorm,
    pub inflation_bound_holds: bool,
    pub perturbed_report: InvariantMeasureReport,
    pub holds: bool,
}

/// For `‖P‖ < δ`, `A + P` admits a unique invariant measure and
/// `‖R(i·, A+P)B‖_γ ≤ ‖R(i·, A)B‖_γ/(1 − C)`.
pub fn perturbed_invariant_measure_check(prob: &ScpProblem, p: &CMat, sampling: Sampling) -> Result<PerturbationReport> {
    let gen = prob.generator();
    let margin = perturbation_margin(gen)?;
    let p_norm = operator_norm_bound(p, gen.space());
    if p_norm >= margin.delta {
        return Err(Error::MarginExceeded { norm: p_norm, margin: margin.delta });
    }
    let contraction_c = margin.rbound * p_norm;
    let norm_inflation = 1.0 / (1.0 - contraction_c);
    let base_transform = resolvent_transform_norm(prob, sampling.derive(0xa1))?;
    let perturbed = prob.with_generator(gen.perturbed(p)?)?;
    let perturbed_report = invariant_measure_exists(&perturbed, sampling.derive(0xa2))?;
    if !perturbed_report.exists {
        return Err(Error::NotStable(perturbed_report.s_numeric));
    }
    let perturbed_transform = resolvent_transform_norm(&perturbed, sampling.derive(0xa3))?;
    let tol = VIOLATION_SIGMAS * (perturbed_transform.stderr.powi(2) + (norm_inflation * base_transform.stderr).powi(2)).sqrt();
    let inflation_bound_holds = perturbed_transform.value - tol <= norm_inflation * base_transform.value * (1.0 + 1e-12);
    let holds = perturbed_report.exists && perturbed_report.unique && inflation_bound_holds;
    Ok(PerturbationReport {
        delta_margin: margin.delta,
        p_norm,
        contraction_c,
        norm_inflation,
        base_transform,
        perturbed_transform,
        inflation_bound_holds,
        perturbed_report,
        holds,
    })
}

/// Largest shift tried before giving up.
const MAX_SHIFT: f64 = 1e9;
/// Contraction accepted for the shifted resolvent.
const TARGET_CONTRACTION: f64 = 0.5;
const NEUMANN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPerturbationReport {
    pub omega0: f64,
    /// Shift with `𝓡{R(λ, A − ω₁) : Re λ ≥ 0}·‖P‖ < 1`.
    pub omega1: f64,
    pub shifted_rbound: f64,
    pub p_norm: f64,
    pub contraction_c: f64,
    /// Largest relative gap between `Σ (R(is)P)ⁿ R(is)` and the direct
    /// resolvent of `A − ω₁ + P` over the frequency probes.
    pub neumann_max_error: f64,
    pub neumann_probes: usize,
    /// `‖R(i·, A−ω₁+P)B‖_γ ≤ ‖R(i·, A−ω₁)B‖_γ/(1 − C)`.
    pub transform_bound_holds: bool,
    /// `e^{ω₁T}‖T_{A−ω₁+P}(·)B‖_{γ(ℝ₊)}`, a bound for the perturbed norm on `[0, T]`.
    pub envelope: f64,
    pub envelope_holds: bool,
    pub base: SolutionReport,
    pub perturbed: SolutionReport,
    pub ratio: f64,
}

/// The problem with generator `A + P` has a solution whenever the one with
/// `A` does. The shift `ω₁ > s(A) + 1` is found by doubling until the shifted
/// resolvent contracts `P`, the Neumann factor is checked against direct
/// inversion, and the finite-horizon norms are compared.
pub fn bounded_perturbation_solution(prob: &ScpProblem, p: &CMat, horizon: f64, sampling: Sampling) -> Result<SolutionPerturbationReport> {
    let gen = prob.generator();
    let space = *gen.space();
    if p.shape() != gen.matrix().shape() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: p.nrows() });
    }
    let omega0 = spectral_abscissa(gen)?;
    let p_norm = operator_norm_bound(p, &space);
    let k = space.l2_equivalence();

    let mut step = 1.0;
    let (omega1, shifted, shifted_rbound) = loop {
        let omega = omega0 + 1.0 + step;
        let shifted = gen.shifted(-omega);
        let rbound = k * resolvent_line_sup(&shifted.on_l2(), 0.0)?.value;
        if rbound * p_norm <= TARGET_CONTRACTION {
            break (omega, shifted, rbound);
        }
        step *= 2.0;
        if step > MAX_SHIFT {
            return Err(Error::ShiftSearchFailed(omega));
        }
    };
    let contraction_c = shifted_rbound * p_norm;

    let width = omega1 - omega0;
    let mut probes = vec![0.0];
    for f in [0.1, 1.0, 10.0, 100.0] {
        probes.push(f * width);
        probes.push(-f * width);
    }
    let perturbed_shifted = shifted.perturbed(p)?;
    let m = gen.dim();
    let mut neumann_max_error: f64 = 0.0;
    for &s in &probes {
        let lambda = c64(0.0, s);
        let r = resolvent(&shifted, lambda)?;
        let rp = &r * p;
        let mut term = identity(m);
        let mut factor = identity(m);
        for _ in 0..400 {
            term = &term * &rp;
            factor += &term;
            if frobenius_norm(&term) <= 1e-18 * frobenius_norm(&factor) {
                break;
            }
        }
        let series = factor * &r;
        let direct = resolvent(&perturbed_shifted, lambda)?;
        let gap = frobenius_norm(&(&series - &direct)) / frobenius_norm(&direct).max(1e-300);
        neumann_max_error = neumann_max_error.max(gap);
    }
    if neumann_max_error > NEUMANN_TOLERANCE {
        return Err(Error::CrossCheckFailed(format!("Neumann factor deviates from direct resolvent by {neumann_max_error:.3e}")));
    }

    let shifted_prob = prob.with_generator(shifted.clone())?;
    let perturbed_shifted_prob = prob.with_generator(perturbed_shifted.clone())?;
    let t_base = resolvent_transform_norm(&shifted_prob, sampling.derive(0xb1))?;
    let t_pert = resolvent_transform_norm(&perturbed_shifted_prob, sampling.derive(0xb2))?;
    let inflation = 1.0 / (1.0 - contraction_c);
    let tol = VIOLATION_SIGMAS * (t_pert.stderr.powi(2) + (inflation * t_base.stderr).powi(2)).sqrt();
    let transform_bound_holds = t_pert.value - tol <= inflation * t_base.value * (1.0 + 1e-12);

    let base = solution_exists(prob, horizon, sampling.derive(0xb3))?;
    let perturbed_prob = prob.with_generator(gen.perturbed(p)?)?;
    let perturbed = solution_exists(&perturbed_prob, horizon, sampling.derive(0xb4))?;
    let orbit = infinite_orbit_norm(&perturbed_shifted_prob, sampling.derive(0xb5))?;
    let envelope = (omega1 * horizon).exp() * orbit.0;
    let envelope_tol = VIOLATION_SIGMAS * (perturbed.norm.stderr.powi(2) + ((omega1 * horizon).exp() * orbit.1).powi(2)).sqrt();
    let envelope_holds = perturbed.norm.value - envelope_tol <= envelope * (1.0 + 1e-12);
    let ratio = if base.norm.value > 0.0 { perturbed.norm.value / base.norm.value } else { f64::NAN };
    Ok(SolutionPerturbationReport {
        omega0,
        omega1,
        shifted_rbound,
        p_norm,
        contraction_c,
        neumann_max_error,
        neumann_probes: probes.len(),
        transform_bound_holds,
        envelope,
        envelope_holds,
        base,
        perturbed,
        ratio,
    })
}

/// `‖T(·)B‖_{γ(ℝ₊,H,E)}` with its stderr.
fn infinite_orbit_norm(prob: &ScpProblem, sampling: Sampling) -> Result<(f64, f64)> {
    let gen = prob.generator();
    if prob.b().ncols() == 1 {
        let est = orbit_gamma_norm(gen, &prob.b().column(0).into_owned(), sampling)?;
        return Ok((est.value, est.stderr));
    }
    let report = invariant_measure_exists(prob, sampling)?;
    let est = report.gamma_norm_orbit.ok_or(Error::NotStable(report.s_numeric))?;
    Ok((est.value, est.stderr))
}

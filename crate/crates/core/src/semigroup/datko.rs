//! Resolvent R-bounds from orbit γ-norms: the certificate `s(A) ≤ −1/(4c²)`
//! with `c = C·M`, and the Neumann series behind it.

use std::f64::consts::PI;

use serde::Serialize;

use super::rbound::{half_plane_resolvent_sup, line_family, rbound_estimate, resolvent_line_sup, golden_max};
use super::{require_stable, resolvent, uniform_orbit_bound, Generator};
use crate::error::{Error, Result};
use crate::gaussian::VIOLATION_SIGMAS;
use crate::linalg::{c64, spectral_norm, CMat, C64};
use crate::mc::Sampling;

/// `2π e^{2π}/(e^{2π} − 1)`.
pub const C_UNIV: f64 = 6.294_940_748_526_955_5;
pub const C_UNIV_FORMULA: &str = "2*pi*e^{2pi}/(e^{2pi}-1)";

/// Evaluates [`C_UNIV_FORMULA`].
pub fn c_univ() -> f64 {
    let e = (2.0 * PI).exp();
    2.0 * PI * e / (e - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatkoConfig {
    /// Half-planes `Re λ ≥ δ` of the R-bound profile; empty selects a default
    /// ladder built from `ε₀`.
    pub deltas: Vec<f64>,
    /// Lines `Re λ = −ε` with `ε = f·ε₀`.
    pub line_fractions: Vec<f64>,
}

impl Default for DatkoConfig {
    fn default() -> Self {
        Self { deltas: Vec::new(), line_fractions: vec![0.25, 0.5, 0.75] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub delta: f64,
    pub rbound: f64,
    pub rbound_stderr: f64,
    pub exact: bool,
    /// `c/√δ`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinePoint {
    pub epsilon: f64,
    pub rbound: f64,
    pub rbound_stderr: f64,
    /// `1/(ε₀ − ε)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCertificate {
    pub space: String,
    pub c_univ: f64,
    pub c_univ_formula: String,
    pub orbit_bound_m: f64,
    pub orbit_bound_lower: f64,
    pub orbit_bound_exact: bool,
    pub c: f64,
    pub epsilon0: f64,
    pub s_numeric: f64,
    /// Nonincreasing in `δ`.
    pub rbound_profile: Vec<ProfilePoint>,
    pub line_rbound: Vec<LinePoint>,
    /// `s_numeric ≤ −ε₀`.
    pub conservative: bool,
    pub valid: bool,
}

fn default_deltas(epsilon0: f64) -> Vec<f64> {
    let mut d = vec![epsilon0, 10.0 * epsilon0, 100.0 * epsilon0, 0.05, 0.1, 0.5, 1.0];
    d.sort_by(f64::total_cmp);
    d.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    d
}

/// R-bound of the resolvent on the line `Re λ = re`: the Euclidean supremum
/// on `ℓ²`, a sampled lower estimate otherwise.
fn line_rbound(gen: &Generator, re: f64, sampling: Sampling, tag: u64) -> Result<(f64, f64, bool)> {
    let line = resolvent_line_sup(&gen.on_l2(), re)?;
    if gen.space().is_hilbert() {
        return Ok((line.value, 0.0, true));
    }
    let family = line_family(gen, &line)?;
    let est = rbound_estimate(&family, gen.space(), sampling.derive(tag))?;
    Ok((est.value, est.stderr, false))
}

/// Builds the certificate `(M, c, ε₀, s(A), R-bound profile, line bounds)`.
///
/// `M` is the uniform orbit bound, `c = C·M` bounds `√δ·𝓡{R(λ): Re λ ≥ δ}`
/// and `ε₀ = 1/(4c²)`. Expanding `R(λ)` around `ε₀ + i Im λ` gives the line
/// bounds `1/(ε₀ − ε)` on `Re λ = −ε`, and hence `s(A) ≤ −ε₀`.
pub fn resolvent_rbound_datko(gen: &Generator, config: &DatkoConfig, sampling: Sampling) -> Result<StabilityCertificate> {
    let s_numeric = require_stable(gen)?;
    let orbit = uniform_orbit_bound(gen, sampling)?;
    let c = C_UNIV * orbit.value;
    let epsilon0 = 1.0 / (4.0 * c * c);
    if s_numeric > -epsilon0 {
        return Err(Error::ConservativenessViolation { epsilon0, abscissa: s_numeric });
    }

    let mut deltas = if config.deltas.is_empty() { default_deltas(epsilon0) } else { config.deltas.clone() };
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument("profile half-planes need δ > 0".into()));
    }
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    let mut raw = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        raw.push(line_rbound(gen, delta, sampling, 0xd700 + k as u64)?);
    }
    // a larger half-plane cannot have a smaller R-bound
    for k in (0..raw.len().saturating_sub(1)).rev() {
        if raw[k + 1].0 > raw[k].0 {
            raw[k] = raw[k + 1];
        }
    }
    let rbound_profile: Vec<ProfilePoint> = deltas
        .iter()
        .zip(&raw)
        .map(|(&delta, &(rbound, stderr, exact))| {
            let bound = c / delta.sqrt();
            ProfilePoint { delta, rbound, rbound_stderr: stderr, exact, bound, holds: rbound - VIOLATION_SIGMAS * stderr <= bound * (1.0 + 1e-12) }
        })
        .collect();

    let mut line_points = Vec::new();
    for (k, &f) in config.line_fractions.iter().enumerate() {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!("line fractions must lie in (0, 1), got {f}")));
        }
        let epsilon = f * epsilon0;
        let (rbound, stderr, _) = line_rbound(gen, -epsilon, sampling, 0xd800 + k as u64)?;
        let bound = 1.0 / (epsilon0 - epsilon);
        line_points.push(LinePoint { epsilon, rbound, rbound_stderr: stderr, bound, holds: rbound - VIOLATION_SIGMAS * stderr <= bound * (1.0 + 1e-12) });
    }
    let valid = rbound_profile.iter().all(|p| p.holds) && line_points.iter().all(|p| p.holds);
    Ok(StabilityCertificate {
        space: gen.space().label(),
        c_univ: C_UNIV,
        c_univ_formula: C_UNIV_FORMULA.to_string(),
        orbit_bound_m: orbit.value,
        orbit_bound_lower: orbit.lower_estimate,
        orbit_bound_exact: orbit.exact,
        c,
        epsilon0,
        s_numeric,
        rbound_profile,
        line_rbound: line_points,
        conservative: true,
        valid,
    })
}

/// Truncated expansion of `R(λ, A)` around `ε₀ + i Im λ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannApprox {
    #[serde(serialize_with = "crate::serial::matrix")]
    pub matrix: CMat,
    /// `‖R₀‖ qᴺ/(1 − q)` with `q` the series ratio.
    pub error_bound: f64,
    pub ratio: f64,
    pub terms: usize,
}

/// `R(λ) ≈ Σ_{n<N} (ε₀ − Re λ)ⁿ R(ε₀ + i Im λ)^{n+1}` for `−ε₀ < Re λ < 3ε₀`.
pub fn neumann_resolvent(gen: &Generator, lambda: C64, epsilon0: f64, n_terms: usize) -> Result<NeumannApprox> {
    if !(epsilon0 > 0.0 && epsilon0.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε₀ must be positive, got {epsilon0}")));
    }
    if !(lambda.re > -epsilon0 && lambda.re < 3.0 * epsilon0) {
        return Err(Error::InvalidArgument(format!("Re λ = {} lies outside (−ε₀, 3ε₀)", lambda.re)));
    }
    if n_terms == 0 {
        return Err(Error::InvalidArgument("the series needs at least one term".into()));
    }
    let r0 = resolvent(gen, c64(epsilon0, lambda.im))?;
    let r0_norm = spectral_norm(&r0);
    let d = epsilon0 - lambda.re;
    let ratio = d.abs() * r0_norm;
    if ratio >= 1.0 {
        return Err(Error::SeriesDiverges(ratio));
    }
    let mut term = r0.clone();
    let mut sum = r0.clone();
    let step = &r0 * c64(d, 0.0);
    for _ in 1..n_terms {
        term = &term * &step;
        sum += &term;
    }
    let error_bound = r0_norm * ratio.powi(n_terms as i32) / (1.0 - ratio);
    Ok(NeumannApprox { matrix: sum, error_bound, ratio, terms: n_terms })
}

/// `c_min = sup_{δ>0} √δ·sup{‖R(λ)‖ : Re λ ≥ δ}` in the Euclidean norm, the
/// smallest constant the certificate could use.
pub fn minimal_decay_constant(gen: &Generator) -> Result<f64> {
    let s = require_stable(gen)?;
    let euclid = gen.on_l2();
    let scale = s.abs();
    let g = |u: f64| -> f64 {
        let delta = u.exp();
        half_plane_resolvent_sup(&euclid, delta).map(|l| delta.sqrt() * l.value).unwrap_or(f64::NAN)
    };
    let lo = (1e-6 * scale).ln();
    let hi = (1e6 * scale.max(spectral_norm(gen.matrix()))).ln();
    let steps = 96;
    let grid: Vec<f64> = (0..=steps).map(|k| lo + (hi - lo) * k as f64 / steps as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&u| g(u)).collect();
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::EigenSolverFailure);
    }
    let k = (0..values.len()).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    let (_, best) = golden_max(g, grid[k.saturating_sub(1)], grid[(k + 1).min(steps)], 120);
    Ok(best.max(values[k]))
}

/// `−1/(4c²)`.
pub fn abscissa_bound(c: f64) -> f64 {
    -1.0 / (4.0 * c * c)
}

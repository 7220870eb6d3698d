//! Discretized operators `L²(ℝ₊) → E` given by a kernel `φ`, their Laplace
//! transforms, and the R-bound of Laplace transforms on right half-planes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::datko::C_UNIV;
use super::rbound::{line_family, rbound_estimate, resolvent_line_sup, LineSup};
use super::{expm, orbit_gamma_norm, require_stable, resolvent, uniform_orbit_bound, Generator};
use crate::error::{Error, Result};
use crate::frames::exponential_family_constants;
use crate::gaussian::{gaussian_sum_norm, gaussian_sum_norm_of_columns, GaussianSumEstimate, VIOLATION_SIGMAS};
use crate::linalg::{c64, gaussian_matrix, CMat, CVec, C64};
use crate::mc::{derive_seed, Sampling};
use crate::quadrature::composite_gauss_legendre;
use crate::space::SpaceSpec;

/// `f ↦ ∫₀^{t_end} f(t) φ(t) dt`, stored as the kernel sampled at the nodes of
/// a composite Gauss–Legendre rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PettisOperator {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: CMat,
}

impl PettisOperator {
    pub fn from_fn<F: Fn(f64) -> CVec>(dim: usize, t_end: f64, panels: usize, order: usize, phi: F) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) || panels == 0 || order == 0 {
            return Err(Error::InvalidArgument("quadrature needs a positive horizon, panels and order".into()));
        }
        let (nodes, weights) = composite_gauss_legendre(0.0, t_end, panels, order);
        let mut values = CMat::zeros(dim, nodes.len());
        for (j, &t) in nodes.iter().enumerate() {
            let v = phi(t);
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            values.set_column(j, &v);
        }
        Ok(Self { nodes, weights, values })
    }

    /// The orbit kernel `φ(t) = T(t)x`.
    pub fn orbit(gen: &Generator, x: &CVec, t_end: f64, panels: usize, order: usize) -> Result<Self> {
        if x.len() != gen.dim() {
            return Err(Error::DimensionMismatch { expected: gen.dim(), found: x.len() });
        }
        let h = t_end / panels as f64;
        let (local, _) = composite_gauss_legendre(0.0, h, 1, order);
        // T(t) on one panel, then advance panel by panel with T(h)
        let step = expm(gen, h)?;
        let local_maps: Vec<CMat> = local.iter().map(|&t| expm(gen, t)).collect::<Result<_>>()?;
        let (nodes, weights) = composite_gauss_legendre(0.0, t_end, panels, order);
        let mut values = CMat::zeros(gen.dim(), nodes.len());
        let mut start = x.clone();
        for k in 0..panels {
            for (i, map) in local_maps.iter().enumerate() {
                values.set_column(k * order + i, &(map * &start));
            }
            start = &step * start;
        }
        Ok(Self { nodes, weights, values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn max_gap(&self) -> f64 {
        let first = self.nodes.first().copied().unwrap_or(0.0);
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(first, f64::max)
    }

    /// `‖T‖_γ` of the discretized operator: the Gaussian vector with
    /// covariance `Σ wⱼ φ(tⱼ)φ(tⱼ)*`.
    pub fn gamma_norm(&self, space: &SpaceSpec, sampling: Sampling) -> Result<GaussianSumEstimate> {
        let mut cols = self.values.clone();
        for (j, w) in self.weights.iter().enumerate() {
            cols.column_mut(j).scale_mut(w.sqrt());
        }
        gaussian_sum_norm_of_columns(&cols, space, sampling)
    }
}

/// `T̂(λ) = T e_λ` with `e_λ(t) = e^{−λt}`.
pub fn laplace_transform(op: &PettisOperator, lambda: C64) -> Result<CVec> {
    if !(lambda.re > 0.0) {
        return Err(Error::InvalidArgument(format!("Laplace transform needs Re λ > 0, got {}", lambda.re)));
    }
    let gap = op.max_gap();
    if gap * lambda.norm() > 1.0 {
        return Err(Error::GridTooCoarse(format!("node gap {gap:.3e} does not resolve e^(-λt) at |λ| = {:.3e}", lambda.norm())));
    }
    let mut out = CVec::zeros(op.dim());
    for (j, (&t, &w)) in op.nodes.iter().zip(&op.weights).enumerate() {
        out += op.values.column(j) * ((-lambda * t).exp() * w);
    }
    Ok(out)
}

/// Parameters of the Gaussian-sum part of [`rbound_laplace_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceCheckConfig {
    /// Truncation levels `N`; each check uses the nodes `n = −N..N`.
    pub n_values: Vec<usize>,
    /// Random `(σ, ρ, y)` draws per truncation level.
    pub trials: usize,
    pub seed: u64,
}

impl Default for LaplaceCheckConfig {
    fn default() -> Self {
        Self { n_values: vec![0, 4, 16, 64], trials: 3, seed: 0 }
    }
}

/// One Gaussian sum `‖Σ γₙ R(σ − (n+ρ)δi) y‖` against its two bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateCheck {
    pub n_max: usize,
    pub sigma: f64,
    pub rho: f64,
    pub lhs: f64,
    pub lhs_stderr: f64,
    /// `(C/δ)^{1/2} M ‖y‖`.
    pub rhs: f64,
    /// `C_H(σ, δ) ‖T(·)y‖_γ`, the Hilbert constant of the exponentials
    /// `e^{−σt + i(n+ρ)δt}` times the orbit norm.
    pub sharp_rhs: f64,
    pub sharp_rhs_stderr: f64,
    pub holds: bool,
    pub sharp_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplaceCheckReport {
    pub delta: f64,
    pub c_univ: f64,
    pub orbit_bound_m: f64,
    /// `C·M/√δ`.
    pub bound: f64,
    /// R-bound of `{R(λ, A) : Re λ ≥ δ}`: exact on `ℓ²`, a lower estimate otherwise.
    pub rbound: f64,
    pub rbound_stderr: f64,
    pub rbound_exact: bool,
    pub rbound_upper: Option<f64>,
    /// Euclidean line suprema at `σ ∈ {δ, 3δ/2, 2δ, 4δ}`.
    pub line_sups: Vec<LineSup>,
    pub rbound_holds: bool,
    pub estimates: Vec<EstimateCheck>,
    pub estimates_hold: bool,
    pub holds: bool,
}

/// `C_H(σ, δ)` for `{e^{−σt + i(n+ρ)δt}}_{n∈ℤ}` in `L²(ℝ₊)`: substituting
/// `u = δt/2π` maps it onto the exponential family with decay `2πσ/δ`.
pub fn shifted_exponential_hilbert_constant(sigma: f64, delta: f64) -> Result<f64> {
    let fc = exponential_family_constants(2.0 * PI * sigma / delta)?;
    Ok((2.0 * PI / delta).sqrt() * fc.c_hilbert)
}

/// Checks that `{R(λ, A) : Re λ ≥ δ}` is R-bounded by `C·M/√δ` and tests the
/// Gaussian-sum estimate behind it on random `σ ∈ [δ/2, 3δ/2]`, `ρ ∈ [0, 1)`.
pub fn rbound_laplace_check(gen: &Generator, delta: f64, config: &LaplaceCheckConfig, sampling: Sampling) -> Result<LaplaceCheckReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("δ must be positive, got {delta}")));
    }
    require_stable(gen)?;
    let space = *gen.space();
    let m_bound = uniform_orbit_bound(gen, sampling)?;
    let orbit_bound_m = m_bound.value;
    let bound = C_UNIV * orbit_bound_m / delta.sqrt();

    let euclid = gen.on_l2();
    let line_sups: Vec<LineSup> =
        [1.0, 1.5, 2.0, 4.0].iter().map(|f| resolvent_line_sup(&euclid, f * delta)).collect::<Result<_>>()?;
    let l2_rbound = line_sups.iter().map(|l| l.value).fold(0.0, f64::max);
    let (rbound, rbound_stderr, rbound_exact, rbound_upper) = if space.is_hilbert() {
        (l2_rbound, 0.0, true, Some(l2_rbound))
    } else {
        let mut family = Vec::new();
        for line in &line_sups[..3] {
            family.extend(line_family(gen, line)?);
        }
        let est = rbound_estimate(&family, &space, sampling.derive(0x1a91))?;
        (est.value, est.stderr, false, Some(space.l2_equivalence() * l2_rbound))
    };
    let rbound_holds = rbound - VIOLATION_SIGMAS * rbound_stderr <= bound * (1.0 + 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0x1a92));
    let complex = !gen.is_real();
    let mut estimates = Vec::new();
    for (level, &n_max) in config.n_values.iter().enumerate() {
        for trial in 0..config.trials {
            let sigma = delta * rng.random_range(0.5..1.5);
            let rho: f64 = rng.random_range(0.0..1.0);
            let y: CVec = gaussian_matrix(&mut rng, gen.dim(), 1, complex).column(0).into_owned();
            let n = n_max as i64;
            let vectors: Vec<CVec> = (-n..=n)
                .map(|k| resolvent(gen, c64(sigma, -(k as f64 + rho) * delta)).map(|r| r * &y))
                .collect::<Result<_>>()?;
            let tag = ((level as u64) << 32) | trial as u64;
            let lhs = gaussian_sum_norm(&vectors, &space, sampling.derive(tag))?;
            let y_norm = space.norm_of(y.iter().copied());
            let rhs = (C_UNIV / delta).sqrt() * orbit_bound_m * y_norm;
            let orbit = orbit_gamma_norm(gen, &y, sampling.derive(tag ^ 0x5eed))?;
            let c_h = shifted_exponential_hilbert_constant(sigma, delta)?;
            let sharp_rhs = c_h * orbit.value;
            let sharp_rhs_stderr = c_h * orbit.stderr;
            let holds = lhs.value - VIOLATION_SIGMAS * lhs.stderr <= rhs * (1.0 + 1e-12);
            let sharp_tol = VIOLATION_SIGMAS * (lhs.stderr.powi(2) + sharp_rhs_stderr.powi(2)).sqrt();
            let sharp_holds = lhs.value - sharp_tol <= sharp_rhs * (1.0 + 1e-12);
            estimates.push(EstimateCheck {
                n_max,
                sigma,
                rho,
                lhs: lhs.value,
                lhs_stderr: lhs.stderr,
                rhs,
                sharp_rhs,
                sharp_rhs_stderr,
                holds,
                sharp_holds,
            });
        }
    }
    let estimates_hold = estimates.iter().all(|e| e.holds && e.sharp_holds);
    Ok(LaplaceCheckReport {
        delta,
        c_univ: C_UNIV,
        orbit_bound_m,
        bound,
        rbound,
        rbound_stderr,
        rbound_exact,
        rbound_upper,
        line_sups,
        rbound_holds,
        estimates,
        estimates_hold,
        holds: rbound_holds && estimates_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_hurwitz, real_gen};
    use super::*;
    use crate::mc::McConfig;
    use approx::assert_relative_eq;

    #[test]
    fn transform_of_decaying_exponential() {
        let x = CVec::from_vec(vec![c64(1.0, 0.0), c64(-2.0, 0.0)]);
        let op = PettisOperator::from_fn(2, 40.0, 200, 8, |t| &x * c64((-t).exp(), 0.0)).unwrap();
        let v = laplace_transform(&op, c64(1.0, 0.0)).unwrap();
        assert!((v - &x * c64(0.5, 0.0)).norm() < 1e-12);
        let v = laplace_transform(&op, c64(0.7, 0.0)).unwrap();
        assert!(v.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn transform_rejects_bad_arguments() {
        let op = PettisOperator::from_fn(1, 10.0, 10, 4, |t| CVec::from_element(1, c64((-t).exp(), 0.0))).unwrap();
        assert!(matches!(laplace_transform(&op, c64(0.0, 1.0)), Err(Error::InvalidArgument(_))));
        assert!(matches!(laplace_transform(&op, c64(1.0, 100.0)), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn transform_of_orbit_is_resolvent() {
        let g = random_hurwitz(21, 4);
        let x = CVec::from_vec(vec![c64(1.0, 0.0), c64(0.5, 0.0), c64(-1.0, 0.0), c64(0.0, 0.0)]);
        let op = PettisOperator::orbit(&g, &x, 80.0, 800, 8).unwrap();
        for lambda in [c64(0.5, 0.0), c64(0.2, 3.0), c64(1.0, -2.0)] {
            let direct = resolvent(&g, lambda).unwrap() * &x;
            let via = laplace_transform(&op, lambda).unwrap();
            assert!((via - &direct).norm() <= 1e-9 * direct.norm(), "λ = {lambda}");
        }
    }

    #[test]
    fn orbit_kernel_gamma_norm_matches_lyapunov_on_l2() {
        let g = random_hurwitz(22, 3);
        let x = CVec::from_vec(vec![c64(0.3, 0.0), c64(1.0, 0.0), c64(-0.5, 0.0)]);
        let op = PettisOperator::orbit(&g, &x, 80.0, 800, 8).unwrap();
        let via = op.gamma_norm(&SpaceSpec::l2(3), Sampling::Exact).unwrap().value;
        let exact = orbit_gamma_norm(&g, &x, Sampling::Exact).unwrap().value;
        assert_relative_eq!(via, exact, max_relative = 1e-9);
    }

    #[test]
    fn shifted_exponential_constant_is_below_universal_bound() {
        for delta in [0.05, 0.1, 0.5, 1.0] {
            for f in [0.5, 0.75, 1.0, 1.5] {
                let c_h = shifted_exponential_hilbert_constant(f * delta, delta).unwrap();
                assert!(c_h * c_h <= C_UNIV / delta * (1.0 + 1e-12));
            }
            // σ = δ/2 is the extreme case of the proof range
            let edge = shifted_exponential_hilbert_constant(0.5 * delta, delta).unwrap();
            assert_relative_eq!(edge * edge, C_UNIV / delta, max_relative = 1e-12);
        }
    }

    /// Scalar `A = −a`: the half-plane R-bound is `1/(δ+a)`.
    #[test]
    fn scalar_laplace_bound() {
        let cfg = LaplaceCheckConfig { n_values: vec![0, 3], trials: 2, seed: 4 };
        for a in [0.5, 1.0, 2.0] {
            let g = real_gen(1, &[-a]);
            for delta in [0.5, 1.0, 2.0] {
                let report = rbound_laplace_check(&g, delta, &cfg, Sampling::Exact).unwrap();
                assert_relative_eq!(report.rbound, 1.0 / (delta + a), max_relative = 1e-12);
                assert_relative_eq!(report.orbit_bound_m, 1.0 / (2.0 * a).sqrt(), max_relative = 1e-12);
                assert!(report.holds, "a={a} δ={delta}");
            }
        }
    }

    #[test]
    fn single_term_estimate() {
        let g = real_gen(2, &[-1.0, 2.0, 0.0, -0.5]);
        let cfg = LaplaceCheckConfig { n_values: vec![0], trials: 4, seed: 7 };
        let report = rbound_laplace_check(&g, 0.2, &cfg, Sampling::Exact).unwrap();
        for e in &report.estimates {
            assert!(e.holds && e.sharp_holds);
            assert!(e.lhs <= e.sharp_rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn random_system_grid_sup() {
        let g = random_hurwitz(6, 6);
        let delta = 0.1;
        let report = rbound_laplace_check(&g, delta, &LaplaceCheckConfig::default(), Sampling::Exact).unwrap();
        assert!(delta.sqrt() * report.rbound <= C_UNIV * report.orbit_bound_m);
        assert!(report.holds);
        // the boundary line carries the supremum
        assert_eq!(report.rbound, report.line_sups[0].value);
    }

    #[test]
    fn lp_laplace_check_runs_with_sampling() {
        let g = random_hurwitz(8, 3);
        let gen = Generator::new(g.matrix().clone(), SpaceSpec::lp(3, 3.0).unwrap()).unwrap();
        let cfg = LaplaceCheckConfig { n_values: vec![0, 4], trials: 1, seed: 1 };
        let report = rbound_laplace_check(&gen, 0.5, &cfg, Sampling::Auto(McConfig::new(8192, 3))).unwrap();
        assert!(!report.rbound_exact);
        assert!(report.rbound <= report.rbound_upper.unwrap() * (1.0 + 1e-9));
        assert!(report.holds);
    }
}

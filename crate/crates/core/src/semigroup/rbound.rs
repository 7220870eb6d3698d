//! Resolvent suprema along vertical lines and R-bounds of finite operator
//! families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{spectrum, Generator, SPECTRUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::gaussian::{rademacher_sum_norm, GaussianSumEstimate};
use crate::linalg::{c64, gaussian_matrix, identity, is_real, lp_operator_norm_lower, min_singular_value, spectral_norm, CMat, CVec};
use crate::mc::{derive_seed, Sampling};
use crate::space::SpaceSpec;

const INITIAL_DENSITY: usize = 12;
const MAX_LEVELS: usize = 6;
const LEVEL_CHANGE: f64 = 5e-3;
/// Share of the supremum the truncated tail may reach.
const TAIL_SHARE: f64 = 0.01;
const REFINED_PEAKS: usize = 4;
const GOLDEN_STEPS: usize = 80;

/// `sup_s ‖R(re + is, A)‖` with the point where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSup {
    pub re: f64,
    pub value: f64,
    pub argmax_im: f64,
    /// Half-width of the imaginary-axis window that was searched.
    pub reach: f64,
    pub evaluations: usize,
    pub levels: usize,
}

pub(crate) fn resolvent_norm_at(a: &CMat, re: f64, im: f64) -> f64 {
    let shifted = identity(a.nrows()) * c64(re, im) - a;
    let smin = min_singular_value(&shifted);
    if smin > 0.0 {
        1.0 / smin
    } else {
        f64::INFINITY
    }
}

/// Maximizes a unimodal-near-the-bracket function by golden-section search.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, steps: usize) -> (f64, f64) {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..steps {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo <= 1e-15 * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn log_offsets(lo: f64, hi: f64, density: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let steps = (((b - a) * density as f64).ceil() as usize).max(1);
    (0..=steps).map(move |j| 10f64.powf(a + (b - a) * j as f64 / steps as f64))
}

/// `sup_{s∈ℝ} ‖R(re + is, A)‖` in the Euclidean operator norm.
///
/// The line is searched on a logarithmic grid around `0` and around the
/// imaginary part of every eigenvalue, truncated where `1/(|s| − ‖A‖)` drops
/// below one percent of the running supremum. The best local maxima are
/// refined by golden section and the grid density is doubled until the
/// supremum moves by less than half a percent.
pub fn resolvent_line_sup(gen: &Generator, re: f64) -> Result<LineSup> {
    if !re.is_finite() {
        return Err(Error::InvalidArgument(format!("line abscissa must be finite, got {re}")));
    }
    let spec = spectrum(gen)?;
    if let Some(mu) = spec.iter().find(|mu| (mu.re - re).abs() < SPECTRUM_TOLERANCE) {
        return Err(Error::SpectrumHit { re, im: mu.im, distance: (mu.re - re).abs() });
    }
    let a = gen.matrix();
    let norm_a = spectral_norm(a);
    let f = |s: f64| resolvent_norm_at(a, re, s);
    let widths: Vec<f64> = spec.iter().map(|mu| (mu.re - re).abs()).collect();
    let min_width = widths.iter().copied().fold(f64::INFINITY, f64::min);

    let mut best = (0.0, f(0.0));
    let mut evaluations = 1;
    let mut previous: Option<f64> = None;
    let mut levels = 0;
    let mut reach = 0.0;
    for level in 0..MAX_LEVELS {
        levels = level + 1;
        let density = INITIAL_DENSITY << level;
        reach = norm_a + 1.0 / (TAIL_SHARE * best.1);
        let mut grid: Vec<f64> = vec![0.0];
        for x in log_offsets(1e-3 * min_width, reach, density) {
            grid.push(x);
            grid.push(-x);
        }
        for (mu, w) in spec.iter().zip(&widths) {
            grid.push(mu.im);
            for x in log_offsets(1e-3 * w, 1e3 * w, density) {
                grid.push(mu.im + x);
                grid.push(mu.im - x);
            }
        }
        grid.retain(|s| s.abs() <= reach);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values: Vec<f64> = grid.par_iter().map(|&s| f(s)).collect();
        evaluations += grid.len();

        let mut peaks: Vec<usize> = (0..grid.len())
            .filter(|&i| (i == 0 || values[i] >= values[i - 1]) && (i + 1 == grid.len() || values[i] >= values[i + 1]))
            .collect();
        peaks.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        peaks.truncate(REFINED_PEAKS);
        for &i in &peaks {
            if values[i] > best.1 {
                best = (grid[i], values[i]);
            }
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(i + 1).min(grid.len() - 1)];
            if hi > lo {
                let (s, v) = golden_max(f, lo, hi, GOLDEN_STEPS);
                evaluations += GOLDEN_STEPS + 2;
                if v > best.1 {
                    best = (s, v);
                }
            }
        }
        if let Some(prev) = previous {
            if (best.1 - prev).abs() <= LEVEL_CHANGE * best.1 {
                break;
            }
        }
        previous = Some(best.1);
    }
    Ok(LineSup { re, value: best.1, argmax_im: best.0, reach, evaluations, levels })
}

/// `sup{‖R(λ, A)‖ : Re λ ≥ δ}`. The resolvent is analytic and vanishes at
/// infinity on the half-plane, so the supremum sits on the boundary line.
pub fn half_plane_resolvent_sup(gen: &Generator, delta: f64) -> Result<LineSup> {
    let spec = spectrum(gen)?;
    if let Some(mu) = spec.iter().find(|mu| mu.re >= delta - SPECTRUM_TOLERANCE) {
        return Err(Error::SpectrumHit { re: delta, im: mu.im, distance: (delta - mu.re).max(0.0) });
    }
    resolvent_line_sup(gen, delta)
}

/// Resolvents sampled along the line `Re λ = line.re`, clustered around the
/// point where the Euclidean norm peaks.
pub(crate) fn line_family(gen: &Generator, line: &LineSup) -> Result<Vec<CMat>> {
    let spec = spectrum(gen)?;
    let at = c64(line.re, line.argmax_im);
    let width = spec.iter().map(|mu| (at - mu).norm()).fold(f64::INFINITY, f64::min).max(1e-12);
    let mut points = vec![0.0, line.argmax_im];
    for f in [0.25, 0.5, 1.0, 2.0, 4.0] {
        points.push(line.argmax_im + f * width);
        points.push(line.argmax_im - f * width);
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.iter().map(|&s| super::resolvent(gen, c64(line.re, s))).collect()
}

/// Estimate of the R-bound `𝓡(𝒯)` of a finite operator family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RBoundEstimate {
    pub value: f64,
    pub exact: bool,
    pub stderr: f64,
    /// Certified upper envelope, when one is available.
    pub upper: Option<f64>,
    pub family_descriptor: String,
}

const SEARCH_ROUNDS: usize = 12;
const CLIMB_STEPS: usize = 12;
const MAX_SUBSET: usize = 6;

fn ratio(num: &GaussianSumEstimate, den: &GaussianSumEstimate) -> (f64, f64) {
    if den.value == 0.0 {
        return (0.0, 0.0);
    }
    let r = num.value / den.value;
    let rel = if num.value > 0.0 { (num.stderr / num.value).powi(2) } else { 0.0 } + (den.stderr / den.value).powi(2);
    (r, r * rel.sqrt())
}

/// `(𝔼‖Σ rₙTₙxₙ‖²)^{1/2} / (𝔼‖Σ rₙxₙ‖²)^{1/2}` with a delta-method stderr.
pub fn rademacher_ratio(ops: &[&CMat], xs: &[CVec], space: &SpaceSpec, sampling: Sampling) -> Result<(f64, f64)> {
    let images: Vec<CVec> = ops.iter().zip(xs).map(|(t, x)| *t * x).collect();
    let num = rademacher_sum_norm(&images, space, sampling)?;
    let den = rademacher_sum_norm(xs, space, sampling)?;
    Ok(ratio(&num, &den))
}

/// R-bound of `ops` on `space`.
///
/// On `ℓ²` the Rademacher sums are orthogonal, so the R-bound is the largest
/// operator norm and is returned exactly unless sampling is forced. Otherwise
/// a lower estimate is built from per-operator norm estimates and a
/// randomized hill climb over subsets and vectors; the certified upper
/// envelope is `m^{|1/2−1/p|}` times the Euclidean R-bound.
pub fn rbound_estimate(ops: &[CMat], space: &SpaceSpec, sampling: Sampling) -> Result<RBoundEstimate> {
    if ops.is_empty() {
        return Err(Error::EmptyFamily);
    }
    for t in ops {
        if t.nrows() != space.dim || t.ncols() != space.dim {
            return Err(Error::DimensionMismatch { expected: space.dim, found: t.nrows() });
        }
    }
    let norms: Vec<f64> = ops.iter().map(spectral_norm).collect();
    let l2_value = norms.iter().copied().fold(0.0, f64::max);
    let descriptor = format!("{} operators on {}", ops.len(), space.label());
    if space.is_hilbert() && !matches!(sampling, Sampling::MonteCarlo(_)) {
        return Ok(RBoundEstimate { value: l2_value, exact: true, stderr: 0.0, upper: Some(l2_value), family_descriptor: descriptor });
    }
    let upper = space.l2_equivalence() * l2_value;
    let p = space.p();
    let seed = sampling.config().map(|c| c.seed).unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7b0d));
    let complex = ops.iter().any(|t| !is_real(t));

    // single operators: Boyd's iteration gives a deterministic lower bound
    let mut best = (0.0, 0.0);
    let order = {
        let mut idx: Vec<usize> = (0..ops.len()).collect();
        idx.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        idx.truncate(MAX_SUBSET.max(4));
        idx
    };
    for &i in &order {
        let v = lp_operator_norm_lower(&ops[i], p, 4, &mut rng);
        if v > best.0 {
            best = (v, 0.0);
        }
    }

    // subsets: hill climb with enumerated sign patterns, reevaluated under
    // the requested sampling at the end
    let climb = Sampling::Exact;
    let m = space.dim;
    let mut champion: Option<(Vec<usize>, Vec<CVec>, f64)> = None;
    for _ in 0..SEARCH_ROUNDS {
        let size = rng.random_range(1..=MAX_SUBSET.min(ops.len()).max(1));
        let subset: Vec<usize> = (0..size)
            .map(|_| if rng.random_bool(0.5) { order[rng.random_range(0..order.len())] } else { rng.random_range(0..ops.len()) })
            .collect();
        let chosen: Vec<&CMat> = subset.iter().map(|&i| &ops[i]).collect();
        let mut xs: Vec<CVec> = (0..size).map(|_| gaussian_matrix(&mut rng, m, 1, complex).column(0).into_owned()).collect();
        let mut current = rademacher_ratio(&chosen, &xs, space, climb)?.0;
        for step in 0..CLIMB_STEPS {
            let scale = 0.5 / (1.0 + step as f64 / 4.0);
            let j = rng.random_range(0..size);
            let mut trial = xs.clone();
            let size_j = scale * trial[j].norm().max(1e-12);
            trial[j] += gaussian_matrix(&mut rng, m, 1, complex).column(0) * c64(size_j, 0.0);
            let value = rademacher_ratio(&chosen, &trial, space, climb)?.0;
            if value > current {
                current = value;
                xs = trial;
            }
        }
        if champion.as_ref().is_none_or(|c| current > c.2) {
            champion = Some((subset, xs, current));
        }
    }
    if let Some((subset, xs, _)) = champion {
        let chosen: Vec<&CMat> = subset.iter().map(|&i| &ops[i]).collect();
        let (value, stderr) = rademacher_ratio(&chosen, &xs, space, sampling)?;
        if value > best.0 {
            best = (value, stderr);
        }
    }
    Ok(RBoundEstimate { value: best.0, exact: false, stderr: best.1, upper: Some(upper), family_descriptor: descriptor })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_hurwitz, real_gen};
    use super::*;
    use crate::linalg::{from_real, lp_operator_norm_upper};
    use crate::mc::McConfig;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn diag(d: &[f64]) -> CMat {
        from_real(&DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(d)))
    }

    #[test]
    fn scalar_line_sup_is_attained_on_the_real_axis() {
        for a in [0.5, 1.0, 2.0] {
            let g = real_gen(1, &[-a]);
            for delta in [0.05, 0.5, 2.0] {
                let sup = half_plane_resolvent_sup(&g, delta).unwrap();
                assert_relative_eq!(sup.value, 1.0 / (delta + a), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn line_sup_of_oscillator_peaks_near_eigenvalue() {
        // eigenvalues −0.1 ± 3i: on the imaginary axis ‖R‖ ≈ 1/0.1 near s = ±3
        let g = real_gen(2, &[-0.1, -3.0, 3.0, -0.1]);
        let sup = resolvent_line_sup(&g, 0.0).unwrap();
        assert_relative_eq!(sup.value, 10.0, max_relative = 1e-9);
        assert_relative_eq!(sup.argmax_im.abs(), 3.0, max_relative = 1e-6);
    }

    #[test]
    fn line_sup_dominates_dense_scan() {
        for seed in 0..6 {
            let g = random_hurwitz(100 + seed, 6);
            let sup = resolvent_line_sup(&g, 0.0).unwrap();
            let scan = (-4000..=4000).map(|k| resolvent_norm_at(g.matrix(), 0.0, k as f64 * 2e-3)).fold(0.0, f64::max);
            assert!(sup.value >= scan * (1.0 - 1e-9), "seed {seed}: {} < {}", sup.value, scan);
        }
    }

    #[test]
    fn spectrum_on_the_line_is_refused() {
        let g = real_gen(2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(resolvent_line_sup(&g, 0.0), Err(Error::SpectrumHit { .. })));
        assert!(half_plane_resolvent_sup(&real_gen(1, &[-1.0]), -2.0).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, v) = golden_max(|x| 1.0 - (x - 0.3).powi(2), -1.0, 2.0, 100);
        assert_relative_eq!(x, 0.3, epsilon = 1e-7);
        assert_relative_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rbound_examples() {
        let l2 = SpaceSpec::l2(2);
        let est = rbound_estimate(&[identity(2), identity(2) * c64(2.0, 0.0)], &l2, Sampling::Exact).unwrap();
        assert!(est.exact);
        assert_eq!(est.value, 2.0);
        let est = rbound_estimate(&[diag(&[1.0, 0.0]), diag(&[0.0, 1.0])], &l2, Sampling::Exact).unwrap();
        assert_relative_eq!(est.value, 1.0, max_relative = 1e-14);
        assert!(matches!(rbound_estimate(&[], &l2, Sampling::Exact), Err(Error::EmptyFamily)));
    }

    #[test]
    fn singleton_rbound_is_operator_norm() {
        let t = from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]));
        let l1 = SpaceSpec::lp(2, 1.0).unwrap();
        let est = rbound_estimate(std::slice::from_ref(&t), &l1, Sampling::Auto(McConfig::new(4096, 1))).unwrap();
        assert_relative_eq!(est.value, lp_operator_norm_upper(&t, 1.0), max_relative = 1e-12);
        let l3 = SpaceSpec::lp(2, 3.0).unwrap();
        let est = rbound_estimate(std::slice::from_ref(&t), &l3, Sampling::Auto(McConfig::new(4096, 1))).unwrap();
        assert!(est.value <= lp_operator_norm_upper(&t, 3.0) * (1.0 + 1e-9));
        let sweep = (0..20_000)
            .map(|k| {
                let th = k as f64 * std::f64::consts::PI / 20_000.0;
                let x = CVec::from_vec(vec![c64(th.cos(), 0.0), c64(th.sin(), 0.0)]);
                l3.norm_of((&t * &x).iter().copied()) / l3.norm_of(x.iter().copied())
            })
            .fold(0.0, f64::max);
        assert!(est.value >= sweep * (1.0 - 1e-6));
    }

    #[test]
    fn sampled_rbound_on_l2_agrees_with_max_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ops: Vec<CMat> = (0..5).map(|_| gaussian_matrix(&mut rng, 4, 4, false)).collect();
        let space = SpaceSpec::l2(4);
        let exact = rbound_estimate(&ops, &space, Sampling::Exact).unwrap();
        let sampled = rbound_estimate(&ops, &space, Sampling::MonteCarlo(McConfig::new(20_000, 9))).unwrap();
        assert!(!sampled.exact);
        assert!((sampled.value - exact.value).abs() <= 3.0 * sampled.stderr + 1e-12 * exact.value);
    }

    #[test]
    fn lp_rbound_respects_upper_envelope() {
        let g = random_hurwitz(17, 4);
        let ops: Vec<CMat> = (0..8).map(|k| super::super::resolvent(&g, c64(0.1, k as f64 * 0.5)).unwrap()).collect();
        let space = SpaceSpec::lp(4, 4.0).unwrap();
        let est = rbound_estimate(&ops, &space, Sampling::Auto(McConfig::new(4096, 2))).unwrap();
        let upper = est.upper.unwrap();
        assert!(est.value <= upper * (1.0 + 1e-9));
        let max_lp = ops.iter().map(|t| lp_operator_norm_upper(t, 4.0)).fold(0.0, f64::max);
        assert!(est.value <= upper.max(max_lp));
    }
}

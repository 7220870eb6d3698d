//! Hilbert, Bessel and Riesz constants of function families in `L²(ℝ₊)`.
//!
//! For a family `(f_n)` the upper constant `C_H` and lower constant `C_B`
//! satisfy `C_B‖α‖ ≤ ‖Σ αₙ fₙ‖ ≤ C_H‖α‖` for finitely supported `α`. Two
//! routes are provided: extreme eigenvalues of a truncated Gram matrix, and
//! the extrema of the periodization `F(t) = Σ_k |f(t+k)|²` for modulated
//! families `fₙ(t) = e^{2πint} f(t)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_asymmetry, hermitian_eigenvalues, hermitian_sqrt, CMat, C64};
use crate::quadrature::composite_gauss_legendre;

/// Default target for the truncated periodization sum.
pub const CCK_TOLERANCE: f64 = 1e-10;
const MAX_PERIODIZATION_TERMS: usize = 10_000_000;
const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// `fₙ(t) = e^{−at + 2π(n+ρ)it}·1_{[0,∞)}(t)` for `n_min ≤ n ≤ n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFamily {
    pub a: f64,
    pub rho: f64,
    pub n_min: i64,
    pub n_max: i64,
}

impl ExponentialFamily {
    pub fn new(a: f64, rho: f64, n_min: i64, n_max: i64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::NonPositiveDecay(a));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("phase rho must lie in [0,1), got {rho}")));
        }
        if n_min > n_max {
            return Err(Error::InvalidArgument(format!("empty index range {n_min}..={n_max}")));
        }
        Ok(Self { a, rho, n_min, n_max })
    }

    /// Family indexed by `0..n`.
    pub fn with_len(a: f64, rho: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyIndexSet);
        }
        Self::new(a, rho, 0, n as i64 - 1)
    }

    pub fn indices(&self) -> Vec<i64> {
        (self.n_min..=self.n_max).collect()
    }

    pub fn len(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, n: i64) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    pub fn eval(&self, n: i64, t: f64) -> C64 {
        if t < 0.0 {
            return c64(0.0, 0.0);
        }
        let phase = 2.0 * PI * (n as f64 + self.rho) * t;
        C64::from_polar((-self.a * t).exp(), phase)
    }

    /// `⟨f_m, f_n⟩ = ∫₀^∞ conj(f_m) f_n dt = 1/(2a − 2πi(n−m))`.
    pub fn inner(&self, m: i64, n: i64) -> C64 {
        c64(1.0, 0.0) / c64(2.0 * self.a, -2.0 * PI * (n - m) as f64)
    }
}

/// A family given by samples on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFamily {
    t_grid: Vec<f64>,
    weights: Vec<f64>,
    /// Entry `(j, k)` is `f_{indices[k]}(t_j)`.
    values: CMat,
    indices: Vec<i64>,
    /// Oscillation frequency of each column in cycles per unit time.
    frequencies: Vec<f64>,
}

impl SampledFamily {
    pub fn new(t_grid: Vec<f64>, weights: Vec<f64>, values: CMat, indices: Vec<i64>, frequencies: Vec<f64>) -> Result<Self> {
        if t_grid.is_empty() {
            return Err(Error::InvalidArgument("empty sample grid".into()));
        }
        if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("grid must be nonnegative and strictly increasing".into()));
        }
        if weights.len() != t_grid.len() {
            return Err(Error::DimensionMismatch { expected: t_grid.len(), found: weights.len() });
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("quadrature weights must be positive".into()));
        }
        if values.nrows() != t_grid.len() {
            return Err(Error::DimensionMismatch { expected: t_grid.len(), found: values.nrows() });
        }
        if values.ncols() != indices.len() || frequencies.len() != indices.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), found: values.ncols() });
        }
        Ok(Self { t_grid, weights, values, indices, frequencies })
    }

    /// Samples an exponential family on composite Gauss–Legendre panels over
    /// `[0, t_end]`.
    pub fn from_exponential(family: &ExponentialFamily, t_end: f64, panels: usize, order: usize) -> Result<Self> {
        let (t, w) = composite_gauss_legendre(0.0, t_end, panels, order);
        let indices = family.indices();
        let values = CMat::from_fn(t.len(), indices.len(), |j, k| family.eval(indices[k], t[j]));
        let frequencies = indices.iter().map(|&n| n as f64 + family.rho).collect();
        Self::new(t, w, values, indices, frequencies)
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &CMat {
        &self.values
    }

    /// Scales every member by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.map(|z| z * c), ..self.clone() }
    }

    fn column_of(&self, n: i64) -> Result<usize> {
        self.indices
            .iter()
            .position(|&k| k == n)
            .ok_or_else(|| Error::InvalidArgument(format!("index {n} is not part of the sampled family")))
    }

    fn max_gap(&self) -> f64 {
        self.t_grid.windows(2).map(|w| w[1] - w[0]).fold(self.t_grid[0], f64::max)
    }
}

/// A family whose Gram matrix can be formed.
pub trait GramSource {
    fn gram_matrix(&self, indices: &[i64]) -> Result<CMat>;
}

impl GramSource for ExponentialFamily {
    fn gram_matrix(&self, indices: &[i64]) -> Result<CMat> {
        if indices.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        if let Some(&bad) = indices.iter().find(|&&n| !self.contains(n)) {
            return Err(Error::InvalidArgument(format!("index {bad} outside {}..={}", self.n_min, self.n_max)));
        }
        Ok(CMat::from_fn(indices.len(), indices.len(), |i, j| self.inner(indices[i], indices[j])))
    }
}

impl GramSource for SampledFamily {
    fn gram_matrix(&self, indices: &[i64]) -> Result<CMat> {
        if indices.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        let cols = indices.iter().map(|&n| self.column_of(n)).collect::<Result<Vec<_>>>()?;
        let bandwidth = cols.iter().map(|&k| self.frequencies[k].abs()).fold(0.0, f64::max);
        let gap = self.max_gap();
        if gap * bandwidth > 0.5 {
            return Err(Error::GridTooCoarse(format!(
                "grid gap {gap:.3e} does not resolve {bandwidth} cycles per unit time"
            )));
        }
        let k = cols.len();
        Ok(CMat::from_fn(k, k, |i, j| {
            let (ci, cj) = (cols[i], cols[j]);
            self.weights
                .iter()
                .enumerate()
                .map(|(r, &w)| self.values[(r, ci)].conj() * self.values[(r, cj)] * w)
                .sum()
        }))
    }
}

/// `G_{mn} = ⟨f_m, f_n⟩` over the given indices.
pub fn gram_matrix<F: GramSource + ?Sized>(family: &F, indices: &[i64]) -> Result<CMat> {
    family.gram_matrix(indices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMethod {
    Gram,
    Cck,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameConstants {
    pub c_hilbert: f64,
    pub c_bessel: f64,
    pub method: FrameMethod,
}

impl FrameConstants {
    pub fn hilbert_sq(&self) -> f64 {
        self.c_hilbert * self.c_hilbert
    }

    pub fn bessel_sq(&self) -> f64 {
        self.c_bessel * self.c_bessel
    }
}

/// Frame constants from the extreme eigenvalues of a Gram matrix.
pub fn frame_constants_gram(g: &CMat) -> Result<FrameConstants> {
    if g.nrows() == 0 {
        return Err(Error::EmptyIndexSet);
    }
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch { expected: g.nrows(), found: g.ncols() });
    }
    let scale = g.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tolerance = HERMITIAN_TOLERANCE * scale;
    let asymmetry = hermitian_asymmetry(g);
    if asymmetry > tolerance {
        return Err(Error::NotHermitian { asymmetry, tolerance });
    }
    let eig = hermitian_eigenvalues(g);
    Ok(FrameConstants {
        c_hilbert: eig[eig.len() - 1].max(0.0).sqrt(),
        c_bessel: eig[0].max(0.0).sqrt(),
        method: FrameMethod::Gram,
    })
}

/// Coordinates realizing a Gram matrix: the columns of `G^{1/2}` have Gram
/// matrix `G` in the standard inner product.
pub fn gram_embedding(g: &CMat) -> CMat {
    hermitian_sqrt(g)
}

/// Truncated periodization `Σ_{k=0}^{K} |f(t+k)|²` of the family's
/// generator `f(t) = e^{−at + 2πiρt}·1_{[0,∞)}`. Terms with `t+k < 0`
/// vanish.
pub fn f_function(family: &ExponentialFamily, t: f64, truncation: usize) -> f64 {
    (0..=truncation)
        .map(|k| t + k as f64)
        .filter(|&s| s >= 0.0)
        .map(|s| (-2.0 * family.a * s).exp())
        .sum()
}

/// Upper bound `e^{−2a(t+K)}/(1 − e^{−2a})` on the part of `F(t)` dropped
/// by [`f_function`].
pub fn f_function_tail_bound(a: f64, t: f64, truncation: usize) -> f64 {
    (-2.0 * a * (t + truncation as f64)).exp() / -(-2.0 * a).exp_m1()
}

/// Smallest truncation whose tail bound at `t = 0` is below `tolerance`.
pub fn truncation_for(a: f64, tolerance: f64) -> Result<usize> {
    if !(a > 0.0) {
        return Err(Error::NonPositiveDecay(a));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tolerance}")));
    }
    let needed = ((1.0 / (tolerance * -(-2.0 * a).exp_m1())).ln() / (2.0 * a)).ceil().max(1.0);
    if !needed.is_finite() || needed > MAX_PERIODIZATION_TERMS as f64 {
        return Err(Error::ToleranceNotAchievable {
            tolerance,
            reason: format!("decay a = {a} needs more than {MAX_PERIODIZATION_TERMS} periodization terms"),
        });
    }
    let mut k = needed as usize;
    while k > 1 && f_function_tail_bound(a, 0.0, k - 1) <= tolerance {
        k -= 1;
    }
    while f_function_tail_bound(a, 0.0, k) > tolerance {
        k += 1;
    }
    Ok(k)
}

/// Frame constants from the extrema of `F` on the uniform grid
/// `t_j = j/grid_size`. `F` decreases on `[0,1)` for this family, so the
/// infimum is its left limit at `t = 1`, which is included alongside the
/// grid values.
pub fn frame_constants_cck(family: &ExponentialFamily, grid_size: usize, tolerance: f64) -> Result<FrameConstants> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!("grid_size must be at least 2, got {grid_size}")));
    }
    let k = truncation_for(family.a, tolerance)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..grid_size {
        let value = f_function(family, j as f64 / grid_size as f64, k);
        lo = lo.min(value);
        hi = hi.max(value);
    }
    // F(1⁻) = Σ_{k≥0} e^{−2a(1+k)}
    let left_limit = f_function(family, 1.0, k);
    lo = lo.min(left_limit);
    Ok(FrameConstants { c_hilbert: hi.sqrt(), c_bessel: lo.sqrt(), method: FrameMethod::Cck })
}

/// Closed-form constants of the exponential family with decay `a`:
/// `C_H² = e^{2a}/(e^{2a}−1)` and `C_B² = 1/(e^{2a}−1)`.
pub fn exponential_family_constants(a: f64) -> Result<FrameConstants> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::NonPositiveDecay(a));
    }
    let hilbert_sq = 1.0 / -(-2.0 * a).exp_m1();
    let bessel_sq = 1.0 / (2.0 * a).exp_m1();
    Ok(FrameConstants { c_hilbert: hilbert_sq.sqrt(), c_bessel: bessel_sq.sqrt(), method: FrameMethod::ClosedForm })
}

pub const ESS_INF_FORMULA: &str = "1/(e^{2a}-1)";
pub const ALTERNATIVE_FORMULA: &str = "e^{-2a}/(e^{2a}-1)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramPoint {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Decision between the two candidate values of `C_B²` for the exponential
/// family, made by the Gram-matrix oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerConstantAdjudication {
    pub a: f64,
    pub ess_inf_formula: &'static str,
    pub ess_inf_value: f64,
    pub alternative_formula: &'static str,
    pub alternative_value: f64,
    pub gram_sequence: Vec<GramPoint>,
    /// `λ_min` is nonincreasing along the sequence.
    pub monotone_from_above: bool,
    pub rel_gap_ess_inf: f64,
    pub rel_gap_alternative: f64,
    pub selected_formula: &'static str,
    pub selected_value: f64,
    /// The alternative value disagrees with the oracle.
    pub alternative_rejected: bool,
}

/// Runs the Gram oracle at each size in `sizes` (indices `0..n`) and
/// compares the final `λ_min` with both candidate formulas.
pub fn adjudicate_lower_constant(a: f64, rho: f64, sizes: &[usize]) -> Result<LowerConstantAdjudication> {
    if sizes.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let closed = exponential_family_constants(a)?;
    let ess_inf_value = closed.bessel_sq();
    let alternative_value = (-2.0 * a).exp() / (2.0 * a).exp_m1();
    let mut gram_sequence = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let family = ExponentialFamily::with_len(a, rho, n)?;
        let g = gram_matrix(&family, &family.indices())?;
        let eig = hermitian_eigenvalues(&g);
        gram_sequence.push(GramPoint { n, lambda_min: eig[0], lambda_max: eig[eig.len() - 1] });
    }
    let monotone_from_above = gram_sequence
        .windows(2)
        .all(|w| w[1].lambda_min <= w[0].lambda_min * (1.0 + 1e-12) && w[1].n >= w[0].n)
        && gram_sequence.iter().all(|p| p.lambda_min >= ess_inf_value * (1.0 - 1e-12));
    let last = gram_sequence[gram_sequence.len() - 1].lambda_min;
    let rel_gap_ess_inf = (last - ess_inf_value).abs() / ess_inf_value;
    let rel_gap_alternative = (last - alternative_value).abs() / alternative_value;
    let pick_ess_inf = rel_gap_ess_inf <= rel_gap_alternative;
    Ok(LowerConstantAdjudication {
        a,
        ess_inf_formula: ESS_INF_FORMULA,
        ess_inf_value,
        alternative_formula: ALTERNATIVE_FORMULA,
        alternative_value,
        gram_sequence,
        monotone_from_above,
        rel_gap_ess_inf,
        rel_gap_alternative,
        selected_formula: if pick_ess_inf { ESS_INF_FORMULA } else { ALTERNATIVE_FORMULA },
        selected_value: if pick_ess_inf { ess_inf_value } else { alternative_value },
        alternative_rejected: pick_ess_inf && rel_gap_alternative > 0.02,
    })
}

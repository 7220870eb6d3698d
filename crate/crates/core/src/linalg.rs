//! Dense complex linear algebra shared by the analysis modules.
//!
//! Everything works on `DMatrix<Complex64>`; real inputs are embedded with a
//! zero imaginary part. Monte Carlo code needs real coordinates, which
//! [`realify`] and [`stack_columns`] provide.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_real(m: &CMat) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

/// Real 2n×2n matrix `[[Re M, −Im M], [Im M, Re M]]` acting on `[Re x; Im x]`.
pub fn realify(m: &CMat) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Stacks real and imaginary parts of each column: an m×k complex matrix
/// becomes a 2m×k real one.
pub fn stack_columns(m: &CMat) -> DMatrix<f64> {
    let (r, c) = m.shape();
    DMatrix::from_fn(2 * r, c, |i, j| {
        if i < r {
            m[(i, j)].re
        } else {
            m[(i - r, j)].im
        }
    })
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise deviation from Hermitian symmetry.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Ascending eigenvalues of a Hermitian matrix (symmetrized first).
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let svd = SVD::new(m.clone(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn min_singular_value(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Complex Schur form `m = Q T Q^H` with `T` upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let decomposition = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenSolverFailure)?;
    let (q, mut t) = decomposition.unpack();
    let n = t.nrows();
    let scale = frobenius_norm(&t).max(1.0);
    for i in 1..n {
        if t[(i, i - 1)].norm() > 1e-10 * scale {
            return Err(Error::EigenSolverFailure);
        }
        for j in 0..i {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let (_, t) = schur(m)?;
    Ok(t.diagonal().iter().copied().collect())
}

pub fn matrix_exp(m: &CMat) -> CMat {
    m.clone().exp()
}

/// Inverse by LU with partial pivoting; `None` when singular.
pub fn lu_solve_identity(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

/// Solves `a X + X a^H + c = 0` by the Bartels–Stewart method on the complex
/// Schur form of `a`. Fails when `a` has eigenvalues with `λ_i + conj(λ_j) = 0`.
pub fn solve_lyapunov(a: &CMat, c: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if c.shape() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: c.nrows() });
    }
    let (q, t) = schur(a)?;
    let c_hat = q.adjoint() * c * &q;
    let mut y = CMat::zeros(n, n);
    let scale = frobenius_norm(&t).max(1e-300);
    for j in (0..n).rev() {
        let mut rhs: CVec = -c_hat.column(j).into_owned();
        for k in (j + 1)..n {
            let coef = t[(j, k)].conj();
            if coef != C64::new(0.0, 0.0) {
                rhs -= y.column(k) * coef;
            }
        }
        let shift = t[(j, j)].conj();
        // back substitution with (T + shift I)
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for k in (i + 1)..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            let pivot = t[(i, i)] + shift;
            if pivot.norm() <= 1e-14 * scale {
                return Err(Error::InvalidArgument(
                    "Lyapunov operator is singular (eigenvalues symmetric about the imaginary axis)".into(),
                ));
            }
            y[(i, j)] = acc / pivot;
        }
    }
    Ok(&q * y * q.adjoint())
}

/// Finite-horizon Gramian `∫₀^t e^{sA} Q e^{sA^H} ds`. Van Loan's block
/// exponential on a step `h` with `‖A‖h ≤ 1/2`, then `k` doublings
/// `G_{2h} = G_h + e^{hA} G_h e^{hA^H}`. Valid for any `a`, stable or not.
pub fn van_loan_gramian(a: &CMat, q: &CMat, t: f64) -> CMat {
    let n = a.nrows();
    let norm = frobenius_norm(a);
    let mut k = 0;
    while norm * t / 2f64.powi(k) > 0.5 && k < 60 {
        k += 1;
    }
    let h = t / 2f64.powi(k);
    let mut block = CMat::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a));
    block.view_mut((0, n), (n, n)).copy_from(q);
    block.view_mut((n, n), (n, n)).copy_from(&a.adjoint());
    let e = matrix_exp(&(block * C64::new(h, 0.0)));
    let f12 = e.view((0, n), (n, n)).into_owned();
    let f22 = e.view((n, n), (n, n)).into_owned();
    let mut g = hermitian_part(&(f22.adjoint() * f12));
    let mut step = f22.adjoint();
    for _ in 0..k {
        g = hermitian_part(&(&g + &step * &g * step.adjoint()));
        step = &step * &step;
    }
    g
}

/// Symmetric square root of a real positive semidefinite matrix; negative
/// rounding eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Hermitian square root of a Hermitian positive semidefinite matrix.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let roots = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMat::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Orthonormal basis of the column span, keeping directions whose singular
/// value exceeds `rel_tol` times the largest one.
pub fn column_span_basis(f: &CMat, rel_tol: f64) -> CMat {
    let svd = SVD::new(f.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rel_tol * smax)
        .collect();
    CMat::from_fn(f.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, complex: bool) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
        C64::new(re, im)
    })
}

/// `k` Haar-distributed orthonormal vectors in dimension `n` (QR of a
/// Gaussian matrix with the phases of `R`'s diagonal removed).
pub fn haar_orthonormal<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, complex: bool) -> CMat {
    assert!(k <= n, "cannot draw {k} orthonormal vectors in dimension {n}");
    let g = gaussian_matrix(rng, n, k, complex);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn lp_norm(v: impl IntoIterator<Item = C64>, p: f64) -> f64 {
    if p == 2.0 {
        return v.into_iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    if p == 1.0 {
        return v.into_iter().map(|z| z.norm()).sum();
    }
    let s: f64 = v.into_iter().map(|z| z.norm().powf(p)).sum();
    s.powf(1.0 / p)
}

/// Certified upper bound on the ℓᵖ operator norm by Riesz–Thorin
/// interpolation between the column-sum and row-sum norms.
pub fn lp_operator_norm_upper(t: &CMat, p: f64) -> f64 {
    if p == 2.0 {
        return spectral_norm(t);
    }
    let one = (0..t.ncols()).map(|j| t.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let inf = (0..t.nrows()).map(|i| t.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    if p == 1.0 {
        return one;
    }
    one.powf(1.0 / p) * inf.powf(1.0 - 1.0 / p)
}

fn duality_map(v: &CVec, p: f64) -> CVec {
    let norm = lp_norm(v.iter().copied(), p);
    if norm == 0.0 {
        return v.clone();
    }
    v.map(|z| {
        let r = z.norm();
        if r == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            (z / r) * (r / norm).powf(p - 1.0)
        }
    })
}

/// Lower estimate of the ℓᵖ operator norm by Boyd's power iteration with
/// random restarts. Exact for `p = 1` and `p = 2`.
pub fn lp_operator_norm_lower<R: Rng + ?Sized>(t: &CMat, p: f64, restarts: usize, rng: &mut R) -> f64 {
    if p == 2.0 || p == 1.0 {
        return lp_operator_norm_upper(t, p);
    }
    let q = p / (p - 1.0);
    let n = t.ncols();
    let complex = !is_real(t);
    let mut best: f64 = 0.0;
    // basis vectors first, then random starts
    for start in 0..(n + restarts) {
        let mut x: CVec = if start < n {
            let mut e = CVec::zeros(n);
            e[start] = C64::new(1.0, 0.0);
            e
        } else {
            gaussian_matrix(rng, n, 1, complex).column(0).into_owned()
        };
        let xn = lp_norm(x.iter().copied(), p);
        if xn == 0.0 {
            continue;
        }
        x /= C64::new(xn, 0.0);
        let mut value = lp_norm((t * &x).iter().copied(), p);
        for _ in 0..100 {
            let y = t * &x;
            let z = t.adjoint() * duality_map(&y, p);
            let mut next = duality_map(&z, q);
            let nn = lp_norm(next.iter().copied(), p);
            if nn == 0.0 {
                break;
            }
            next /= C64::new(nn, 0.0);
            let v = lp_norm((t * &next).iter().copied(), p);
            x = next;
            if v <= value * (1.0 + 1e-12) {
                value = value.max(v);
                break;
            }
            value = v;
        }
        best = best.max(value);
    }
    best
}

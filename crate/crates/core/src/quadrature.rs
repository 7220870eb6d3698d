//! Gauss–Legendre rules, composite panels and a simple adaptive integrator.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels of
/// `order` nodes each. Returns `(nodes, weights)` in increasing node order.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let left = a + k as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(left + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

const ADAPTIVE_ORDER: usize = 10;

/// Adaptive Gauss–Legendre integration: a panel is accepted when its
/// one-panel and two-half-panel estimates agree within the local share of
/// `abs_tol + rel_tol·|I|`.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let (x, w) = gauss_legendre(ADAPTIVE_ORDER);
    let panel = |lo: f64, hi: f64, f: &mut F| -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + half * xi)).sum::<f64>() * half
    };
    // coarse pass for the global scale
    let coarse_panels = 16;
    let h = (b - a) / coarse_panels as f64;
    let mut stack: Vec<(f64, f64, f64, u32)> = (0..coarse_panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            (lo, hi, panel(lo, hi, &mut f), 0)
        })
        .collect();
    let scale: f64 = stack.iter().map(|s| s.2).sum::<f64>().abs();
    let mut total = 0.0;
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(lo, mid, &mut f);
        let right = panel(mid, hi, &mut f);
        let refined = left + right;
        let share = (hi - lo) / (b - a);
        let allowed = (abs_tol + rel_tol * scale) * share.max(1e-3);
        if (refined - whole).abs() <= allowed || depth >= 40 {
            total += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    total
}

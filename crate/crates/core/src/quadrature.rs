//! Gauss–Legendre rules and adaptive 1-D integration.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{FinslerError, Result};

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&m) {
        return rule.clone();
    }
    let rule = compute_gauss_legendre(m);
    cache.lock().unwrap().insert(m, rule.clone());
    rule
}

fn compute_gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[m - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(m);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// Integrates `f` over `[a, b]` with `m` Gauss–Legendre nodes on each of
/// `panels` equal sub-intervals.
pub fn composite_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, m: usize, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (x, w) in gauss_legendre_on(m, lo, lo + h) {
            total += w * f(x);
        }
    }
    total
}

/// Adaptive bisection with a 10-point Gauss–Legendre rule compared against
/// its two-halves refinement. `tol` is relative to the first estimate of
/// the integral (absolute when that estimate is zero).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        gauss_legendre_on(10, a, b)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> Result<f64> {
        let m = 0.5 * (a + b);
        let left = rule(f, a, m);
        let right = rule(f, m, b);
        let diff = (left + right - whole).abs();
        if diff <= tol || depth == 0 {
            if diff > tol && diff > 1e3 * tol {
                return Err(FinslerError::QuadratureNonConvergence { diff });
            }
            return Ok(left + right);
        }
        Ok(recurse(f, a, m, left, 0.5 * tol, depth - 1)? + recurse(f, m, b, right, 0.5 * tol, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let whole = rule(&f, a, b);
    let scale = if whole == 0.0 { 1.0 } else { whole.abs() };
    recurse(&f, a, b, whole, tol * scale, 40)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        for m in [1usize, 2, 5, 8, 16, 64] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * m - 1;
            let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((integral - exact).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn adaptive_handles_smooth_integrands() {
        let v = adaptive(|t: f64| t.sinh().powi(2), 0.0, 1.0, 1e-13).unwrap();
        let exact = (1.0f64.sinh() * 1.0f64.cosh() - 1.0) / 2.0;
        assert!((v - exact).abs() < 1e-12);
        let s = adaptive(|t: f64| t.sqrt(), 0.0, 2.0, 1e-12).unwrap();
        assert!((s - 2.0 / 3.0 * 2.0f64.powf(1.5)).abs() < 1e-10);
    }
}

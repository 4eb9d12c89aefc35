#![allow(dead_code)]

use finsler_core::models::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * r.gen::<f64>() - 1.0)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit(model: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let f = model.f(x, y);
    y.iter().map(|v| v / f).collect()
}

pub fn sphere(dim: usize) -> MetricModel {
    MetricModel::RoundSphere { dim, radius: 1.0 }
}

pub fn randers(b: &[f64]) -> MetricModel {
    MetricModel::RandersFlat { b: b.to_vec() }
}

pub fn perturbed_flat(dim: usize, eps: f64) -> MetricModel {
    MetricModel::RandersPerturbed {
        base: PerturbedBase::Flat { dim },
        eps,
        safe_radius: None,
    }
}

pub fn perturbed_sphere(dim: usize, eps: f64) -> MetricModel {
    MetricModel::RandersPerturbed {
        base: PerturbedBase::Sphere { dim, radius: 1.0 },
        eps,
        safe_radius: None,
    }
}

/// One representative of every family.
pub fn zoo() -> Vec<MetricModel> {
    vec![
        MetricModel::Euclidean { dim: 2 },
        MetricModel::Euclidean { dim: 3 },
        sphere(2),
        sphere(3),
        MetricModel::PoincareBall { dim: 2, k: 1.0 },
        randers(&[0.5, 0.0]),
        randers(&[0.3, -0.2, 0.1]),
        perturbed_flat(2, 0.2),
        perturbed_sphere(2, 0.2),
        MetricModel::BerwaldProduct { factor: Box::new(sphere(2)), drift: 0.3 },
        MetricModel::ReversibleQuartic { dim: 2, eps: 0.3 },
    ]
}

/// Random valid sample with `|x| < 0.9`, away from the Poincaré boundary.
pub fn chart_sample(model: &MetricModel, r: &mut ChaCha8Rng) -> TangentSample {
    let n = model.dim();
    loop {
        let x = random_vec(r, n, 0.9);
        if norm(&x) >= 0.9 {
            continue;
        }
        let y = random_vec(r, n, 1.0);
        let s = TangentSample::new(x, y);
        if model.check_sample(&s).is_ok() {
            return s;
        }
    }
}

pub fn shifted(v: &[f64], i: usize, d: f64) -> Vec<f64> {
    let mut w = v.to_vec();
    w[i] += d;
    w
}

/// Fundamental tensor of `F = |y| + <b, y>` in closed form.
pub fn randers_g(b: &[f64], y: &[f64]) -> DMatrix<f64> {
    let n = y.len();
    let a = norm(y);
    let f = a + dot(b, y);
    let l: Vec<f64> = y.iter().map(|v| v / a).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        f / a * (delta - l[i] * l[j]) + (l[i] + b[i]) * (l[j] + b[j])
    })
}

/// Composite Simpson rule.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let m = 2 * panels;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Richardson extrapolation of a second-order difference quotient.
pub fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// `ĝ` of `|y| + <b, y>` in the plane by the periodic trapezoid rule on the
/// curve `u(t) = θ(t)/F(θ(t))`, with `dν = sqrt(g_u(u', u')) dt` and `u'`
/// taken analytically.
pub fn randers_average_metric(b: &[f64], nodes: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(2, 2);
    let mut total = 0.0;
    for i in 0..nodes {
        let t = 2.0 * std::f64::consts::PI * i as f64 / nodes as f64;
        let th = [t.cos(), t.sin()];
        let dth = [-t.sin(), t.cos()];
        let f = 1.0 + dot(b, &th);
        let df = dot(b, &dth);
        let u: Vec<f64> = th.iter().map(|v| v / f).collect();
        let du: Vec<f64> = (0..2).map(|k| dth[k] / f - th[k] * df / (f * f)).collect();
        let g = randers_g(b, &u);
        let duv = nalgebra::DVector::from_column_slice(&du);
        let w = (&g * &duv).dot(&duv).sqrt();
        acc += g * w;
        total += w;
    }
    acc / total
}

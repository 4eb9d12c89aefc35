//! Quadrature on the indicatrix `S_xM`, the average metric `ĝ` and the
//! uniformity constant `Λ_F`.
//!
//! `S_xM` is star-shaped, so it is parameterized by Euclidean directions
//! `θ ↦ u(θ) = θ/F(x, θ)`. The measure `dν_x` is the volume induced by
//! `g_u` restricted to the tangent space of the indicatrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FinslerError, Result};
use crate::jet::Jet;
use crate::models::{unit_direction, ChartPoint, MetricModel};
use crate::optimize::nelder_mead;
use crate::quadrature::gauss_legendre_on;

/// Default Gauss–Legendre nodes per sphere angle.
pub const DEFAULT_NODES_PER_ANGLE: usize = 64;

/// One quadrature node on the indicatrix.
#[derive(Debug, Clone)]
pub struct IndicatrixNode {
    pub angles: Vec<f64>,
    /// Euclidean unit direction.
    pub theta: Vec<f64>,
    /// Radial function `1/F(x, θ)`.
    pub rho: f64,
    /// Point of the indicatrix, `F(x, u) = 1`.
    pub u: Vec<f64>,
    /// Fundamental tensor at `u`.
    pub g: DMatrix<f64>,
    /// Quadrature weight for `dν_x`.
    pub nu_weight: f64,
    /// Quadrature weight for the Euclidean area of the unit sphere.
    pub area_weight: f64,
}

/// `F²`, its y-gradient and the fundamental tensor at `(x, y)`.
pub(crate) fn f2_grad_g(model: &MetricModel, x: &[f64], y: &[f64]) -> (f64, Vec<f64>, DMatrix<f64>) {
    let n = y.len();
    if let Some((phi, _, _)) = model.conformal(x) {
        let c = (2.0 * phi).exp();
        let f2 = c * y.iter().map(|v| v * v).sum::<f64>();
        return (f2, y.iter().map(|v| 2.0 * c * v).collect(), DMatrix::identity(n, n) * c);
    }
    let jet = model.f2_y_jet(x, y, 2);
    let grad = (0..n).map(|i| jet.d1(i)).collect();
    let mut e = vec![0u8; n];
    let g = DMatrix::from_fn(n, n, |i, j| {
        e.iter_mut().for_each(|v| *v = 0);
        e[i] += 1;
        e[j] += 1;
        0.5 * jet.partial(&e)
    });
    (jet.value(), grad, g)
}

/// Tangent vectors `∂θ/∂a` of the hyperspherical parameterization.
pub(crate) fn direction_frame(angles: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = angles.len();
    let vars = Jet::variables(angles, 1);
    let dir = unit_direction(&vars);
    let theta = dir.iter().map(|d| d.value()).collect();
    let tangents = (0..m)
        .map(|a| dir.iter().map(|d| d.d1(a)).collect())
        .collect();
    (theta, tangents)
}

/// Euclidean area Jacobian of the hyperspherical angles.
pub fn angle_jacobian(angles: &[f64]) -> f64 {
    let m = angles.len();
    (0..m.saturating_sub(1))
        .map(|a| angles[a].sin().powi((m - 1 - a) as i32))
        .product()
}

/// Weight `sqrt(det Gram_{g_u}(∂_a u))` of `dν` relative to `dθ`.
pub(crate) fn nu_density(model: &MetricModel, x: &[f64], angles: &[f64]) -> (Vec<f64>, f64, Vec<f64>, DMatrix<f64>, f64) {
    let (theta, tangents) = direction_frame(angles);
    let (f2, grad, g) = f2_grad_g(model, x, &theta);
    let f = f2.sqrt();
    let rho = 1.0 / f;
    let u: Vec<f64> = theta.iter().map(|t| t * rho).collect();
    let m = tangents.len();
    let du: Vec<Vec<f64>> = tangents
        .iter()
        .map(|t| {
            let drho = -0.5 * grad.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / (f2 * f);
            t.iter().zip(&theta).map(|(ti, th)| rho * ti + drho * th).collect()
        })
        .collect();
    let gram = DMatrix::from_fn(m, m, |a, b| quad(&g, &du[a], &du[b]));
    let w = gram.determinant().max(0.0).sqrt();
    (theta, rho, u, g, w)
}

pub(crate) fn quad(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * a[i] * b[j];
        }
    }
    acc
}

/// Product Gauss–Legendre grid over the hyperspherical angles.
pub fn angle_grid(n: usize, nodes_per_angle: usize) -> Vec<(Vec<f64>, f64)> {
    let m = n - 1;
    let mut axes: Vec<Vec<(f64, f64)>> = Vec::with_capacity(m);
    for a in 0..m {
        let hi = if a + 1 == m { 2.0 * PI } else { PI };
        axes.push(gauss_legendre_on(nodes_per_angle, 0.0, hi));
    }
    let mut out = vec![(Vec::new(), 1.0)];
    for axis in &axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for (angles, w) in &out {
            for &(t, wt) in axis {
                let mut a: Vec<f64> = angles.clone();
                a.push(t);
                next.push((a, w * wt));
            }
        }
        out = next;
    }
    out
}

/// Quadrature nodes for `∫_{S_xM} · dν_x`.
pub fn indicatrix_nodes(model: &MetricModel, x: &[f64], nodes_per_angle: usize) -> Vec<IndicatrixNode> {
    angle_grid(model.dim(), nodes_per_angle)
        .into_iter()
        .map(|(angles, w)| {
            let (theta, rho, u, g, nu) = nu_density(model, x, &angles);
            let area_weight = w * angle_jacobian(&angles);
            IndicatrixNode {
                angles,
                theta,
                rho,
                u,
                g,
                nu_weight: w * nu,
                area_weight,
            }
        })
        .collect()
}

/// `ν(S_xM)`.
pub fn indicatrix_volume(model: &MetricModel, x: &[f64], nodes_per_angle: usize) -> f64 {
    indicatrix_nodes(model, x, nodes_per_angle)
        .iter()
        .map(|node| node.nu_weight)
        .sum()
}

/// `ĝ` with a fixed node count and no convergence check.
pub fn average_metric_with(model: &MetricModel, x: &[f64], nodes_per_angle: usize) -> DMatrix<f64> {
    let n = model.dim();
    let nodes = indicatrix_nodes(model, x, nodes_per_angle);
    let mut acc = DMatrix::zeros(n, n);
    let mut total = 0.0;
    for node in &nodes {
        acc += &node.g * node.nu_weight;
        total += node.nu_weight;
    }
    acc / total
}

/// Average metric `ĝ(X, Y) = ν(S_xM)⁻¹ ∫ g_y(X, Y) dν_x(y)`. Fails when
/// halving the node count changes the result by more than `1e-8`
/// relative.
pub fn average_metric(model: &MetricModel, p: &ChartPoint, nodes_per_angle: usize) -> Result<DMatrix<f64>> {
    model.check_point(p.chart, &p.x)?;
    if nodes_per_angle < 8 {
        return Err(invalid("nodesPerAngle", "nodesPerAngle >= 8"));
    }
    let fine = average_metric_with(model, &p.x, nodes_per_angle);
    let coarse = average_metric_with(model, &p.x, nodes_per_angle / 2);
    let diff = (&fine - &coarse).abs().max();
    if diff > 1e-8 * fine.abs().max() {
        return Err(FinslerError::QuadratureNonConvergence { diff });
    }
    Ok(fine)
}

/// Stage of the `Λ_F` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RefinementStep {
    pub stage: String,
    pub value: f64,
}

/// Sampled estimate of the uniformity constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UniformityEstimate {
    /// Best ratio on the coarse grid.
    pub raw: f64,
    /// Best ratio after Nelder–Mead polishing.
    pub polished: f64,
    /// `max(raw, polished)`; a lower bound of the true supremum.
    pub value: f64,
    pub points: usize,
    pub refinement: Vec<RefinementStep>,
}

/// Uniform grid of directions (not a quadrature rule) with `m` steps on the
/// periodic angle and `m/2` on the others.
pub fn direction_grid(n: usize, m: usize) -> Vec<Vec<f64>> {
    let k = n - 1;
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for a in 0..k {
        let periodic = a + 1 == k;
        let steps = if periodic { m } else { (m / 2).max(2) };
        let mut next = Vec::new();
        for angles in &out {
            for s in 0..steps {
                let t = if periodic {
                    2.0 * PI * s as f64 / steps as f64
                } else {
                    PI * (s as f64 + 0.5) / steps as f64
                };
                let mut v = angles.clone();
                v.push(t);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn ratio_at(model: &MetricModel, x: &[f64], ax: &[f64], ay: &[f64], az: &[f64]) -> f64 {
    let gx = f2_grad_g(model, x, &unit_direction(ax)).2;
    let gz = f2_grad_g(model, x, &unit_direction(az)).2;
    let y = unit_direction(ay);
    quad(&gx, &y, &y) / quad(&gz, &y, &y)
}

/// Estimates `Λ_F = sup g_X(Y,Y)/g_Z(Y,Y)` over the given points.
///
/// A direction grid with `directions_per_angle` steps gives the raw value;
/// the best 1% of `Y` directions are then polished by Nelder–Mead over the
/// triple `(X, Y, Z)`.
pub fn uniformity_constant(
    model: &MetricModel,
    region: &[ChartPoint],
    directions_per_angle: usize,
) -> Result<UniformityEstimate> {
    if directions_per_angle < 8 {
        return Err(invalid("directionsPerAngle", "directionsPerAngle >= 8"));
    }
    if region.is_empty() {
        return Err(invalid("region", "at least one point"));
    }
    for p in region {
        model.check_point(p.chart, &p.x)?;
    }
    let n = model.dim();
    let points: &[ChartPoint] = if model.is_minkowski() { &region[..1] } else { region };
    let grid = direction_grid(n, directions_per_angle);
    let mut raw: f64 = 1.0;
    // (ratio, point index, X, Y, Z)
    let mut candidates: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    for (pi, p) in points.iter().enumerate() {
        let gs: Vec<DMatrix<f64>> = grid
            .iter()
            .map(|a| f2_grad_g(model, &p.x, &unit_direction(a)).2)
            .collect();
        for (yi, ay) in grid.iter().enumerate() {
            let y = unit_direction(ay);
            let (mut best_hi, mut best_lo) = (f64::MIN, f64::MAX);
            let (mut ix, mut iz) = (0, 0);
            for (k, g) in gs.iter().enumerate() {
                let q = quad(g, &y, &y);
                if q > best_hi {
                    best_hi = q;
                    ix = k;
                }
                if q < best_lo {
                    best_lo = q;
                    iz = k;
                }
            }
            let r = best_hi / best_lo;
            raw = raw.max(r);
            candidates.push((r, pi, ix, yi, iz));
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let keep = (candidates.len() / 100).clamp(1, 16);
    let mut polished = raw;
    let k = n - 1;
    for &(_, pi, ix, yi, iz) in candidates.iter().take(keep) {
        if model.is_riemannian() {
            break;
        }
        let x = &points[pi].x;
        let mut start = grid[ix].clone();
        start.extend_from_slice(&grid[yi]);
        start.extend_from_slice(&grid[iz]);
        let step = PI / directions_per_angle as f64;
        let m = nelder_mead(
            |v| -ratio_at(model, x, &v[..k], &v[k..2 * k], &v[2 * k..]),
            &start,
            step,
            1e-14,
            400 * (3 * k + 1),
        );
        polished = polished.max(-m.value);
    }
    Ok(UniformityEstimate {
        raw,
        polished,
        value: raw.max(polished),
        points: points.len(),
        refinement: vec![
            RefinementStep {
                stage: format!("grid({directions_per_angle})"),
                value: raw,
            },
            RefinementStep {
                stage: "nelderMead".into(),
                value: polished,
            },
        ],
    })
}

//! Busemann–Hausdorff and Holmes–Thompson volume densities, distortion,
//! S-curvature, space-form comparison functions and polar densities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FinslerError, Result};
use crate::geodesic::{
    forward_ball_sample, integrate_flow, integrate_geodesic, polar_jacobi_spec, volume_factor, GeodesicOptions,
};
use crate::indicatrix::{angle_grid, angle_jacobian};
use crate::models::{unit_direction, ChartPoint, MetricModel, TangentSample};
use crate::quadrature::adaptive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    #[serde(rename = "BH")]
    BusemannHausdorff,
    #[serde(rename = "HT")]
    HolmesThompson,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 2] = [MeasureKind::BusemannHausdorff, MeasureKind::HolmesThompson];

    pub fn tag(&self) -> &'static str {
        match self {
            MeasureKind::BusemannHausdorff => "BH",
            MeasureKind::HolmesThompson => "HT",
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = FinslerError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "BH" | "bh" => Ok(MeasureKind::BusemannHausdorff),
            "HT" | "ht" => Ok(MeasureKind::HolmesThompson),
            _ => Err(invalid("measure", "BH or HT")),
        }
    }
}

/// How [`density`] is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum DensityMethod {
    /// Closed forms for Riemannian and Randers metrics, quadrature otherwise.
    #[default]
    Auto,
    Quadrature,
}

/// Volume of the Euclidean unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Area of the unit sphere `𝕊^{n−1}`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

fn quadrature_nodes(n: usize) -> usize {
    match n {
        2 => 128,
        3 => 48,
        _ => 14,
    }
}

/// Density by quadrature over the unit ball of `F(x, ·)` in polar form
/// with `nodes_per_angle` Gauss–Legendre nodes per angle; the radial
/// integrals are done analytically.
pub fn density_quadrature(model: &MetricModel, x: &[f64], kind: MeasureKind, nodes_per_angle: usize) -> f64 {
    let n = model.dim();
    let mut acc = 0.0;
    for (angles, w) in angle_grid(n, nodes_per_angle) {
        let theta = unit_direction(&angles);
        let rho = 1.0 / model.f(x, &theta);
        let dv = w * angle_jacobian(&angles) * rho.powi(n as i32) / n as f64;
        acc += match kind {
            MeasureKind::BusemannHausdorff => dv,
            MeasureKind::HolmesThompson => dv * model.g_matrix(x, &theta).determinant(),
        };
    }
    match kind {
        MeasureKind::BusemannHausdorff => unit_ball_volume(n) / acc,
        MeasureKind::HolmesThompson => acc / unit_ball_volume(n),
    }
}

/// Coordinate density `σ(x)` of `d𝔪 = σ dx`.
pub fn density(model: &MetricModel, p: &ChartPoint, kind: MeasureKind, method: DensityMethod) -> Result<f64> {
    model.check_point(p.chart, &p.x)?;
    density_unchecked(model, &p.x, kind, method)
}

pub(crate) fn density_unchecked(model: &MetricModel, x: &[f64], kind: MeasureKind, method: DensityMethod) -> Result<f64> {
    let n = model.dim();
    if method == DensityMethod::Auto {
        if model.is_riemannian() {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            return Ok(model.g_matrix(x, &e).determinant().sqrt());
        }
        if let Some((a, b)) = model.randers_parts(x) {
            let sqrt_det = a.determinant().sqrt();
            return Ok(match kind {
                MeasureKind::BusemannHausdorff => {
                    let ainv = a.clone().try_inverse().ok_or(FinslerError::Domain("singular α".into()))?;
                    let mut b2 = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            b2 += ainv[(i, j)] * b[i] * b[j];
                        }
                    }
                    (1.0 - b2).powf((n as f64 + 1.0) / 2.0) * sqrt_det
                }
                MeasureKind::HolmesThompson => sqrt_det,
            });
        }
    }
    // Double the node count until halving it changes the value by < 1e-8.
    let m = quadrature_nodes(n);
    let mut coarse = density_quadrature(model, x, kind, m / 2);
    let mut diff = f64::INFINITY;
    for nodes in [m, 2 * m, 4 * m] {
        let fine = density_quadrature(model, x, kind, nodes);
        diff = (fine - coarse).abs();
        if diff <= 1e-8 * fine.abs() {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(FinslerError::QuadratureNonConvergence { diff })
}

/// `τ = log(sqrt(det g(x, y)) / σ(x))` without validation.
pub fn distortion_at(model: &MetricModel, x: &[f64], y: &[f64], kind: MeasureKind) -> Result<f64> {
    let sigma = density_unchecked(model, x, kind, DensityMethod::Auto)?;
    Ok(0.5 * model.g_matrix(x, y).determinant().ln() - sigma.ln())
}

/// Distortion `τ(y)`.
pub fn distortion(model: &MetricModel, s: &TangentSample, kind: MeasureKind) -> Result<f64> {
    model.check_sample(s)?;
    distortion_at(model, &s.x, &s.y, kind)
}

fn tau_along(model: &MetricModel, s: &TangentSample, t: f64, kind: MeasureKind, opts: &GeodesicOptions) -> Result<f64> {
    let path = integrate_geodesic(model, s, t, opts)?;
    let end = path.end();
    let n = model.dim();
    distortion_at(model, end.x(n), end.v(n), kind)
}

/// S-curvature `d/dt τ(γ̇(t))` at `t = 0` by Richardson-refined fourth-order
/// central differences with step `1e-4`.
pub fn s_curvature(model: &MetricModel, s: &TangentSample, kind: MeasureKind) -> Result<f64> {
    model.check_sample(s)?;
    let opts = GeodesicOptions::with_tol(1e-12);
    let h = 1e-4;
    let mut tau = std::collections::HashMap::new();
    for k in [-4i32, -2, -1, 1, 2, 4] {
        tau.insert(k, tau_along(model, s, k as f64 * h, kind, &opts)?);
    }
    let stencil = |m: i32, step: f64| {
        (tau[&(-2 * m)] - 8.0 * tau[&(-m)] + 8.0 * tau[&m] - tau[&(2 * m)]) / (12.0 * step)
    };
    let fine = stencil(1, h);
    let coarse = stencil(2, 2.0 * h);
    Ok((16.0 * fine - coarse) / 15.0)
}

/// `s_k(t)`: solution of `f'' + k f = 0`, `f(0) = 0`, `f'(0) = 1`.
pub fn s_k(k: f64, t: f64) -> f64 {
    if k > 0.0 {
        (k.sqrt() * t).sin() / k.sqrt()
    } else if k < 0.0 {
        ((-k).sqrt() * t).sinh() / (-k).sqrt()
    } else {
        t
    }
}

/// `s_k'(t)`.
pub fn s_k_prime(k: f64, t: f64) -> f64 {
    if k > 0.0 {
        (k.sqrt() * t).cos()
    } else if k < 0.0 {
        ((-k).sqrt() * t).cosh()
    } else {
        1.0
    }
}

/// `H_k(r) = ∂_r log s_k^{n−1}(r)`.
pub fn h_k(n: usize, k: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) || (k > 0.0 && r >= PI / k.sqrt()) {
        return Err(FinslerError::Domain(format!("H_k undefined at r = {r} for k = {k}")));
    }
    Ok((n as f64 - 1.0) * s_k_prime(k, r) / s_k(k, r))
}

/// Volume `v(n, k, r)` of a ball of radius `r` in the `n`-dimensional space
/// form of curvature `k` (the whole sphere once `r ≥ π/√k`).
pub fn space_form_volume(n: usize, k: f64, r: f64) -> Result<f64> {
    if n < 1 || !(r >= 0.0) {
        return Err(invalid("n, r", "n >= 1 and r >= 0"));
    }
    let area = unit_sphere_area(n);
    if k == 0.0 {
        return Ok(area * r.powi(n as i32) / n as f64);
    }
    let r = if k > 0.0 { r.min(PI / k.sqrt()) } else { r };
    Ok(area * adaptive(|t| s_k(k, t).powi(n as i32 - 1), 0.0, r, 1e-13)?)
}

/// Polar volume density at `exp_p(r u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolarDensity {
    pub base: ChartPoint,
    pub direction: Vec<f64>,
    pub r: f64,
    /// `σ̂_p(r, u)`.
    pub value: f64,
    /// `H(r, u) = ∂_r log(σ̂ e^{τ(γ̇)})`.
    pub h: f64,
    /// `τ(γ̇(r))`.
    pub tau: f64,
    pub kind: MeasureKind,
}

/// `σ̂_p(r, u)` and `H(r, u)`. `H` combines the exact derivative of
/// `log|det[γ̇, J]|` from the Jacobi system with a fourth-order difference of
/// `½ log det g_{γ̇}` along the geodesic.
pub fn polar_density(model: &MetricModel, p: &ChartPoint, u: &[f64], r: f64, kind: MeasureKind) -> Result<PolarDensity> {
    model.check_point(p.chart, &p.x)?;
    let n = model.dim();
    if u.len() != n {
        return Err(FinslerError::DimensionMismatch { expected: n, got: u.len() });
    }
    let fu = model.f(&p.x, u);
    if !(fu > 0.0) {
        return Err(FinslerError::DegenerateDirection);
    }
    if (fu - 1.0).abs() > 1e-9 {
        return Err(invalid("y", "F(p, y) = 1"));
    }
    let safe = model.safe_radius();
    if !(r > 0.0) {
        return Err(invalid("r", "r > 0"));
    }
    if r > safe {
        return Err(FinslerError::RadiusTooLarge { radius: r, bound: safe });
    }
    let opts = GeodesicOptions::with_tol(1e-12);
    let spec = polar_jacobi_spec(model, p, u);
    let path = integrate_flow(model, &TangentSample::at(p, u.to_vec()), r, &opts, &spec, &[])?;
    let end = path.end();
    let x = end.x(n).to_vec();
    let v = end.v(n).to_vec();
    let factor = volume_factor(model, &path, end);
    let tau = distortion_at(model, &x, &v, kind)?;

    // d/dr log|det M| = tr(M⁻¹ Ṁ) with M = [γ̇, J_1, …], Ṁ = [γ̈, J̇_1, …].
    let mut mm = nalgebra::DMatrix::zeros(n, n);
    let mut md = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        mm[(i, 0)] = v[i];
        md[(i, 0)] = end.deriv[n + i];
    }
    for a in 0..path.jacobi {
        let (j, jd) = path.jacobi_field(end, a);
        for i in 0..n {
            mm[(i, a + 1)] = j[i];
            md[(i, a + 1)] = jd[i];
        }
    }
    let det_rate = mm
        .lu()
        .solve(&md)
        .map(|s| s.trace())
        .ok_or(FinslerError::Domain("conjugate point reached".into()))?;
    let here = TangentSample::in_chart(end.chart, x.clone(), v.clone());
    let h = 1e-4;
    let mut logdet = [0.0; 4];
    for (slot, k) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
        let seg = integrate_geodesic(model, &here, k * h, &opts)?;
        let e = seg.end();
        logdet[slot] = 0.5 * model.g_matrix(e.x(n), e.v(n)).determinant().ln();
    }
    let metric_rate = (logdet[0] - 8.0 * logdet[1] + 8.0 * logdet[2] - logdet[3]) / (12.0 * h);
    Ok(PolarDensity {
        base: p.clone(),
        direction: u.to_vec(),
        r,
        value: factor * (-tau).exp(),
        h: det_rate + metric_rate,
        tau,
        kind,
    })
}

/// Monte Carlo estimate of `𝔪(B⁺_p(R))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub count: usize,
    pub radius: f64,
    pub kind: MeasureKind,
    /// Set when `R` is within 5% of the safe radius, where the polar density
    /// is truncated and the estimate is biased low.
    pub near_injectivity_bound: bool,
}

/// `𝔪(B⁺_p(R)) = ∫_{S_pM} ∫_0^R σ̂ dr dν` by stratified sampling.
pub fn ball_measure(model: &MetricModel, p: &ChartPoint, radius: f64, kind: MeasureKind, count: usize, seed: u64) -> Result<BallEstimate> {
    if count < 2 {
        return Err(invalid("count", "count >= 2"));
    }
    let sample = forward_ball_sample(model, p, radius, count, seed, Some(kind), &GeodesicOptions::with_tol(1e-9))?;
    let weights: Vec<f64> = sample.points.iter().map(|pt| pt.weight.unwrap_or(0.0)).collect();
    let (mean, se) = mean_and_error(&weights);
    Ok(BallEstimate {
        mean,
        standard_error: se,
        count,
        radius,
        kind,
        near_injectivity_bound: radius > 0.95 * model.safe_radius(),
    })
}

/// Sample mean and its standard error.
pub fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_densities_are_one() {
        let e = MetricModel::Euclidean { dim: 3 };
        for kind in MeasureKind::ALL {
            let d = density_quadrature(&e, &[0.0; 3], kind, 24);
            assert!((d - 1.0).abs() < 1e-12, "{d}");
        }
    }

    #[test]
    fn space_form_values() {
        assert!((space_form_volume(2, 0.0, 1.5).unwrap() - PI * 2.25).abs() < 1e-12);
        assert!((s_k(1.0, PI / 2.0) - 1.0).abs() < 1e-15);
        assert!(h_k(2, 1.0, PI / 2.0).unwrap().abs() < 1e-15);
        let v = space_form_volume(3, -1.0, 1.0).unwrap();
        let exact = 4.0 * PI * (1f64.sinh() * 1f64.cosh() - 1.0) / 2.0;
        assert!((v - exact).abs() < 1e-10);
        assert!(h_k(2, 1.0, PI).is_err());
    }

    #[test]
    fn sphere_polar_density_is_sine() {
        let s = MetricModel::RoundSphere { dim: 3, radius: 1.0 };
        let p = ChartPoint::new(0, vec![0.1, -0.2, 0.05]);
        let y = [0.3, 0.1, -0.2];
        let f = s.f(&p.x, &y);
        let u: Vec<f64> = y.iter().map(|c| c / f).collect();
        for r in [0.3, 1.2, 2.5] {
            let pd = polar_density(&s, &p, &u, r, MeasureKind::BusemannHausdorff).unwrap();
            assert!((pd.value - r.sin().powi(2)).abs() < 1e-8, "{} vs {}", pd.value, r.sin().powi(2));
            assert!((pd.h - h_k(3, 1.0, r).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn randers_quadrature_matches_closed_form() {
        let m = MetricModel::RandersFlat { b: vec![0.3, -0.4] };
        let closed = density_unchecked(&m, &[0.0, 0.0], MeasureKind::BusemannHausdorff, DensityMethod::Auto).unwrap();
        let quad = density_unchecked(&m, &[0.0, 0.0], MeasureKind::BusemannHausdorff, DensityMethod::Quadrature).unwrap();
        assert!((closed - 0.75f64.powf(1.5)).abs() < 1e-14);
        assert!((quad - closed).abs() < 1e-9, "{quad} vs {closed}");
        let ht = density_unchecked(&m, &[0.0, 0.0], MeasureKind::HolmesThompson, DensityMethod::Quadrature).unwrap();
        assert!((ht - 1.0).abs() < 1e-9, "{ht}");
    }

    #[test]
    fn euclidean_ball_measure() {
        let e = MetricModel::Euclidean { dim: 2 };
        let est = ball_measure(&e, &ChartPoint::origin(2), 1.0, MeasureKind::BusemannHausdorff, 400, 7).unwrap();
        assert!((est.mean - PI).abs() < 3.0 * est.standard_error + 1e-9, "{est:?}");
    }
}

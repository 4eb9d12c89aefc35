//! Closed-form Finsler metric families and their pointwise tensors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FinslerError, Result};
use crate::jet::{Jet, Scalar, MAX_VARS};

/// Radius beyond which a sphere chart hands over to the antipodal chart.
pub const CHART_SWITCH_RADIUS: f64 = 1.5;

/// Margin subtracted from π·r₀ in the sphere's safe radius.
pub const SPHERE_RADIUS_MARGIN: f64 = 1e-3;

/// Base manifold of a perturbed Randers metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PerturbedBase {
    Flat { dim: usize },
    Sphere { dim: usize, radius: f64 },
}

/// A Finsler metric family given in closed form on one or two charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase")]
pub enum MetricModel {
    /// Flat `|y|`.
    Euclidean { dim: usize },
    /// Round sphere of radius `radius` in stereographic coordinates:
    /// `F = 2 r₀ |y| / (1 + |x|²)`. Chart 0 projects from the north pole
    /// (chart origin = south pole), chart 1 from the south pole.
    RoundSphere { dim: usize, radius: f64 },
    /// Poincaré ball of curvature `-k²`: `F = 2|y| / (k (1 - |x|²))`.
    PoincareBall { dim: usize, k: f64 },
    /// Minkowski–Randers norm `|y| + <b, y>`.
    RandersFlat { b: Vec<f64> },
    /// `α + β` with a position-dependent one-form of α-norm at most `eps`.
    RandersPerturbed {
        base: PerturbedBase,
        eps: f64,
        #[serde(default, rename = "safeRadius", skip_serializing_if = "Option::is_none")]
        safe_radius: Option<f64>,
    },
    /// `sqrt(α_f² + dt²) + c·dt` on `factor × ℝ`; the one-form is parallel,
    /// so the metric is Berwald.
    BerwaldProduct { factor: Box<MetricModel>, drift: f64 },
    /// Reversible Minkowski norm `F² = |y|² + eps·Σ y_i⁴ / |y|²`.
    ReversibleQuartic { dim: usize, eps: f64 },
}

/// A point in a specific chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(chart: usize, x: Vec<f64>) -> Self {
        ChartPoint { chart, x }
    }

    pub fn origin(dim: usize) -> Self {
        ChartPoint { chart: 0, x: vec![0.0; dim] }
    }
}

/// A point together with a tangent vector in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSample {
    pub chart: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        TangentSample { chart: 0, x, y }
    }

    pub fn in_chart(chart: usize, x: Vec<f64>, y: Vec<f64>) -> Self {
        TangentSample { chart, x, y }
    }

    pub fn at(point: &ChartPoint, y: Vec<f64>) -> Self {
        TangentSample {
            chart: point.chart,
            x: point.x.clone(),
            y,
        }
    }

    pub fn point(&self) -> ChartPoint {
        ChartPoint::new(self.chart, self.x.clone())
    }
}

/// Change of chart with first and second derivatives of the transition map.
#[derive(Debug, Clone)]
pub struct ChartTransition {
    pub chart: usize,
    pub x: Vec<f64>,
    /// `jac[(i, j)] = ∂x'^i/∂x^j`.
    pub jac: DMatrix<f64>,
    /// `hess[i][(j, k)] = ∂²x'^i/∂x^j∂x^k`.
    pub hess: Vec<DMatrix<f64>>,
}

impl ChartTransition {
    /// Pushes a tangent vector through the transition.
    pub fn vector(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| (0..n).map(|j| self.jac[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Pushes the derivative of a variation field: `D J̇ + D²φ(v, J)`.
    pub fn variation_rate(&self, v: &[f64], j: &[f64], jdot: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut acc: f64 = (0..n).map(|a| self.jac[(i, a)] * jdot[a]).sum();
                for a in 0..n {
                    for b in 0..n {
                        acc += self.hess[i][(a, b)] * v[a] * j[b];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Fundamental and Cartan tensors at a tangent sample.
#[derive(Debug, Clone)]
pub struct TensorAtPoint {
    pub sample: TangentSample,
    pub g: DMatrix<f64>,
    pub g_inverse: DMatrix<f64>,
    /// Row-major `A[i*n*n + j*n + k]`.
    pub cartan: Vec<f64>,
}

impl TensorAtPoint {
    pub fn cartan(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.g.nrows();
        self.cartan[(i * n + j) * n + k]
    }
}

/// Taylor jet of `F²` in the `2n` variables `(x, y)`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub dim: usize,
    pub jet: Jet,
}

impl MetricJet {
    /// `∂^{ax} ∂^{ay} F²` for multi-indices over x and over y.
    pub fn partial(&self, ax: &[u8], ay: &[u8]) -> f64 {
        let mut e = ax.to_vec();
        e.extend_from_slice(ay);
        self.jet.partial(&e)
    }
}

/// Unit vector in `ℝⁿ` from hyperspherical angles
/// `(a₁, …, a_{n-1})`, `a_{n-1}` being the periodic one.
pub fn unit_direction<T: Scalar>(angles: &[T]) -> Vec<T> {
    let n = angles.len() + 1;
    let mut out = Vec::with_capacity(n);
    let mut prod: Option<T> = None;
    for a in angles {
        let c = a.clone().cos();
        out.push(match &prod {
            Some(p) => p.clone() * c,
            None => c,
        });
        let s = a.clone().sin();
        prod = Some(match prod {
            Some(p) => p * s,
            None => s,
        });
    }
    out.push(prod.expect("at least one angle"));
    out
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    let mut acc = v[0].clone() * v[0].clone();
    for t in &v[1..] {
        acc = acc + t.clone() * t.clone();
    }
    acc
}

fn sphere_embed(chart: usize, x: &[f64], radius: f64) -> Vec<f64> {
    let s: f64 = x.iter().map(|v| v * v).sum();
    let mut p: Vec<f64> = x.iter().map(|v| 2.0 * v / (1.0 + s) * radius).collect();
    let last = if chart == 0 { (s - 1.0) / (1.0 + s) } else { (1.0 - s) / (1.0 + s) };
    p.push(last * radius);
    p
}

fn sphere_chart_of(p: &[f64], radius: f64) -> ChartPoint {
    let n = p.len() - 1;
    let last = p[n] / radius;
    // Chart 0 projects from the north pole: x = P_i / (r₀ (1 - last)).
    if last <= 0.0 {
        ChartPoint::new(0, p[..n].iter().map(|v| v / radius / (1.0 - last)).collect())
    } else {
        ChartPoint::new(1, p[..n].iter().map(|v| v / radius / (1.0 + last)).collect())
    }
}

fn inversion(x: &[f64]) -> ChartTransition {
    let n = x.len();
    let s: f64 = x.iter().map(|v| v * v).sum();
    let y: Vec<f64> = x.iter().map(|v| v / s).collect();
    let mut jac = DMatrix::zeros(n, n);
    let mut hess = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 1.0 } else { 0.0 };
            jac[(i, j)] = d / s - 2.0 * x[i] * x[j] / (s * s);
            for k in 0..n {
                let dij = d;
                let dik = if i == k { 1.0 } else { 0.0 };
                let djk = if j == k { 1.0 } else { 0.0 };
                hess[i][(j, k)] = -2.0 * (dij * x[k] + dik * x[j] + djk * x[i]) / (s * s)
                    + 8.0 * x[i] * x[j] * x[k] / (s * s * s);
            }
        }
    }
    ChartTransition {
        chart: 0,
        x: y,
        jac,
        hess,
    }
}

impl MetricModel {
    /// Checks the parameter constraints of the family.
    pub fn validate(&self) -> Result<()> {
        let dim_ok = |dim: usize| -> Result<()> {
            if dim < 2 || 2 * dim > MAX_VARS {
                return Err(invalid("dim", format!("2 <= dim <= {}", MAX_VARS / 2)));
            }
            Ok(())
        };
        match self {
            MetricModel::Euclidean { dim } => dim_ok(*dim),
            MetricModel::RoundSphere { dim, radius } => {
                dim_ok(*dim)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(invalid("radius", "radius > 0"));
                }
                Ok(())
            }
            MetricModel::PoincareBall { dim, k } => {
                dim_ok(*dim)?;
                if !(*k > 0.0 && k.is_finite()) {
                    return Err(invalid("k", "k > 0"));
                }
                Ok(())
            }
            MetricModel::RandersFlat { b } => {
                dim_ok(b.len())?;
                let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(nb < 1.0) {
                    return Err(invalid("b", "|b| < 1"));
                }
                Ok(())
            }
            MetricModel::RandersPerturbed { base, eps, safe_radius } => {
                match base {
                    PerturbedBase::Flat { dim } => dim_ok(*dim)?,
                    PerturbedBase::Sphere { dim, radius } => {
                        dim_ok(*dim)?;
                        if !(*radius > 0.0) {
                            return Err(invalid("radius", "radius > 0"));
                        }
                    }
                }
                if !(*eps >= 0.0 && *eps < 1.0) {
                    return Err(invalid("eps", "0 <= eps < 1"));
                }
                if let Some(r) = safe_radius {
                    if !(*r > 0.0) {
                        return Err(invalid("safeRadius", "safeRadius > 0"));
                    }
                }
                Ok(())
            }
            MetricModel::BerwaldProduct { factor, drift } => {
                match factor.as_ref() {
                    MetricModel::Euclidean { .. }
                    | MetricModel::RoundSphere { .. }
                    | MetricModel::PoincareBall { .. } => factor.validate()?,
                    _ => {
                        return Err(invalid(
                            "factor",
                            "factor must be euclidean, roundSphere or poincareBall",
                        ))
                    }
                }
                dim_ok(self.dim())?;
                if !(drift.abs() < 1.0) {
                    return Err(invalid("drift", "|drift| < 1"));
                }
                Ok(())
            }
            MetricModel::ReversibleQuartic { dim, eps } => {
                dim_ok(*dim)?;
                if !(*eps >= 0.0 && *eps <= 0.25) {
                    return Err(invalid("eps", "0 <= eps <= 0.25"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            MetricModel::Euclidean { dim }
            | MetricModel::RoundSphere { dim, .. }
            | MetricModel::PoincareBall { dim, .. }
            | MetricModel::ReversibleQuartic { dim, .. } => *dim,
            MetricModel::RandersFlat { b } => b.len(),
            MetricModel::RandersPerturbed { base, .. } => match base {
                PerturbedBase::Flat { dim } | PerturbedBase::Sphere { dim, .. } => *dim,
            },
            MetricModel::BerwaldProduct { factor, .. } => factor.dim() + 1,
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            MetricModel::Euclidean { dim } => format!("euclidean(n={dim})"),
            MetricModel::RoundSphere { dim, radius } => format!("roundSphere(n={dim},r0={radius})"),
            MetricModel::PoincareBall { dim, k } => format!("poincareBall(n={dim},k={k})"),
            MetricModel::RandersFlat { b } => format!("randersFlat(b={b:?})"),
            MetricModel::RandersPerturbed { base, eps, .. } => match base {
                PerturbedBase::Flat { dim } => format!("randersPerturbed(flat,n={dim},eps={eps})"),
                PerturbedBase::Sphere { dim, radius } => {
                    format!("randersPerturbed(sphere,n={dim},r0={radius},eps={eps})")
                }
            },
            MetricModel::BerwaldProduct { factor, drift } => {
                format!("berwaldProduct({}xR,c={drift})", factor.id())
            }
            MetricModel::ReversibleQuartic { dim, eps } => format!("reversibleQuartic(n={dim},eps={eps})"),
        }
    }

    /// Radius of the sphere factor when the model lives on a sphere.
    fn sphere_radius(&self) -> Option<f64> {
        match self {
            MetricModel::RoundSphere { radius, .. } => Some(*radius),
            MetricModel::RandersPerturbed {
                base: PerturbedBase::Sphere { radius, .. },
                ..
            } => Some(*radius),
            MetricModel::BerwaldProduct { factor, .. } => factor.sphere_radius(),
            _ => None,
        }
    }

    /// Number of leading coordinates that belong to a sphere factor.
    fn sphere_block(&self) -> usize {
        match self {
            MetricModel::BerwaldProduct { factor, .. } => factor.dim(),
            _ => self.dim(),
        }
    }

    pub fn num_charts(&self) -> usize {
        if self.sphere_radius().is_some() {
            2
        } else {
            1
        }
    }

    pub fn is_riemannian(&self) -> bool {
        match self {
            MetricModel::Euclidean { .. }
            | MetricModel::RoundSphere { .. }
            | MetricModel::PoincareBall { .. } => true,
            MetricModel::RandersFlat { b } => b.iter().all(|v| *v == 0.0),
            MetricModel::RandersPerturbed { eps, .. } => *eps == 0.0,
            MetricModel::BerwaldProduct { drift, .. } => *drift == 0.0,
            MetricModel::ReversibleQuartic { eps, .. } => *eps == 0.0,
        }
    }

    /// Whether the family is Berwald by construction.
    pub fn is_berwald(&self) -> bool {
        match self {
            MetricModel::RandersPerturbed { eps, .. } => *eps == 0.0,
            _ => true,
        }
    }

    pub fn is_reversible(&self) -> bool {
        match self {
            MetricModel::Euclidean { .. }
            | MetricModel::RoundSphere { .. }
            | MetricModel::PoincareBall { .. }
            | MetricModel::ReversibleQuartic { .. } => true,
            _ => self.is_riemannian(),
        }
    }

    pub fn is_compact(&self) -> bool {
        matches!(
            self,
            MetricModel::RoundSphere { .. }
                | MetricModel::RandersPerturbed {
                    base: PerturbedBase::Sphere { .. },
                    ..
                }
        )
    }

    /// Whether `F` does not depend on the base point.
    pub fn is_minkowski(&self) -> bool {
        matches!(
            self,
            MetricModel::Euclidean { .. } | MetricModel::RandersFlat { .. } | MetricModel::ReversibleQuartic { .. }
        ) || matches!(self, MetricModel::BerwaldProduct { factor, .. } if matches!(factor.as_ref(), MetricModel::Euclidean { .. }))
    }

    /// Conservative bound below which every geodesic from any point is
    /// minimizing.
    pub fn safe_radius(&self) -> f64 {
        match self {
            MetricModel::RoundSphere { radius, .. } => PI * radius - SPHERE_RADIUS_MARGIN,
            MetricModel::RandersPerturbed { base, safe_radius, .. } => {
                let r0 = match base {
                    PerturbedBase::Sphere { radius, .. } => *radius,
                    PerturbedBase::Flat { .. } => 1.0,
                };
                safe_radius.unwrap_or(0.5 * (PI * r0 - SPHERE_RADIUS_MARGIN))
            }
            MetricModel::BerwaldProduct { factor, drift } => match factor.as_ref() {
                MetricModel::RoundSphere { radius, .. } => {
                    (1.0 - drift.abs()) * PI * radius - SPHERE_RADIUS_MARGIN
                }
                _ => f64::INFINITY,
            },
            _ => f64::INFINITY,
        }
    }

    /// Chart-validity predicate.
    pub fn in_chart(&self, chart: usize, x: &[f64]) -> bool {
        if x.len() != self.dim() || chart >= self.num_charts() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            MetricModel::PoincareBall { .. } => x.iter().map(|v| v * v).sum::<f64>() < 1.0,
            MetricModel::BerwaldProduct { factor, .. } => {
                factor.in_chart(chart, &x[..factor.dim()])
            }
            _ => true,
        }
    }

    pub fn check_point(&self, chart: usize, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.in_chart(chart, x) {
            return Err(FinslerError::ChartViolation {
                model: self.id(),
                point: x.to_vec(),
            });
        }
        Ok(())
    }

    pub fn check_sample(&self, s: &TangentSample) -> Result<()> {
        self.check_point(s.chart, &s.x)?;
        if s.y.len() != self.dim() {
            return Err(FinslerError::DimensionMismatch {
                expected: self.dim(),
                got: s.y.len(),
            });
        }
        if s.y.iter().all(|v| *v == 0.0) {
            return Err(FinslerError::DegenerateDirection);
        }
        Ok(())
    }

    /// Chart change to apply when `x` has drifted into the badly conditioned
    /// part of a sphere chart.
    pub fn chart_switch(&self, chart: usize, x: &[f64]) -> Option<ChartTransition> {
        self.sphere_radius()?;
        let m = self.sphere_block();
        let s: f64 = x[..m].iter().map(|v| v * v).sum();
        if s.sqrt() <= CHART_SWITCH_RADIUS {
            return None;
        }
        let inner = inversion(&x[..m]);
        let n = x.len();
        let mut jac = DMatrix::identity(n, n);
        let mut hess = vec![DMatrix::zeros(n, n); n];
        let mut nx = x.to_vec();
        for i in 0..m {
            nx[i] = inner.x[i];
            for j in 0..m {
                jac[(i, j)] = inner.jac[(i, j)];
                for k in 0..m {
                    hess[i][(j, k)] = inner.hess[i][(j, k)];
                }
            }
        }
        Some(ChartTransition {
            chart: 1 - chart,
            x: nx,
            jac,
            hess,
        })
    }

    /// Expresses a point in the preferred chart (sphere points with
    /// `|x| > 1` move to the other chart).
    pub fn normalize_point(&self, p: &ChartPoint) -> ChartPoint {
        if self.sphere_radius().is_none() {
            return p.clone();
        }
        let m = self.sphere_block();
        let s: f64 = p.x[..m].iter().map(|v| v * v).sum();
        if s <= 1.0 {
            return p.clone();
        }
        let mut x = p.x.clone();
        for v in &mut x[..m] {
            *v /= s;
        }
        ChartPoint::new(1 - p.chart, x)
    }

    /// Expresses `p` in the requested chart when possible.
    pub fn to_chart(&self, p: &ChartPoint, chart: usize) -> Option<ChartPoint> {
        if p.chart == chart {
            return Some(p.clone());
        }
        self.sphere_radius()?;
        let m = self.sphere_block();
        let s: f64 = p.x[..m].iter().map(|v| v * v).sum();
        if s == 0.0 {
            return None;
        }
        let mut x = p.x.clone();
        for v in &mut x[..m] {
            *v /= s;
        }
        Some(ChartPoint::new(chart, x))
    }

    /// Expresses a point and a tangent vector at it in the requested chart.
    pub fn tangent_to_chart(&self, p: &ChartPoint, v: &[f64], chart: usize) -> Option<(ChartPoint, Vec<f64>)> {
        if p.chart == chart {
            return Some((p.clone(), v.to_vec()));
        }
        let q = self.to_chart(p, chart)?;
        // The inversion x ↦ x/|x|² has differential (|x|² I − 2 x xᵀ)/|x|⁴.
        let m = self.sphere_block();
        let s: f64 = p.x[..m].iter().map(|a| a * a).sum();
        let xv: f64 = p.x[..m].iter().zip(v).map(|(a, b)| a * b).sum();
        let mut w = v.to_vec();
        for i in 0..m {
            w[i] = (v[i] * s - 2.0 * p.x[i] * xv) / (s * s);
        }
        Some((q, w))
    }

    /// Euclidean embedding of a point (sphere factors go to `ℝ^{m+1}`);
    /// chart-free representation used for comparisons.
    pub fn embed(&self, p: &ChartPoint) -> Vec<f64> {
        match self.sphere_radius() {
            None => p.x.clone(),
            Some(r0) => {
                let m = self.sphere_block();
                let mut e = sphere_embed(p.chart, &p.x[..m], r0);
                e.extend_from_slice(&p.x[m..]);
                e
            }
        }
    }

    /// Jacobian `∂(embed)/∂x` at a point.
    pub fn embed_jacobian(&self, p: &ChartPoint) -> DMatrix<f64> {
        let n = self.dim();
        match self.sphere_radius() {
            None => DMatrix::identity(n, n),
            Some(r0) => {
                let m = self.sphere_block();
                let x = &p.x[..m];
                let s: f64 = x.iter().map(|v| v * v).sum();
                let d = 1.0 + s;
                let sign = if p.chart == 0 { 1.0 } else { -1.0 };
                let mut jac = DMatrix::zeros(n + 1, n);
                for i in 0..m {
                    for j in 0..m {
                        let dij = if i == j { 1.0 } else { 0.0 };
                        jac[(i, j)] = r0 * (2.0 * dij / d - 4.0 * x[i] * x[j] / (d * d));
                    }
                }
                for j in 0..m {
                    jac[(m, j)] = sign * r0 * 4.0 * x[j] / (d * d);
                }
                for t in m..n {
                    jac[(t + 1, t)] = 1.0;
                }
                jac
            }
        }
    }

    /// Inverse of [`MetricModel::embed`].
    pub fn from_embedded(&self, e: &[f64]) -> ChartPoint {
        match self.sphere_radius() {
            None => ChartPoint::new(0, e.to_vec()),
            Some(r0) => {
                let m = self.sphere_block();
                let mut p = sphere_chart_of(&e[..m + 1], r0);
                p.x.extend_from_slice(&e[m + 1..]);
                p
            }
        }
    }

    /// `F²(x, y)` evaluated on any scalar type.
    pub fn f2<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        match self {
            MetricModel::Euclidean { .. } => norm2(y),
            MetricModel::RoundSphere { radius, .. } => {
                let s = norm2(x);
                let d = (s + 1.0).recip();
                norm2(y) * (d.clone() * d) * (4.0 * radius * radius)
            }
            MetricModel::PoincareBall { k, .. } => {
                let s = norm2(x);
                let d = (-s + 1.0).recip();
                norm2(y) * (d.clone() * d) * (4.0 / (k * k))
            }
            MetricModel::RandersFlat { b } => {
                let mut beta = y[0].clone() * b[0];
                for i in 1..y.len() {
                    beta = beta + y[i].clone() * b[i];
                }
                (norm2(y).sqrt() + beta).square()
            }
            MetricModel::RandersPerturbed { base, eps, .. } => match base {
                PerturbedBase::Sphere { radius, .. } => {
                    let s = norm2(x);
                    let d = (s + 1.0).recip();
                    let alpha = norm2(y).sqrt() * d.clone() * (2.0 * radius);
                    let rot = x[0].clone() * y[1].clone() - x[1].clone() * y[0].clone();
                    let beta = rot * (d.clone() * d) * (4.0 * eps * radius);
                    (alpha + beta).square()
                }
                PerturbedBase::Flat { dim } => {
                    let n = *dim;
                    let c = eps / (n as f64).sqrt();
                    let mut beta = x[1 % n].clone().sin() * y[0].clone() * c;
                    for i in 1..n {
                        beta = beta + x[(i + 1) % n].clone().sin() * y[i].clone() * c;
                    }
                    (norm2(y).sqrt() + beta).square()
                }
            },
            MetricModel::BerwaldProduct { factor, drift } => {
                let m = factor.dim();
                let a2 = factor.f2(&x[..m], &y[..m]) + y[m].clone() * y[m].clone();
                (a2.sqrt() + y[m].clone() * *drift).square()
            }
            MetricModel::ReversibleQuartic { eps, .. } => {
                let r2 = norm2(y);
                let mut q = y[0].clone().square().square();
                for t in &y[1..] {
                    q = q + t.clone().square().square();
                }
                r2.clone() + q / r2 * *eps
            }
        }
    }

    /// `F(x, y)`.
    pub fn eval(&self, s: &TangentSample) -> Result<f64> {
        self.check_sample(s)?;
        Ok(self.f(&s.x, &s.y))
    }

    /// Unchecked `F(x, y)`.
    pub fn f(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f2(x, y).max(0.0).sqrt()
    }

    /// Riemannian part `a_ij` and one-form `b_i` when `F = α + β`.
    pub fn randers_parts(&self, x: &[f64]) -> Option<(DMatrix<f64>, Vec<f64>)> {
        let n = x.len();
        match self {
            MetricModel::RandersFlat { b } => Some((DMatrix::identity(n, n), b.clone())),
            MetricModel::RandersPerturbed { base, eps, .. } => match base {
                PerturbedBase::Sphere { radius, .. } => {
                    let s: f64 = x.iter().map(|v| v * v).sum();
                    let d = 1.0 / (1.0 + s);
                    let a = DMatrix::identity(n, n) * (2.0 * radius * d).powi(2);
                    let c = 4.0 * eps * radius * d * d;
                    let mut b = vec![0.0; n];
                    b[0] = -c * x[1];
                    b[1] = c * x[0];
                    Some((a, b))
                }
                PerturbedBase::Flat { .. } => {
                    let c = eps / (n as f64).sqrt();
                    Some((DMatrix::identity(n, n), (0..n).map(|i| c * x[(i + 1) % n].sin()).collect()))
                }
            },
            MetricModel::BerwaldProduct { factor, drift } => {
                let m = factor.dim();
                let mut e = vec![0.0; m];
                e[0] = 1.0;
                let gf = factor.g_matrix(&x[..m], &e);
                let mut a = DMatrix::identity(n, n);
                a.view_mut((0, 0), (m, m)).copy_from(&gf);
                let mut b = vec![0.0; n];
                b[m] = *drift;
                Some((a, b))
            }
            _ => None,
        }
    }

    /// Conformal factor `φ` with `F = e^φ |y|`, plus its gradient and
    /// Hessian, for conformally flat Riemannian families.
    pub fn conformal(&self, x: &[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)> {
        let n = x.len();
        let s: f64 = x.iter().map(|v| v * v).sum();
        match self {
            MetricModel::Euclidean { .. } => Some((0.0, vec![0.0; n], DMatrix::zeros(n, n))),
            MetricModel::RoundSphere { radius, .. } => {
                let d = 1.0 + s;
                let grad = x.iter().map(|v| -2.0 * v / d).collect();
                let hess = DMatrix::from_fn(n, n, |i, k| {
                    let dik = if i == k { 1.0 } else { 0.0 };
                    -2.0 * dik / d + 4.0 * x[i] * x[k] / (d * d)
                });
                Some(((2.0 * radius / d).ln(), grad, hess))
            }
            MetricModel::PoincareBall { k, .. } => {
                let d = 1.0 - s;
                let grad = x.iter().map(|v| 2.0 * v / d).collect();
                let hess = DMatrix::from_fn(n, n, |i, j| {
                    let dij = if i == j { 1.0 } else { 0.0 };
                    2.0 * dij / d + 4.0 * x[i] * x[j] / (d * d)
                });
                Some(((2.0 / (k * d)).ln(), grad, hess))
            }
            _ => None,
        }
    }

    /// Jet of `F²` in `(x, y)` of the given total degree.
    pub fn metric_jet(&self, s: &TangentSample, degree: usize) -> Result<MetricJet> {
        self.check_sample(s)?;
        Ok(MetricJet {
            dim: self.dim(),
            jet: self.f2_jet(&s.x, &s.y, degree),
        })
    }

    pub(crate) fn f2_jet(&self, x: &[f64], y: &[f64], degree: usize) -> Jet {
        let mut point = x.to_vec();
        point.extend_from_slice(y);
        let vars = Jet::variables(&point, degree);
        let n = x.len();
        self.f2(&vars[..n], &vars[n..])
    }

    /// Jet of `F²` in `y` only, at fixed `x`.
    pub(crate) fn f2_y_jet(&self, x: &[f64], y: &[f64], degree: usize) -> Jet {
        let n = y.len();
        let xs: Vec<Jet> = x.iter().map(|&v| Jet::constant(n, degree, v)).collect();
        let ys = Jet::variables(y, degree);
        self.f2(&xs, &ys)
    }

    /// `g_ij(x, y) = ½ ∂²F²/∂y^i∂y^j` without validation.
    pub fn g_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let n = y.len();
        if let Some((phi, _, _)) = self.conformal(x) {
            return DMatrix::identity(n, n) * (2.0 * phi).exp();
        }
        let jet = self.f2_y_jet(x, y, 2);
        let mut e = vec![0u8; n];
        DMatrix::from_fn(n, n, |i, j| {
            e.iter_mut().for_each(|v| *v = 0);
            e[i] += 1;
            e[j] += 1;
            0.5 * jet.partial(&e)
        })
    }

    /// Fundamental tensor, its inverse and the Cartan tensor.
    pub fn fundamental_tensor(&self, s: &TangentSample) -> Result<TensorAtPoint> {
        self.check_sample(s)?;
        let n = self.dim();
        let jet = self.f2_y_jet(&s.x, &s.y, 3);
        let f = jet.value().sqrt();
        let mut e = vec![0u8; n];
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                e.iter_mut().for_each(|v| *v = 0);
                e[i] += 1;
                e[j] += 1;
                g[(i, j)] = 0.5 * jet.partial(&e);
            }
        }
        let mut cartan = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    e.iter_mut().for_each(|v| *v = 0);
                    e[i] += 1;
                    e[j] += 1;
                    e[k] += 1;
                    cartan[(i * n + j) * n + k] = 0.25 * f * jet.partial(&e);
                }
            }
        }
        let g_inverse = match g.clone().cholesky() {
            Some(c) => c.inverse(),
            None => {
                return Err(FinslerError::NotPositiveDefinite {
                    x: s.x.clone(),
                    y: s.y.clone(),
                })
            }
        };
        Ok(TensorAtPoint {
            sample: s.clone(),
            g,
            g_inverse,
            cartan,
        })
    }

    /// Cartan tensor `A_ijk = (F/4) ∂³F²/∂y^i∂y^j∂y^k`.
    pub fn cartan_tensor(&self, s: &TangentSample) -> Result<Vec<f64>> {
        Ok(self.fundamental_tensor(s)?.cartan)
    }

    /// Deterministic points spread over the model (both charts for sphere
    /// families), used as evaluation regions.
    pub fn spread_points(&self, count: usize) -> Vec<ChartPoint> {
        let n = self.dim();
        let golden = (1.0 + 5.0f64.sqrt()) / 2.0;
        let quasi = |i: usize, j: usize| -> f64 {
            // Kronecker sequence with irrational steps per coordinate.
            let alpha = (golden * (j as f64 + 1.0)).fract() + (2.0f64.sqrt() * (j as f64 + 1.0)).fract();
            ((i as f64 + 0.5) * alpha).fract()
        };
        match self.sphere_radius() {
            Some(r0) if !matches!(self, MetricModel::BerwaldProduct { .. }) => {
                // Fibonacci-type points on the sphere.
                (0..count)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                        let mut e = vec![0.0; n + 1];
                        let rad = (1.0 - z * z).max(0.0).sqrt();
                        if n == 2 {
                            let phi = 2.0 * PI * (i as f64 / golden).fract();
                            e[0] = rad * phi.cos();
                            e[1] = rad * phi.sin();
                        } else {
                            let dir: Vec<f64> = (0..n).map(|j| 2.0 * quasi(i, j) - 1.0).collect();
                            let nd = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                            for j in 0..n {
                                e[j] = rad * dir[j] / nd;
                            }
                        }
                        e[n] = z;
                        let e: Vec<f64> = e.iter().map(|v| v * r0).collect();
                        self.from_embedded(&e)
                    })
                    .collect()
            }
            _ => {
                let scale = match self {
                    MetricModel::PoincareBall { .. } => 0.7,
                    MetricModel::BerwaldProduct { factor, .. }
                        if matches!(factor.as_ref(), MetricModel::PoincareBall { .. }) =>
                    {
                        0.7
                    }
                    _ => 1.0,
                };
                (0..count)
                    .map(|i| {
                        if i == 0 {
                            return ChartPoint::origin(n);
                        }
                        let mut x: Vec<f64> = (0..n).map(|j| 2.0 * quasi(i, j) - 1.0).collect();
                        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if r > 1.0 {
                            x.iter_mut().for_each(|v| *v /= r);
                        }
                        if let MetricModel::BerwaldProduct { factor, .. } = self {
                            if matches!(factor.as_ref(), MetricModel::RoundSphere { .. }) {
                                return ChartPoint::new(0, x);
                            }
                        }
                        ChartPoint::new(0, x.iter().map(|v| v * scale).collect())
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randers(b: &[f64]) -> MetricModel {
        MetricModel::RandersFlat { b: b.to_vec() }
    }

    #[test]
    fn evaluates_closed_forms() {
        let e = MetricModel::Euclidean { dim: 2 };
        assert_eq!(e.eval(&TangentSample::new(vec![0.0, 0.0], vec![3.0, 4.0])).unwrap(), 5.0);
        let r = randers(&[0.5, 0.0]);
        let f = |y: Vec<f64>| r.eval(&TangentSample::new(vec![0.0, 0.0], y)).unwrap();
        assert!((f(vec![1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!((f(vec![-1.0, 0.0]) - 0.5).abs() < 1e-15);
        let s = MetricModel::RoundSphere { dim: 2, radius: 1.0 };
        assert!((s.eval(&TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_samples() {
        let p = MetricModel::PoincareBall { dim: 2, k: 1.0 };
        assert!(matches!(
            p.eval(&TangentSample::new(vec![1.0, 0.5], vec![1.0, 0.0])),
            Err(FinslerError::ChartViolation { .. })
        ));
        assert!(matches!(
            p.eval(&TangentSample::new(vec![0.0, 0.0], vec![0.0, 0.0])),
            Err(FinslerError::DegenerateDirection)
        ));
        assert!(randers(&[0.9, 0.5]).validate().is_err());
    }

    #[test]
    fn euler_identity_and_cartan_contraction() {
        let r = randers(&[0.5, 0.0]);
        let s = TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let t = r.fundamental_tensor(&s).unwrap();
        let gyy = t.g[(0, 0)];
        assert!((gyy - 2.25).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let c: f64 = (0..2).map(|k| t.cartan(i, j, k) * s.y[k]).sum();
                assert!(c.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_charts_agree_on_embedding() {
        let s = MetricModel::RoundSphere { dim: 3, radius: 2.0 };
        let p = ChartPoint::new(0, vec![0.3, -1.2, 0.4]);
        let e = s.embed(&p);
        assert!((e.iter().map(|v| v * v).sum::<f64>().sqrt() - 2.0).abs() < 1e-14);
        let q = s.to_chart(&p, 1).unwrap();
        let e2 = s.embed(&q);
        for (a, b) in e.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-14);
        }
        let back = s.from_embedded(&e);
        assert_eq!(back, s.normalize_point(&p));
    }

    #[test]
    fn serde_round_trip() {
        let m = MetricModel::BerwaldProduct {
            factor: Box::new(MetricModel::RoundSphere { dim: 2, radius: 1.0 }),
            drift: 0.3,
        };
        let text = serde_json::to_string(&m).unwrap();
        let back: MetricModel = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }
}

//! Geodesics, parallel frames, Jacobi fields, distances, forward balls and
//! the second-variation index form.
//!
//! The flow integrates `ẋ = v`, `v̇ = −2G(x, v)` together with optional
//! parallel vectors (`Ė = −N(x, v)E`) and Jacobi fields
//! (`J̈ = −2(∂G/∂x·J + ∂G/∂y·J̇)`), switching sphere charts between steps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::connection::{flag_operator, orthonormal_complement, spray, spray_generic};
use crate::error::{invalid, FinslerError, Result};
use crate::indicatrix::{angle_grid, direction_grid, nu_density, quad};
use crate::models::{unit_direction, ChartPoint, MetricModel, TangentSample};
use crate::ode::{dopri_step, hermite, initial_step, next_step, OdeOptions};
use crate::quadrature::gauss_legendre_on;
use crate::rng::stream;

/// Integrator settings for geodesic flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeodesicOptions {
    /// Absolute and relative local error tolerance.
    pub tol: f64,
    /// Upper bound on the step as a fraction of the time span.
    pub max_step_fraction: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            tol: 1e-10,
            max_step_fraction: 0.125,
        }
    }
}

impl GeodesicOptions {
    pub fn with_tol(tol: f64) -> Self {
        GeodesicOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Extra fields transported along the geodesic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowSpec {
    /// Initial vectors of parallel fields.
    pub frames: Vec<Vec<f64>>,
    /// Initial `(J, J̇)` of Jacobi fields.
    pub jacobi: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Accepted integration node. `state` is `[x, v, E_1.., (J_1, J̇_1)..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathNode {
    pub t: f64,
    pub chart: usize,
    pub state: Vec<f64>,
    pub deriv: Vec<f64>,
}

impl PathNode {
    pub fn x(&self, n: usize) -> &[f64] {
        &self.state[..n]
    }

    pub fn v(&self, n: usize) -> &[f64] {
        &self.state[n..2 * n]
    }

    pub fn point(&self, n: usize) -> ChartPoint {
        ChartPoint::new(self.chart, self.state[..n].to_vec())
    }
}

/// Numerically integrated constant-speed geodesic, stored as chart segments.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub dim: usize,
    pub tol: f64,
    pub initial: TangentSample,
    pub frames: usize,
    pub jacobi: usize,
    /// Consecutive segments share their boundary time; each lives in one
    /// chart.
    pub segments: Vec<Vec<PathNode>>,
}

impl GeodesicPath {
    /// Nodes in time order, boundary duplicates removed (the later chart
    /// wins).
    pub fn nodes(&self) -> Vec<&PathNode> {
        let mut out: Vec<&PathNode> = Vec::new();
        for seg in &self.segments {
            for node in seg {
                if let Some(last) = out.last() {
                    if last.t == node.t {
                        out.pop();
                    }
                }
                out.push(node);
            }
        }
        out
    }

    pub fn start(&self) -> &PathNode {
        &self.segments[0][0]
    }

    pub fn end(&self) -> &PathNode {
        self.segments.last().unwrap().last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        self.end().t - self.start().t
    }

    /// Initial speed `F(x₀, v₀)`.
    pub fn speed(&self, model: &MetricModel) -> f64 {
        model.f(&self.initial.x, &self.initial.y)
    }

    pub fn length(&self, model: &MetricModel) -> f64 {
        self.speed(model) * self.duration().abs()
    }

    /// Largest relative deviation of `F(x, v)` from its initial value.
    pub fn speed_drift(&self, model: &MetricModel) -> f64 {
        let f0 = self.speed(model);
        self.nodes()
            .iter()
            .map(|node| (model.f(node.x(self.dim), node.v(self.dim)) - f0).abs() / f0)
            .fold(0.0, f64::max)
    }

    /// Parallel vector `a` at a node.
    pub fn frame<'a>(&self, node: &'a PathNode, a: usize) -> &'a [f64] {
        let n = self.dim;
        &node.state[(2 + a) * n..(3 + a) * n]
    }

    /// Jacobi field `a` and its derivative at a node.
    pub fn jacobi_field<'a>(&self, node: &'a PathNode, a: usize) -> (&'a [f64], &'a [f64]) {
        let n = self.dim;
        let base = (2 + self.frames + 2 * a) * n;
        (&node.state[base..base + n], &node.state[base + n..base + 2 * n])
    }

    /// Dense output at time `t` (cubic Hermite inside a step).
    pub fn state_at(&self, t: f64) -> (usize, Vec<f64>) {
        let forward = self.duration() >= 0.0;
        for seg in &self.segments {
            for w in seg.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let inside = if forward {
                    t >= a.t && t <= b.t
                } else {
                    t <= a.t && t >= b.t
                };
                if inside {
                    return (a.chart, hermite(a.t, &a.state, &a.deriv, b.t, &b.state, &b.deriv, t));
                }
            }
        }
        let end = self.end();
        (end.chart, end.state.clone())
    }
}

fn flow_rhs(
    model: &MetricModel,
    chart: usize,
    n: usize,
    frames: usize,
    jacobi: usize,
    state: &[f64],
) -> Result<Vec<f64>> {
    let x = &state[..n];
    let v = &state[n..2 * n];
    if !model.in_chart(chart, x) {
        return Err(FinslerError::ChartExit { t: f64::NAN });
    }
    let need = frames + jacobi > 0;
    let sp = if need {
        spray(model, x, v)?
    } else if model.is_minkowski() || model.conformal(x).is_some() || matches!(model, MetricModel::BerwaldProduct { .. }) {
        spray(model, x, v)?
    } else {
        spray_generic(model, x, v, false)?
    };
    let mut out = Vec::with_capacity(state.len());
    out.extend_from_slice(v);
    out.extend(sp.g.iter().map(|g| -2.0 * g));
    for a in 0..frames {
        let e = &state[(2 + a) * n..(3 + a) * n];
        for i in 0..n {
            out.push(-(0..n).map(|j| sp.dy[(i, j)] * e[j]).sum::<f64>());
        }
    }
    for a in 0..jacobi {
        let base = (2 + frames + 2 * a) * n;
        let j = &state[base..base + n];
        let jd = &state[base + n..base + 2 * n];
        out.extend_from_slice(jd);
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += sp.dx[(i, k)] * j[k] + sp.dy[(i, k)] * jd[k];
            }
            out.push(-2.0 * acc);
        }
    }
    Ok(out)
}

fn switch_state(model: &MetricModel, chart: usize, n: usize, frames: usize, jacobi: usize, state: &[f64]) -> Option<(usize, Vec<f64>)> {
    let tr = model.chart_switch(chart, &state[..n])?;
    let v = &state[n..2 * n];
    let mut out = tr.x.clone();
    out.extend(tr.vector(v));
    for a in 0..frames {
        out.extend(tr.vector(&state[(2 + a) * n..(3 + a) * n]));
    }
    for a in 0..jacobi {
        let base = (2 + frames + 2 * a) * n;
        let j = &state[base..base + n];
        let jd = &state[base + n..base + 2 * n];
        out.extend(tr.vector(j));
        out.extend(tr.variation_rate(v, j, jd));
    }
    Some((tr.chart, out))
}

/// Integrates the geodesic flow with attached fields from `t = 0` to
/// `t_end` (either sign), landing exactly on each time in `stops`.
pub fn integrate_flow(
    model: &MetricModel,
    s: &TangentSample,
    t_end: f64,
    opts: &GeodesicOptions,
    spec: &FlowSpec,
    stops: &[f64],
) -> Result<GeodesicPath> {
    model.check_sample(s)?;
    if !(opts.tol >= 1e-12 && opts.tol <= 1e-4) {
        return Err(invalid("tol", "1e-12 <= tol <= 1e-4"));
    }
    if !t_end.is_finite() || t_end == 0.0 {
        return Err(invalid("T", "T must be finite and nonzero"));
    }
    let n = model.dim();
    let frames = spec.frames.len();
    let jacobi = spec.jacobi.len();
    let mut state = s.x.clone();
    state.extend_from_slice(&s.y);
    for e in &spec.frames {
        state.extend_from_slice(e);
    }
    for (j, jd) in &spec.jacobi {
        state.extend_from_slice(j);
        state.extend_from_slice(jd);
    }
    let mut chart = s.chart;
    // Start in the well-conditioned chart.
    if let Some((c, st)) = switch_state(model, chart, n, frames, jacobi, &state) {
        chart = c;
        state = st;
    }
    let ode = OdeOptions {
        rtol: opts.tol,
        atol: opts.tol,
        h_max: opts.max_step_fraction * t_end.abs(),
    };
    let dir = t_end.signum();
    let mut targets: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&t| t * dir > 0.0 && (t_end - t) * dir > 0.0)
        .collect();
    targets.push(t_end);
    targets.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    targets.dedup();

    let deriv = flow_rhs(model, chart, n, frames, jacobi, &state)?;
    let mut segments = vec![vec![PathNode {
        t: 0.0,
        chart,
        state,
        deriv,
    }]];
    let mut h = {
        let first = &segments[0][0];
        initial_step(&first.state, &first.deriv, t_end, &ode)
    };
    let mut t = 0.0;
    let mut last_err: Option<FinslerError> = None;
    for target in targets {
        while (target - t) * dir > 0.0 {
            let remaining = (target - t).abs();
            let hs = h.min(remaining).min(ode.h_max);
            let landing = hs >= remaining;
            let node = segments.last().unwrap().last().unwrap().clone();
            let mut rhs = |_t: f64, y: &[f64]| flow_rhs(model, node.chart, n, frames, jacobi, y);
            match dopri_step(&mut rhs, t, &node.state, &node.deriv, dir * hs, &ode) {
                Ok(trial) if trial.err <= 1.0 && model.in_chart(node.chart, &trial.y[..n]) => {
                    t = if landing { target } else { t + dir * hs };
                    if !landing {
                        h = next_step(hs, trial.err);
                    }
                    segments.last_mut().unwrap().push(PathNode {
                        t,
                        chart: node.chart,
                        state: trial.y.clone(),
                        deriv: trial.f,
                    });
                    if let Some((c, st)) = switch_state(model, node.chart, n, frames, jacobi, &trial.y) {
                        let d = flow_rhs(model, c, n, frames, jacobi, &st)?;
                        segments.push(vec![PathNode {
                            t,
                            chart: c,
                            state: st,
                            deriv: d,
                        }]);
                    }
                    last_err = None;
                }
                Ok(trial) => {
                    h = if trial.err.is_finite() && trial.err > 1.0 {
                        next_step(hs, trial.err)
                    } else {
                        0.25 * hs
                    };
                    if !trial.err.is_finite() || trial.err <= 1.0 {
                        last_err = Some(FinslerError::ChartExit { t });
                    }
                }
                Err(e) => {
                    h = 0.25 * hs;
                    last_err = Some(e);
                }
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(match last_err {
                    Some(FinslerError::ChartExit { .. }) => FinslerError::ChartExit { t },
                    Some(e @ FinslerError::NotPositiveDefinite { .. }) => e,
                    _ => FinslerError::StepUnderflow { t },
                });
            }
        }
    }
    Ok(GeodesicPath {
        dim: n,
        tol: opts.tol,
        initial: s.clone(),
        frames,
        jacobi,
        segments,
    })
}

/// Geodesic with initial data `s` on `[0, T]`.
pub fn integrate_geodesic(model: &MetricModel, s: &TangentSample, t_end: f64, opts: &GeodesicOptions) -> Result<GeodesicPath> {
    integrate_flow(model, s, t_end, opts, &FlowSpec::default(), &[])
}

/// `exp_p(v)`.
pub fn exp_map(model: &MetricModel, p: &ChartPoint, v: &[f64], opts: &GeodesicOptions) -> Result<ChartPoint> {
    if v.iter().all(|c| *c == 0.0) {
        return Ok(p.clone());
    }
    let path = integrate_geodesic(model, &TangentSample::at(p, v.to_vec()), 1.0, opts)?;
    Ok(model.normalize_point(&path.end().point(model.dim())))
}

/// `g_T`-orthonormal parallel frame along a geodesic.
#[derive(Debug, Clone)]
pub struct FrameField {
    /// Path carrying `n − 1` parallel vectors.
    pub path: GeodesicPath,
}

impl FrameField {
    /// Largest deviation of `g_T(E_α, E_β)` from `δ_αβ` and of
    /// `g_T(E_α, T)/F(T)` from 0 over all nodes.
    pub fn orthonormality_drift(&self, model: &MetricModel) -> f64 {
        let n = self.path.dim;
        let mut worst: f64 = 0.0;
        for node in self.path.nodes() {
            let x = node.x(n);
            let v = node.v(n);
            let g = model.g_matrix(x, v);
            let fv = quad(&g, v, v).sqrt();
            for a in 0..self.path.frames {
                let ea = self.path.frame(node, a);
                worst = worst.max((quad(&g, ea, v) / fv).abs());
                for b in 0..self.path.frames {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((quad(&g, ea, self.path.frame(node, b)) - target).abs());
                }
            }
        }
        worst
    }
}

/// Parallel transport of a `g_T`-orthonormal frame (Gram–Schmidt from the
/// coordinate axes) along the geodesic of `path`.
pub fn parallel_frame(model: &MetricModel, path: &GeodesicPath, opts: &GeodesicOptions) -> Result<FrameField> {
    let s = &path.initial;
    let g = model.g_matrix(&s.x, &s.y);
    let frames = orthonormal_complement(&g, &s.y);
    let spec = FlowSpec {
        frames,
        jacobi: vec![],
    };
    Ok(FrameField {
        path: integrate_flow(model, s, path.duration(), opts, &spec, &[])?,
    })
}

/// Parallel transport of arbitrary vectors along the geodesic with initial
/// data `s` on `[0, T]`; returns the endpoint and the transported vectors
/// in the endpoint's chart.
pub fn transport(
    model: &MetricModel,
    s: &TangentSample,
    t_end: f64,
    vectors: &[Vec<f64>],
    opts: &GeodesicOptions,
) -> Result<(ChartPoint, Vec<f64>, Vec<Vec<f64>>)> {
    let spec = FlowSpec {
        frames: vectors.to_vec(),
        jacobi: vec![],
    };
    let path = integrate_flow(model, s, t_end, opts, &spec, &[])?;
    let end = path.end();
    let n = model.dim();
    let out = (0..vectors.len()).map(|a| path.frame(end, a).to_vec()).collect();
    Ok((end.point(n), end.v(n).to_vec(), out))
}

/// How [`distance`] is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum DistanceMethod {
    /// Closed form when the family has one, shooting otherwise.
    #[default]
    Auto,
    Shooting,
}

/// Shooting settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DistanceOptions {
    pub method: DistanceMethod,
    /// Indicatrix multistarts besides the coordinate guesses.
    pub starts: usize,
    /// Endpoint residual (embedding coordinates) counted as converged.
    pub residual_tol: f64,
    pub max_newton: usize,
    pub geodesic: GeodesicOptions,
    /// Accept the first converged geodesic shorter than the safe radius
    /// (it is then the unique minimizer).
    pub accept_within_safe_radius: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            method: DistanceMethod::Auto,
            starts: 16,
            residual_tol: 1e-8,
            max_newton: 60,
            geodesic: GeodesicOptions::default(),
            accept_within_safe_radius: true,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Distance in closed form for families where it is known.
pub fn closed_form_distance(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Option<f64> {
    match model {
        MetricModel::Euclidean { .. } | MetricModel::RandersFlat { .. } | MetricModel::ReversibleQuartic { .. } => {
            let d: Vec<f64> = q.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
            if d.iter().all(|v| *v == 0.0) {
                return Some(0.0);
            }
            Some(model.f(&p.x, &d))
        }
        MetricModel::RoundSphere { radius, .. } => {
            let a = model.embed(p);
            let b = model.embed(q);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let cross = {
                // |a × b| via |a|²|b|² − (a·b)², stable through the difference.
                let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
                (norm(&diff) * norm(&sum)) / 2.0
            };
            Some(radius * cross.atan2(dot))
        }
        MetricModel::PoincareBall { k, .. } => {
            let d2: f64 = q.x.iter().zip(&p.x).map(|(a, b)| (a - b) * (a - b)).sum();
            let sp: f64 = p.x.iter().map(|v| v * v).sum();
            let sq: f64 = q.x.iter().map(|v| v * v).sum();
            let arg = 2.0 * d2 / ((1.0 - sp) * (1.0 - sq));
            // arcosh(1 + a) = ln(1 + a + sqrt(a(a + 2))), accurate for small a.
            Some((arg + (arg * (arg + 2.0)).sqrt()).ln_1p() / k)
        }
        MetricModel::BerwaldProduct { factor, drift } => {
            let m = factor.dim();
            let pf = ChartPoint::new(p.chart, p.x[..m].to_vec());
            let qf = model.to_chart(q, p.chart).unwrap_or_else(|| q.clone());
            let qf = ChartPoint::new(qf.chart, qf.x[..m].to_vec());
            let df = closed_form_distance(factor, &pf, &qf)?;
            let dt = q.x[m] - p.x[m];
            Some((df * df + dt * dt).sqrt() + drift * dt)
        }
        MetricModel::RandersPerturbed { .. } => None,
    }
}

/// Shooting result.
#[derive(Debug, Clone)]
pub struct MinimalGeodesic {
    pub length: f64,
    /// Initial data with `F(p, v) = length`, reaching `q` at `t = 1`.
    pub initial: TangentSample,
    pub residual: f64,
    pub converged_starts: usize,
}

fn pseudo_solve(jac: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let jt = jac.transpose();
    let normal = &jt * jac;
    let rhs = &jt * r;
    normal.lu().solve(&rhs)
}

fn shoot_once(
    model: &MetricModel,
    p: &ChartPoint,
    target: &[f64],
    v0: Vec<f64>,
    opts: &DistanceOptions,
    cap: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = model.dim();
    let jacobi: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            (vec![0.0; n], e)
        })
        .collect();
    let spec = FlowSpec { frames: vec![], jacobi };
    let evaluate = |v: &[f64]| -> Option<(DVector<f64>, DMatrix<f64>)> {
        if v.iter().all(|c| *c == 0.0) {
            return None;
        }
        let path = integrate_flow(model, &TangentSample::at(p, v.to_vec()), 1.0, &opts.geodesic, &spec, &[]).ok()?;
        let end = path.end();
        let endp = end.point(n);
        let e = model.embed(&endp);
        let r = DVector::from_iterator(e.len(), e.iter().zip(target).map(|(a, b)| a - b));
        let mut jm = DMatrix::zeros(n, n);
        for a in 0..n {
            let (j, _) = path.jacobi_field(end, a);
            for i in 0..n {
                jm[(i, a)] = j[i];
            }
        }
        Some((r, model.embed_jacobian(&endp) * jm))
    };
    let mut v = v0;
    let (mut r, mut jac) = evaluate(&v)?;
    for _ in 0..opts.max_newton {
        let rn = r.norm();
        if rn < opts.residual_tol {
            return Some((v, rn));
        }
        let delta = pseudo_solve(&jac, &r)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = v.iter().zip(delta.iter()).map(|(a, d)| a - alpha * d).collect();
            if model.f(&p.x, &trial) <= cap {
                if let Some((r2, j2)) = evaluate(&trial) {
                    if r2.norm() < rn {
                        v = trial;
                        r = r2;
                        jac = j2;
                        accepted = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    let rn = r.norm();
    (rn < opts.residual_tol).then_some((v, rn))
}

/// Initial-velocity guesses: coordinate difference in `p`'s chart and the
/// tangent of the embedded chord.
fn shooting_guesses(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if let Some(qq) = model.to_chart(q, p.chart) {
        let d: Vec<f64> = qq.x.iter().zip(&p.x).map(|(a, b)| a - b).collect();
        if d.iter().any(|v| *v != 0.0) && d.iter().all(|v| v.is_finite()) {
            out.push(d);
        }
    }
    if model.num_charts() > 1 {
        let a = model.embed(p);
        let b = model.embed(q);
        let jac = model.embed_jacobian(p);
        // Tangent at a toward b with the great-circle length for the sphere
        // factor; least-squares pull-back into chart coordinates.
        let chord = DVector::from_iterator(a.len(), b.iter().zip(&a).map(|(x, y)| x - y));
        if let Some(v) = pseudo_solve(&jac, &chord) {
            let v: Vec<f64> = v.iter().copied().collect();
            let len = model.f(&p.x, &v);
            if len > 0.0 {
                let target = closed_form_distance(model, p, q).unwrap_or(len);
                out.push(v.iter().map(|c| c * target / len).collect());
            }
        }
    }
    out
}

/// Minimal geodesic from `p` to `q` by shooting.
pub fn shoot(model: &MetricModel, p: &ChartPoint, q: &ChartPoint, opts: &DistanceOptions) -> Result<MinimalGeodesic> {
    model.check_point(p.chart, &p.x)?;
    model.check_point(q.chart, &q.x)?;
    let n = model.dim();
    let target = model.embed(q);
    if norm(&model.embed(p).iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>()) == 0.0 {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return Ok(MinimalGeodesic {
            length: 0.0,
            initial: TangentSample::at(p, e),
            residual: 0.0,
            converged_starts: 1,
        });
    }
    let guesses = shooting_guesses(model, p, q);
    let scale = guesses
        .iter()
        .map(|g| model.f(&p.x, g))
        .fold(f64::NAN, f64::min);
    let scale = if scale.is_finite() { scale } else { 1.0 };
    let safe = model.safe_radius();
    let cap = if safe.is_finite() { 2.5 * safe.max(scale) } else { 20.0 * scale.max(1.0) };
    let mut starts = guesses;
    if opts.starts > 0 {
        let m = (opts.starts as f64).powf(1.0 / (n - 1) as f64).ceil() as usize;
        let grid = direction_grid(n, m.max(2));
        let step = (grid.len() as f64 / opts.starts as f64).max(1.0);
        let mut k = 0.0;
        while (k as usize) < grid.len() && starts.len() < opts.starts + 2 {
            let th = unit_direction(&grid[k as usize]);
            let f = model.f(&p.x, &th);
            starts.push(th.iter().map(|c| c * scale / f).collect());
            k += step;
        }
    }
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut converged = 0;
    let mut best_residual = f64::INFINITY;
    for v0 in starts {
        if let Some((v, res)) = shoot_once(model, p, &target, v0, opts, cap) {
            converged += 1;
            let len = model.f(&p.x, &v);
            best_residual = best_residual.min(res);
            if best.as_ref().map_or(true, |b| len < b.0) {
                best = Some((len, v, res));
            }
            if opts.accept_within_safe_radius && len < safe {
                break;
            }
        }
    }
    match best {
        Some((length, v, residual)) => Ok(MinimalGeodesic {
            length,
            initial: TangentSample::at(p, v),
            residual,
            converged_starts: converged,
        }),
        None => Err(FinslerError::NoConvergence {
            residual: best_residual,
        }),
    }
}

/// Initial velocity of the minimal geodesic reaching `q` at `t = 1`, in
/// closed form: straight lines for Minkowski families, great circles for
/// round spheres, and their products with a line.
pub fn log_map(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Option<Vec<f64>> {
    if model.is_minkowski() {
        return Some(q.x.iter().zip(&p.x).map(|(a, b)| a - b).collect());
    }
    let sphere_like = match model {
        MetricModel::RoundSphere { .. } => true,
        MetricModel::BerwaldProduct { factor, .. } => matches!(factor.as_ref(), MetricModel::RoundSphere { .. }),
        _ => false,
    };
    if !sphere_like {
        return None;
    }
    let a = model.embed(p);
    let b = model.embed(q);
    // The sphere block is everything but the trailing line coordinate.
    let extra = match model {
        MetricModel::BerwaldProduct { .. } => 1,
        _ => 0,
    };
    let k = a.len() - extra;
    let r0 = norm(&a[..k]);
    let ah: Vec<f64> = a[..k].iter().map(|v| v / r0).collect();
    let bh: Vec<f64> = b[..k].iter().map(|v| v / norm(&b[..k])).collect();
    let c: f64 = ah.iter().zip(&bh).map(|(x, y)| x * y).sum();
    let w: Vec<f64> = bh.iter().zip(&ah).map(|(y, x)| y - c * x).collect();
    let wn = norm(&w);
    let theta = wn.atan2(c);
    let mut target: Vec<f64> = if wn > 0.0 {
        w.iter().map(|v| r0 * theta * v / wn).collect()
    } else {
        vec![0.0; k]
    };
    target.extend(b[k..].iter().zip(&a[k..]).map(|(y, x)| y - x));
    let jac = model.embed_jacobian(p);
    let v = pseudo_solve(&jac, &DVector::from_vec(target))?;
    Some(v.iter().copied().collect())
}

/// Minimal geodesic from `p` to `q`: closed-form initial data when
/// [`log_map`] applies and the method is `Auto`, shooting otherwise.
pub fn minimal_geodesic(model: &MetricModel, p: &ChartPoint, q: &ChartPoint, opts: &DistanceOptions) -> Result<MinimalGeodesic> {
    model.check_point(p.chart, &p.x)?;
    model.check_point(q.chart, &q.x)?;
    if opts.method == DistanceMethod::Auto {
        if let Some(v) = log_map(model, p, q) {
            let length = if v.iter().all(|c| *c == 0.0) { 0.0 } else { model.f(&p.x, &v) };
            return Ok(MinimalGeodesic {
                length,
                initial: TangentSample::at(p, v),
                residual: 0.0,
                converged_starts: 1,
            });
        }
    }
    shoot(model, p, q, opts)
}

/// Forward distance `d(p, q)`.
pub fn distance(model: &MetricModel, p: &ChartPoint, q: &ChartPoint, opts: &DistanceOptions) -> Result<f64> {
    model.check_point(p.chart, &p.x)?;
    model.check_point(q.chart, &q.x)?;
    if opts.method == DistanceMethod::Auto {
        if let Some(d) = closed_form_distance(model, p, q) {
            return Ok(d);
        }
    }
    Ok(shoot(model, p, q, opts)?.length)
}

/// A sampled point of a forward ball in polar coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallPoint {
    pub r: f64,
    /// Initial direction with `F(p, u) = 1`.
    pub direction: Vec<f64>,
    pub point: ChartPoint,
    /// `γ̇_u(r)` in the chart of `point`.
    pub velocity: Vec<f64>,
    /// Distortion `τ(γ̇_u(r))` when a measure is requested.
    pub tau: Option<f64>,
    /// Polar density `σ̂_p(r, u)` when requested.
    pub sigma_hat: Option<f64>,
    /// Importance weight `ν(S_pM)·R·σ̂`, so that the sample mean of
    /// `weight·f` estimates `∫_{B⁺_p(R)} f d𝔪`.
    pub weight: Option<f64>,
}

/// Seeded sample of `B⁺_p(R)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BallSample {
    pub radius: f64,
    /// `ν(S_pM)`.
    pub nu_total: f64,
    pub points: Vec<BallPoint>,
}

/// Rejection sampler for directions uniform with respect to `dν_p`.
pub struct IndicatrixSampler {
    n: usize,
    x: Vec<f64>,
    bound: f64,
    pub nu_total: f64,
}

impl IndicatrixSampler {
    pub fn new(model: &MetricModel, p: &ChartPoint) -> Self {
        let n = model.dim();
        let grid = angle_grid(n, 48);
        let mut bound: f64 = 0.0;
        let mut total = 0.0;
        for (angles, w) in &grid {
            let (_, _, _, _, nu) = nu_density(model, &p.x, angles);
            bound = bound.max(nu);
            total += w * nu;
        }
        IndicatrixSampler {
            n,
            x: p.x.clone(),
            bound: 1.1 * bound,
            nu_total: total,
        }
    }

    /// Draws a unit direction `u` (`F(p, u) = 1`).
    pub fn sample<R: Rng>(&self, model: &MetricModel, rng: &mut R) -> Vec<f64> {
        let m = self.n - 1;
        loop {
            let angles: Vec<f64> = (0..m)
                .map(|a| if a + 1 == m { 2.0 * PI * rng.gen::<f64>() } else { PI * rng.gen::<f64>() })
                .collect();
            let (_, _, u, _, nu) = nu_density(model, &self.x, &angles);
            if rng.gen::<f64>() * self.bound <= nu {
                return u;
            }
        }
    }
}

/// Jacobi fields `J_a` with `J_a(0) = 0`, `J̇_a(0) = e_a` for a
/// `g_u`-orthonormal basis `e_a` of the tangent space of `S_pM` at `u`.
pub fn polar_jacobi_spec(model: &MetricModel, p: &ChartPoint, u: &[f64]) -> FlowSpec {
    let g = model.g_matrix(&p.x, u);
    let n = u.len();
    FlowSpec {
        frames: vec![],
        jacobi: orthonormal_complement(&g, u)
            .into_iter()
            .map(|e| (vec![0.0; n], e))
            .collect(),
    }
}

/// `sqrt(det g_{γ̇}) · |det[γ̇, J_1, …, J_{n-1}]|` at a node, which equals
/// `e^{τ(γ̇)} σ̂_p(r, u)` for either measure.
pub fn volume_factor(model: &MetricModel, path: &GeodesicPath, node: &PathNode) -> f64 {
    let n = path.dim;
    let x = node.x(n);
    let v = node.v(n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, 0)] = v[i];
    }
    for a in 0..path.jacobi {
        let (j, _) = path.jacobi_field(node, a);
        for i in 0..n {
            m[(i, a + 1)] = j[i];
        }
    }
    model.g_matrix(x, v).determinant().sqrt() * m.determinant().abs()
}

/// Samples `count` points of `B⁺_p(R)`: directions uniform for `dν_p`,
/// radii stratified in `(0, R)`; with `density` the polar density and
/// importance weight of each point are attached.
pub fn forward_ball_sample(
    model: &MetricModel,
    p: &ChartPoint,
    radius: f64,
    count: usize,
    seed: u64,
    density: Option<crate::measures::MeasureKind>,
    opts: &GeodesicOptions,
) -> Result<BallSample> {
    model.check_point(p.chart, &p.x)?;
    let safe = model.safe_radius();
    if !(radius > 0.0) {
        return Err(invalid("R", "R > 0"));
    }
    if radius > safe {
        return Err(FinslerError::RadiusTooLarge { radius, bound: safe });
    }
    if count == 0 {
        return Err(invalid("count", "count >= 1"));
    }
    let sampler = IndicatrixSampler::new(model, p);
    let label = format!("ball:{}", model.id());
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = stream(seed, &label, i as u64);
        let r = radius * (i as f64 + rng.gen::<f64>()) / count as f64;
        let u = sampler.sample(model, &mut rng);
        let spec = if density.is_some() {
            polar_jacobi_spec(model, p, &u)
        } else {
            FlowSpec::default()
        };
        let path = integrate_flow(model, &TangentSample::at(p, u.clone()), r, opts, &spec, &[])?;
        let end = path.end();
        let endp = end.point(model.dim());
        let (tau, sigma_hat, weight) = match density {
            Some(kind) => {
                let tau = crate::measures::distortion_at(model, end.x(model.dim()), end.v(model.dim()), kind)?;
                let sh = volume_factor(model, &path, end) * (-tau).exp();
                (Some(tau), Some(sh), Some(sampler.nu_total * radius * sh))
            }
            None => (None, None, None),
        };
        points.push(BallPoint {
            r,
            direction: u,
            point: endp,
            velocity: end.v(model.dim()).to_vec(),
            tau,
            sigma_hat,
            weight,
        });
    }
    Ok(BallSample {
        radius,
        nu_total: sampler.nu_total,
        points,
    })
}

/// Second variation of the test fields `sin(π√K t/L)·E_α` along a
/// unit-speed geodesic of length `d = L/√K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexForm {
    /// `Σ_α ∫ φ'² g_T(E_α, E_α) − φ² g_T(R_T E_α, E_α) dt`.
    pub total: f64,
    /// `∫ φ² [(n−1)K − Ric(T)] dt`.
    pub delta: f64,
    /// `−(n−1) L√K/2 · (1 − (π/L)²)`.
    pub first_term: f64,
    /// `L = d√K`.
    pub big_l: f64,
}

/// Index form along the geodesic of `path` with parallel frames.
pub fn index_form(model: &MetricModel, path: &GeodesicPath, k: f64, opts: &GeodesicOptions) -> Result<IndexForm> {
    if !(k > 0.0) {
        return Err(invalid("K", "K > 0"));
    }
    let speed = path.speed(model);
    if (speed - 1.0).abs() > 1e-7 {
        return Err(invalid("path", format!("unit-speed geodesic required (F = {speed})")));
    }
    let n = model.dim();
    let frame = parallel_frame(model, path, opts)?;
    let fp = &frame.path;
    if fp.speed_drift(model) > 1e-7 {
        return Err(invalid("path", "speed drift beyond tolerance"));
    }
    let d = fp.duration();
    let big_l = d * k.sqrt();
    let w = PI / d;
    let mut total = 0.0;
    let mut delta = 0.0;
    for seg in &fp.segments {
        for pair in seg.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            for (t, wt) in gauss_legendre_on(8, a.t, b.t) {
                let st = hermite(a.t, &a.state, &a.deriv, b.t, &b.state, &b.deriv, t);
                let x = &st[..n];
                let v = &st[n..2 * n];
                let (r, g) = flag_operator(model, &TangentSample::in_chart(a.chart, x.to_vec(), v.to_vec()))?;
                let phi = (w * t).sin();
                let dphi = w * (w * t).cos();
                let mut integrand = 0.0;
                for al in 0..fp.frames {
                    let e = &st[(2 + al) * n..(3 + al) * n];
                    let re: Vec<f64> = (0..n).map(|i| (0..n).map(|j| r[(i, j)] * e[j]).sum()).collect();
                    integrand += dphi * dphi * quad(&g, e, e) - phi * phi * quad(&g, &re, e);
                }
                let ric = r.trace() / quad(&g, v, v);
                total += wt * integrand;
                delta += wt * phi * phi * ((n as f64 - 1.0) * k - ric);
            }
        }
    }
    let first_term = -(n as f64 - 1.0) * big_l * k.sqrt() / 2.0 * (1.0 - (PI / big_l).powi(2));
    Ok(IndexForm {
        total,
        delta,
        first_term,
        big_l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_line() {
        let e = MetricModel::Euclidean { dim: 2 };
        let path = integrate_geodesic(&e, &TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0]), 2.0, &GeodesicOptions::default()).unwrap();
        let end = path.end();
        assert!((end.state[0] - 2.0).abs() < 1e-14 && end.state[1].abs() < 1e-14);
    }

    #[test]
    fn great_circle_closes() {
        let s = MetricModel::RoundSphere { dim: 2, radius: 1.0 };
        let start = TangentSample::new(vec![0.2, -0.1], vec![0.3, 0.4]);
        let f = s.f(&start.x, &start.y);
        let unit = TangentSample::new(start.x.clone(), start.y.iter().map(|v| v / f).collect());
        let path = integrate_geodesic(&s, &unit, 2.0 * PI, &GeodesicOptions::default()).unwrap();
        let end = s.normalize_point(&path.end().point(2));
        let a = s.embed(&unit.point());
        let b = s.embed(&end);
        let gap: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(gap < 1e-6, "gap {gap}");
        assert!(path.segments.len() > 1);
        assert!(path.speed_drift(&s) < 1e-7);
    }

    #[test]
    fn shooting_matches_closed_form_on_sphere() {
        let s = MetricModel::RoundSphere { dim: 2, radius: 1.0 };
        let p = ChartPoint::new(0, vec![0.1, 0.2]);
        let q = ChartPoint::new(1, vec![-0.3, 0.25]);
        let exact = closed_form_distance(&s, &p, &q).unwrap();
        let opts = DistanceOptions {
            method: DistanceMethod::Shooting,
            ..Default::default()
        };
        let d = distance(&s, &p, &q, &opts).unwrap();
        assert!((d - exact).abs() < 1e-7, "{d} vs {exact}");
    }
}

//! Spray, nonlinear connection, Chern connection and curvature.
//!
//! Everything is derived from one Taylor jet of `F²` in `(x, y)`:
//!
//! * `G^i = ¼ g^{il}([F²]_{x^k y^l} y^k − [F²]_{x^l})`, `N^i_j = ∂G^i/∂y^j`;
//! * `γ^i_jk` are the formal Christoffel symbols of `g_y` in `x`;
//! * `Γ^i_jk = γ^i_jk − F⁻¹ g^{il}(A_ljm N^m_k + A_lkm N^m_j − A_jkm N^m_l)`.
//!
//! Curvature is computed twice: from the spray (`R^i_k`) and from horizontal
//! derivatives of `Γ` (`R^i_{jkl}`); `y^j R^i_{jkl} y^l = R^i_k` ties them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, FinslerError, Result};
use crate::indicatrix::{direction_grid, quad};
use crate::jet::{invert_jet_matrix, Jet, Scalar};
use crate::models::{unit_direction, ChartPoint, MetricModel, TangentSample};
use crate::optimize::nelder_mead;

/// Connection coefficients at a tangent sample. Three-index arrays are
/// row-major: `gamma[(i*n + j)*n + k] = γ^i_jk`.
#[derive(Debug, Clone)]
pub struct ConnectionAtSample {
    pub sample: TangentSample,
    pub spray: Vec<f64>,
    pub gamma: Vec<f64>,
    /// `N^i_j`.
    pub nonlinear: DMatrix<f64>,
    pub chern: Vec<f64>,
}

impl ConnectionAtSample {
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.spray.len();
        self.gamma[(i * n + j) * n + k]
    }

    pub fn chern(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.spray.len();
        self.chern[(i * n + j) * n + k]
    }
}

/// Curvature at a tangent sample.
#[derive(Debug, Clone)]
pub struct CurvatureAtSample {
    pub sample: TangentSample,
    /// `riemann[((i*n + j)*n + k)*n + l] = R^i_{jkl}` (Chern hh-curvature).
    pub riemann: Vec<f64>,
    /// Spray curvature `R^i_k`.
    pub flag_operator: DMatrix<f64>,
    /// `y^j R^i_{jkl} y^l`, the same operator via the Chern route.
    pub contracted: DMatrix<f64>,
    /// Fundamental tensor at the sample.
    pub g: DMatrix<f64>,
}

impl CurvatureAtSample {
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.g.nrows();
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    /// Largest entrywise gap between the two routes, relative to the
    /// operator scale.
    pub fn route_gap(&self) -> f64 {
        let scale = self.flag_operator.abs().max().max(1.0);
        (&self.flag_operator - &self.contracted).abs().max() / scale
    }
}

/// Spray and its first derivatives at `(x, y)`.
#[derive(Debug, Clone)]
pub struct SprayEval {
    pub g: Vec<f64>,
    /// `dx[(i, k)] = ∂G^i/∂x^k`.
    pub dx: DMatrix<f64>,
    /// `dy[(i, j)] = ∂G^i/∂y^j = N^i_j`.
    pub dy: DMatrix<f64>,
}

fn unit2(n: usize, i: usize, j: usize) -> Vec<u8> {
    let mut e = vec![0u8; n];
    e[i] += 1;
    e[j] += 1;
    e
}

/// Jets shared by the spray and connection computations.
struct SprayJets {
    n: usize,
    y: Vec<f64>,
    f2: Jet,
    g: Vec<Vec<Jet>>,
    ginv: Vec<Vec<Jet>>,
    spray: Vec<Jet>,
}

impl SprayJets {
    fn new(model: &MetricModel, x: &[f64], y: &[f64], degree: usize) -> Result<SprayJets> {
        let n = x.len();
        let f2 = model.f2_jet(x, y, degree);
        let dy: Vec<Jet> = (0..n).map(|l| f2.derivative(n + l)).collect();
        let dx: Vec<Jet> = (0..n).map(|l| f2.derivative(l)).collect();
        let g: Vec<Vec<Jet>> = (0..n)
            .map(|i| (0..n).map(|j| dy[i].derivative(n + j) * 0.5).collect())
            .collect();
        let ginv = invert_jet_matrix(&g).ok_or_else(|| FinslerError::NotPositiveDefinite {
            x: x.to_vec(),
            y: y.to_vec(),
        })?;
        let yv: Vec<Jet> = (0..n)
            .map(|k| Jet::variable(2 * n, degree - 2, n + k, y[k]))
            .collect();
        let p: Vec<Jet> = (0..n)
            .map(|l| {
                let mut acc = dx[l].clone() * -1.0;
                for k in 0..n {
                    acc = acc + &dx[k].derivative(n + l) * &yv[k];
                }
                acc
            })
            .collect();
        let spray = (0..n)
            .map(|i| {
                let mut acc = &ginv[i][0] * &p[0];
                for l in 1..n {
                    acc = acc + &ginv[i][l] * &p[l];
                }
                acc * 0.25
            })
            .collect();
        Ok(SprayJets {
            n,
            y: y.to_vec(),
            f2,
            g,
            ginv,
            spray,
        })
    }

    fn g_value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.g[i][j].value())
    }

    /// Spray curvature `R^i_k` (needs degree ≥ 4).
    fn spray_curvature(&self) -> DMatrix<f64> {
        let n = self.n;
        let m = 2 * n;
        let g = &self.spray;
        let gv: Vec<f64> = g.iter().map(|j| j.value()).collect();
        let yval = &self.y;
        DMatrix::from_fn(n, n, |i, k| {
            let mut r = 2.0 * g[i].d1(k);
            for j in 0..n {
                r -= yval[j] * g[i].partial(&unit2(m, j, n + k));
                r += 2.0 * gv[j] * g[i].partial(&unit2(m, n + j, n + k));
                r -= g[i].d1(n + j) * g[j].d1(n + k);
            }
            r
        })
    }
}

fn spray_jets(model: &MetricModel, s: &TangentSample, degree: usize) -> Result<SprayJets> {
    model.check_sample(s)?;
    SprayJets::new(model, &s.x, &s.y, degree)
}

/// Full connection: spray, `γ`, `N`, and Chern `Γ` as degree-1 jets.
struct ConnectionJets {
    base: SprayJets,
    nonlinear: Vec<Vec<Jet>>,
    gamma: Vec<Jet>,
    chern: Vec<Jet>,
}

fn connection_jets(model: &MetricModel, s: &TangentSample, degree: usize) -> Result<ConnectionJets> {
    let base = spray_jets(model, s, degree)?;
    let n = base.n;
    let nonlinear: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| base.spray[i].derivative(n + j)).collect())
        .collect();
    // dxg[k][l][j] = ∂g_lj/∂x^k
    let dxg: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| (0..n).map(|j| base.g[l][j].derivative(k)).collect())
                .collect()
        })
        .collect();
    let mut gamma = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc: Option<Jet> = None;
                for l in 0..n {
                    let t = dxg[k][l][j].clone() + dxg[j][l][k].clone() - dxg[l][j][k].clone();
                    let term = &base.ginv[i][l] * &t;
                    acc = Some(match acc {
                        Some(a) => a + term,
                        None => term,
                    });
                }
                gamma.push(acc.unwrap() * 0.5);
            }
        }
    }
    let f = base.f2.clone().truncate(degree - 3).sqrt();
    // A_ijk = (F/4) ∂³F²; ∂³F² = 2 ∂g_ij/∂y^k.
    let mut cartan = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let d3 = base.g[i][j].derivative(n + k);
                cartan.push(&f * &d3 * 0.5);
            }
        }
    }
    let a = |i: usize, j: usize, k: usize| &cartan[(i * n + j) * n + k];
    let finv = f.clone().recip();
    let mut chern = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut corr: Option<Jet> = None;
                for l in 0..n {
                    let mut inner: Option<Jet> = None;
                    for m in 0..n {
                        let t = a(l, j, m) * &nonlinear[m][k] + a(l, k, m) * &nonlinear[m][j]
                            - a(j, k, m) * &nonlinear[m][l];
                        inner = Some(match inner {
                            Some(v) => v + t,
                            None => t,
                        });
                    }
                    let term = &base.ginv[i][l] * &inner.unwrap();
                    corr = Some(match corr {
                        Some(v) => v + term,
                        None => term,
                    });
                }
                let idx = (i * n + j) * n + k;
                chern.push(gamma[idx].clone() - &finv * &corr.unwrap());
            }
        }
    }
    Ok(ConnectionJets {
        base,
        nonlinear,
        gamma,
        chern,
    })
}

/// Spray `G`, formal Christoffel symbols, nonlinear and Chern connection.
pub fn connection(model: &MetricModel, s: &TangentSample) -> Result<ConnectionAtSample> {
    let c = connection_jets(model, s, 4)?;
    let n = c.base.n;
    Ok(ConnectionAtSample {
        sample: s.clone(),
        spray: c.base.spray.iter().map(|j| j.value()).collect(),
        gamma: c.gamma.iter().map(|j| j.value()).collect(),
        nonlinear: DMatrix::from_fn(n, n, |i, j| c.nonlinear[i][j].value()),
        chern: c.chern.iter().map(|j| j.value()).collect(),
    })
}

/// Curvature by both routes.
pub fn riemann_curvature(model: &MetricModel, s: &TangentSample) -> Result<CurvatureAtSample> {
    let c = connection_jets(model, s, 4)?;
    let n = c.base.n;
    let nval = DMatrix::from_fn(n, n, |i, j| c.nonlinear[i][j].value());
    let gam = |i: usize, j: usize, k: usize| c.chern[(i * n + j) * n + k].value();
    // δ_k Γ^i_jl
    let delta = |i: usize, j: usize, l: usize, k: usize| -> f64 {
        let jet = &c.chern[(i * n + j) * n + l];
        let mut v = jet.d1(k);
        for m in 0..n {
            v -= nval[(m, k)] * jet.d1(n + m);
        }
        v
    };
    let mut riemann = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = delta(i, j, l, k) - delta(i, j, k, l);
                    for h in 0..n {
                        r += gam(i, h, k) * gam(h, j, l) - gam(i, h, l) * gam(h, j, k);
                    }
                    riemann[((i * n + j) * n + k) * n + l] = r;
                }
            }
        }
    }
    let y = &s.y;
    let contracted = DMatrix::from_fn(n, n, |i, k| {
        let mut acc = 0.0;
        for j in 0..n {
            for l in 0..n {
                acc += y[j] * riemann[((i * n + j) * n + k) * n + l] * y[l];
            }
        }
        acc
    });
    Ok(CurvatureAtSample {
        sample: s.clone(),
        riemann,
        flag_operator: c.base.spray_curvature(),
        contracted,
        g: c.base.g_value(),
    })
}

/// Spray curvature operator `R^i_k` and `g_y` (spray route only).
pub fn flag_operator(model: &MetricModel, s: &TangentSample) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let base = spray_jets(model, s, 4)?;
    Ok((base.spray_curvature(), base.g_value()))
}

/// Flag curvature `K(y, V)`.
pub fn flag_curvature(model: &MetricModel, s: &TangentSample, v: &[f64]) -> Result<f64> {
    let (r, g) = flag_operator(model, s)?;
    flag_from_operator(&r, &g, &s.y, v)
}

fn flag_from_operator(r: &DMatrix<f64>, g: &DMatrix<f64>, y: &[f64], v: &[f64]) -> Result<f64> {
    let n = y.len();
    let rv: Vec<f64> = (0..n).map(|i| (0..n).map(|k| r[(i, k)] * v[k]).sum()).collect();
    let gyy = quad(g, y, y);
    let gvv = quad(g, v, v);
    let gyv = quad(g, y, v);
    let den = gyy * gvv - gyv * gyv;
    if den <= 1e-12 * gyy * gvv {
        return Err(FinslerError::DegenerateFlag);
    }
    Ok(quad(g, &rv, v) / den)
}

/// Ricci curvature by both evaluation paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RicciValue {
    /// `Σ_i K(y, e_i)` over a `g_y`-orthonormal completion of `y/F`.
    pub basis_sum: f64,
    /// `tr(R^i_k) / F²`.
    pub trace: f64,
}

/// `g_y`-orthonormal basis `e_1, …, e_{n-1}` of the complement of `y`,
/// Gram–Schmidt from the coordinate axes in order.
pub fn orthonormal_complement(g: &DMatrix<f64>, y: &[f64]) -> Vec<Vec<f64>> {
    let n = y.len();
    let fy = quad(g, y, y).sqrt();
    let mut basis: Vec<Vec<f64>> = vec![y.iter().map(|v| v / fy).collect()];
    for axis in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[axis] = 1.0;
        for b in &basis {
            let c = quad(g, &v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
        }
        let norm = quad(g, &v, &v).sqrt();
        if norm < 1e-8 {
            continue;
        }
        basis.push(v.iter().map(|x| x / norm).collect());
    }
    basis.remove(0);
    basis
}

fn ricci_from_operator(r: &DMatrix<f64>, g: &DMatrix<f64>, y: &[f64]) -> Result<RicciValue> {
    let f2 = quad(g, y, y);
    let basis = orthonormal_complement(g, y);
    let mut sum = 0.0;
    for e in &basis {
        sum += flag_from_operator(r, g, y, e)?;
    }
    Ok(RicciValue {
        basis_sum: sum,
        trace: r.trace() / f2,
    })
}

/// `Ric(y) = Σ K(y, e_i)`, a 0-homogeneous function of `y`.
pub fn ricci(model: &MetricModel, s: &TangentSample) -> Result<RicciValue> {
    let (r, g) = flag_operator(model, s)?;
    ricci_from_operator(&r, &g, &s.y)
}

/// Unnormalized Ricci `tr(R^i_k)`, 2-homogeneous in `y`.
pub fn ricci_unnormalized(model: &MetricModel, s: &TangentSample) -> Result<f64> {
    Ok(flag_operator(model, s)?.0.trace())
}

/// Grid settings for [`min_ricci`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MinRicciOptions {
    /// Steps on the periodic angle (half as many on the others).
    pub directions_per_angle: usize,
    pub polish: bool,
}

impl Default for MinRicciOptions {
    fn default() -> Self {
        MinRicciOptions {
            directions_per_angle: 128,
            polish: true,
        }
    }
}

impl MinRicciOptions {
    /// Budget used inside Monte Carlo loops: the full grid on surfaces, a
    /// coarse one (then polished) in higher dimensions.
    pub fn for_dim(n: usize) -> Self {
        MinRicciOptions {
            directions_per_angle: if n <= 2 { 64 } else { 16 },
            polish: true,
        }
    }
}

/// Result of [`min_ricci`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MinRicci {
    pub value: f64,
    /// Minimizing direction with `F = 1`.
    pub direction: Vec<f64>,
    /// Smallest value seen on the grid.
    pub grid_min: f64,
    pub method: String,
}

/// `min_{y ∈ S_xM} Ric(y)`.
///
/// Riemannian families use the generalized eigenproblem of the Ricci
/// tensor against `g`; Minkowski families have vanishing curvature; the rest
/// use a direction grid followed by Nelder–Mead.
pub fn min_ricci(model: &MetricModel, p: &ChartPoint, opts: &MinRicciOptions) -> Result<MinRicci> {
    model.check_point(p.chart, &p.x)?;
    let n = model.dim();
    if opts.directions_per_angle < 4 {
        return Err(invalid("directionsPerAngle", "directionsPerAngle >= 4"));
    }
    let normalize = |y: &[f64]| -> Vec<f64> {
        let f = model.f(&p.x, y);
        y.iter().map(|v| v / f).collect()
    };
    if model.is_minkowski() {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        return Ok(MinRicci {
            value: 0.0,
            direction: normalize(&e),
            grid_min: 0.0,
            method: "flat".into(),
        });
    }
    if model.is_riemannian() {
        let mut e = vec![0.0; n];
        e[0] = 1.0;
        let curv = riemann_curvature(model, &TangentSample::at(p, e))?;
        // Ric_jl = R^i_{jil}, symmetrized.
        let ric = DMatrix::from_fn(n, n, |j, l| {
            let a: f64 = (0..n).map(|i| curv.r(i, j, i, l)).sum();
            let b: f64 = (0..n).map(|i| curv.r(i, l, i, j)).sum();
            0.5 * (a + b)
        });
        let chol = curv.g.clone().cholesky().ok_or(FinslerError::NotPositiveDefinite {
            x: p.x.clone(),
            y: vec![],
        })?;
        let linv = chol.l().try_inverse().expect("cholesky factor is invertible");
        let sym = &linv * &ric * linv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let (idx, &value) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let w = eig.eigenvectors.column(idx).into_owned();
        let y = linv.transpose() * w;
        return Ok(MinRicci {
            value,
            direction: normalize(y.as_slice()),
            grid_min: value,
            method: "eigen".into(),
        });
    }
    let grid = direction_grid(n, opts.directions_per_angle);
    let eval = |angles: &[f64]| -> f64 {
        let y = unit_direction(angles);
        match ricci(model, &TangentSample::at(p, y)) {
            Ok(r) => r.trace,
            Err(_) => f64::INFINITY,
        }
    };
    let mut best = (f64::INFINITY, 0usize);
    for (i, a) in grid.iter().enumerate() {
        let v = eval(a);
        if v < best.0 {
            best = (v, i);
        }
    }
    let grid_min = best.0;
    let mut value = grid_min;
    let mut angles = grid[best.1].clone();
    if opts.polish {
        let step = std::f64::consts::PI / opts.directions_per_angle as f64;
        let m = nelder_mead(eval, &angles, step, 1e-13, 200 * n);
        if m.value < value {
            value = m.value;
            angles = m.x;
        }
    }
    Ok(MinRicci {
        value,
        direction: normalize(&unit_direction(&angles)),
        grid_min,
        method: "grid+nelderMead".into(),
    })
}

/// Spray and derivatives by the generic jet evaluator.
pub fn spray_generic(model: &MetricModel, x: &[f64], y: &[f64], with_derivatives: bool) -> Result<SprayEval> {
    let n = x.len();
    let degree = if with_derivatives { 3 } else { 2 };
    let base = SprayJets::new(model, x, y, degree)?;
    let g = base.spray.iter().map(|j| j.value()).collect();
    let (dx, dy) = if with_derivatives {
        (
            DMatrix::from_fn(n, n, |i, k| base.spray[i].d1(k)),
            DMatrix::from_fn(n, n, |i, k| base.spray[i].d1(n + k)),
        )
    } else {
        (DMatrix::zeros(n, n), DMatrix::zeros(n, n))
    };
    Ok(SprayEval { g, dx, dy })
}

fn conformal_spray(x: &[f64], y: &[f64], grad: &[f64], hess: &DMatrix<f64>, out: &mut SprayEval, offset: usize) {
    let m = x.len();
    let yg: f64 = y.iter().zip(grad).map(|(a, b)| a * b).sum();
    let y2: f64 = y.iter().map(|v| v * v).sum();
    let hy: Vec<f64> = (0..m).map(|k| (0..m).map(|j| y[j] * hess[(j, k)]).sum()).collect();
    for i in 0..m {
        out.g[offset + i] = yg * y[i] - 0.5 * y2 * grad[i];
        for j in 0..m {
            let dij = if i == j { 1.0 } else { 0.0 };
            out.dy[(offset + i, offset + j)] = grad[j] * y[i] + yg * dij - y[j] * grad[i];
            out.dx[(offset + i, offset + j)] = hy[j] * y[i] - 0.5 * y2 * hess[(i, j)];
        }
    }
}

/// Spray `G^i` with `∂G/∂x` and `∂G/∂y`, using closed forms where the
/// family has one (Minkowski: zero; conformal Riemannian:
/// `G = (y·∇φ) y − ½|y|²∇φ`; Berwald products: the factor's spray).
pub fn spray(model: &MetricModel, x: &[f64], y: &[f64]) -> Result<SprayEval> {
    let n = x.len();
    let mut out = SprayEval {
        g: vec![0.0; n],
        dx: DMatrix::zeros(n, n),
        dy: DMatrix::zeros(n, n),
    };
    if model.is_minkowski() {
        return Ok(out);
    }
    if let Some((_, grad, hess)) = model.conformal(x) {
        conformal_spray(x, y, &grad, &hess, &mut out, 0);
        return Ok(out);
    }
    if let MetricModel::BerwaldProduct { factor, .. } = model {
        let m = factor.dim();
        if let Some((_, grad, hess)) = factor.conformal(&x[..m]) {
            conformal_spray(&x[..m], &y[..m], &grad, &hess, &mut out, 0);
            return Ok(out);
        }
    }
    spray_generic(model, x, y, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_connection_vanishes() {
        let e = MetricModel::Euclidean { dim: 3 };
        let s = TangentSample::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5]);
        let c = connection(&e, &s).unwrap();
        assert!(c.chern.iter().chain(&c.gamma).chain(&c.spray).all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_flag_curvature_is_one() {
        let m = MetricModel::RoundSphere { dim: 2, radius: 1.0 };
        let s = TangentSample::new(vec![0.3, -0.4], vec![0.7, 0.2]);
        let k = flag_curvature(&m, &s, &[0.1, 1.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-10, "{k}");
        let c = riemann_curvature(&m, &s).unwrap();
        assert!(c.route_gap() < 1e-10);
    }

    #[test]
    fn closed_form_spray_matches_jets() {
        let m = MetricModel::PoincareBall { dim: 3, k: 1.3 };
        let x = [0.1, -0.2, 0.3];
        let y = [0.4, 1.0, -0.7];
        let a = spray(&m, &x, &y).unwrap();
        let b = spray_generic(&m, &x, &y, true).unwrap();
        for i in 0..3 {
            assert!((a.g[i] - b.g[i]).abs() < 1e-12);
        }
        assert!((&a.dx - &b.dx).abs().max() < 1e-11);
        assert!((&a.dy - &b.dy).abs().max() < 1e-11);
    }
}

mod common;

use std::f64::consts::PI;

use common::*;
use finsler_core::comparison::converged_average_metric;
use finsler_core::indicatrix::*;
use finsler_core::models::*;
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn evaluates_the_worked_values() {
    let e = MetricModel::Euclidean { dim: 2 };
    assert_eq!(e.eval(&TangentSample::new(vec![0.0, 0.0], vec![3.0, 4.0])).unwrap(), 5.0);
    let r = randers(&[0.5, 0.0]);
    let at = |y: Vec<f64>| r.eval(&TangentSample::new(vec![0.0, 0.0], y)).unwrap();
    assert!((at(vec![1.0, 0.0]) - 1.5).abs() < 1e-15);
    assert!((at(vec![-1.0, 0.0]) - 0.5).abs() < 1e-15);
    // 4|dy|²/(1+|x|²)² at x = 0.
    let s = sphere(2);
    let v = s.eval(&TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0])).unwrap();
    assert!((v - 2.0).abs() < 1e-15);
    let x = [0.3, -0.4];
    let v = s.eval(&TangentSample::new(x.to_vec(), vec![0.6, 0.8])).unwrap();
    assert!((v - 2.0 / (1.0 + 0.25)).abs() < 1e-14);
}

#[test]
fn rejects_zero_vectors_and_points_outside_the_chart() {
    let r = randers(&[0.5, 0.0]);
    assert!(r.eval(&TangentSample::new(vec![0.0, 0.0], vec![0.0, 0.0])).is_err());
    let p = MetricModel::PoincareBall { dim: 2, k: 1.0 };
    assert!(p.eval(&TangentSample::new(vec![1.2, 0.0], vec![1.0, 0.0])).is_err());
    assert!(p.fundamental_tensor(&TangentSample::new(vec![0.0, 0.0], vec![0.0, 0.0])).is_err());
}

#[test]
fn positive_homogeneity() {
    let mut r = rng(1);
    for model in zoo() {
        for _ in 0..1000 {
            let s = chart_sample(&model, &mut r);
            let lambda = 10.0 * r.gen::<f64>() + 1e-3;
            let f = model.f(&s.x, &s.y);
            let scaled: Vec<f64> = s.y.iter().map(|v| v * lambda).collect();
            let g = model.f(&s.x, &scaled);
            assert!((g - lambda * f).abs() <= 1e-10 * lambda * f, "{}", model.id());
        }
    }
}

#[test]
fn euclidean_hessian_is_twice_identity() {
    let e = MetricModel::Euclidean { dim: 3 };
    let jet = e.metric_jet(&TangentSample::new(vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5]), 2).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let mut ay = [0u8; 3];
            ay[i] += 1;
            ay[j] += 1;
            let want = if i == j { 2.0 } else { 0.0 };
            assert!((jet.partial(&[0, 0, 0], &ay) - want).abs() < 1e-12);
        }
    }
}

fn difference_hessian(model: &MetricModel, x: &[f64], y: &[f64]) -> DMatrix<f64> {
    let n = y.len();
    let f2 = |v: &[f64]| model.f(x, v).powi(2);
    DMatrix::from_fn(n, n, |i, j| {
        let d = |h: f64| {
            let at = |a: f64, b: f64| f2(&shifted(&shifted(y, i, a), j, b));
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
        };
        0.5 * richardson(d, 1e-3)
    })
}

#[test]
fn randers_fundamental_tensor_matches_differences() {
    let model = randers(&[0.3, 0.0]);
    let s = TangentSample::new(vec![0.0, 0.0], vec![0.0, 1.0]);
    let t = model.fundamental_tensor(&s).unwrap();
    let oracle = difference_hessian(&model, &s.x, &s.y);
    assert!((&t.g - &oracle).abs().max() <= 1e-5 * oracle.abs().max());
    // Same through the jet interface.
    let jet = model.metric_jet(&s, 2).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let mut ay = [0u8; 2];
            ay[i] += 1;
            ay[j] += 1;
            assert!((0.5 * jet.partial(&[0, 0], &ay) - oracle[(i, j)]).abs() < 1e-5);
        }
    }
}

#[test]
fn fundamental_tensor_examples() {
    let e = MetricModel::Euclidean { dim: 2 };
    let t = e.fundamental_tensor(&TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0])).unwrap();
    assert_eq!(t.g, DMatrix::identity(2, 2));
    let r = randers(&[0.5, 0.0]);
    let y = [1.0, 0.0];
    let t = r.fundamental_tensor(&TangentSample::new(vec![0.0, 0.0], y.to_vec())).unwrap();
    let gyy = (t.g.clone() * nalgebra::DVector::from_column_slice(&y)).dot(&nalgebra::DVector::from_column_slice(&y));
    assert!((gyy - 2.25).abs() < 1e-12);
}

#[test]
fn tensors_are_symmetric_positive_and_inverted() {
    let mut r = rng(2);
    for model in zoo() {
        let n = model.dim();
        for _ in 0..200 {
            let s = chart_sample(&model, &mut r);
            let t = model.fundamental_tensor(&s).unwrap();
            assert!((&t.g - t.g.transpose()).abs().max() < 1e-12);
            assert!(t.g.clone().cholesky().is_some(), "{} not positive", model.id());
            let id = &t.g * &t.g_inverse;
            assert!((id - DMatrix::identity(n, n)).abs().max() < 1e-10);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let a = t.cartan(i, j, k);
                        assert!((a - t.cartan(j, i, k)).abs() < 1e-10);
                        assert!((a - t.cartan(k, j, i)).abs() < 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn euler_identities() {
    let mut r = rng(3);
    for model in zoo() {
        let n = model.dim();
        for _ in 0..200 {
            let s = chart_sample(&model, &mut r);
            let t = model.fundamental_tensor(&s).unwrap();
            let f2 = model.f(&s.x, &s.y).powi(2);
            let y = nalgebra::DVector::from_column_slice(&s.y);
            assert!(((&t.g * &y).dot(&y) - f2).abs() <= 1e-9 * f2);
            let scale = t.cartan.iter().fold(1.0f64, |m, a| m.max(a.abs()));
            for i in 0..n {
                for j in 0..n {
                    let c: f64 = (0..n).map(|k| t.cartan(i, j, k) * s.y[k]).sum();
                    assert!(c.abs() <= 1e-8 * scale * norm(&s.y).max(1.0), "{}: {c:e}", model.id());
                }
            }
        }
    }
}

#[test]
fn cartan_vanishes_on_riemannian_families() {
    let mut r = rng(4);
    for model in [MetricModel::Euclidean { dim: 3 }, sphere(2), MetricModel::PoincareBall { dim: 3, k: 0.5 }] {
        for _ in 0..50 {
            let s = chart_sample(&model, &mut r);
            let a = model.cartan_tensor(&s).unwrap();
            assert!(a.iter().all(|v| v.abs() < 1e-10), "{}", model.id());
        }
    }
}

#[test]
fn randers_cartan_matches_third_differences() {
    let model = randers(&[0.3, 0.0]);
    let mut r = rng(5);
    for _ in 0..20 {
        let y = random_vec(&mut r, 2, 1.0);
        let s = TangentSample::new(vec![0.0, 0.0], y.clone());
        let a = model.cartan_tensor(&s).unwrap();
        let f = model.f(&s.x, &y);
        let f2 = |v: &[f64]| model.f(&s.x, v).powi(2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let d = |h: f64| {
                        let mut acc = 0.0;
                        for si in [-1.0, 1.0] {
                            for sj in [-1.0, 1.0] {
                                for sk in [-1.0, 1.0] {
                                    let v = shifted(&shifted(&shifted(&y, i, si * h), j, sj * h), k, sk * h);
                                    acc += si * sj * sk * f2(&v);
                                }
                            }
                        }
                        acc / (8.0 * h * h * h)
                    };
                    let oracle = f / 4.0 * richardson(d, 1e-2 * norm(&y));
                    let got = a[(i * 2 + j) * 2 + k];
                    assert!((got - oracle).abs() < 1e-4, "A[{i}{j}{k}] {got} vs {oracle}");
                }
            }
        }
    }
}

#[test]
fn uniformity_constant_is_one_on_riemannian_families() {
    let e = MetricModel::Euclidean { dim: 2 };
    let est = uniformity_constant(&e, &e.spread_points(3), 32).unwrap();
    assert!((est.value - 1.0).abs() < 1e-12);
    let s = sphere(2);
    let est = uniformity_constant(&s, &s.spread_points(4), 32).unwrap();
    assert!((est.value - 1.0).abs() < 1e-9);
    assert!(est.polished >= 1.0 - 1e-12);
}

#[test]
fn uniformity_constant_of_randers_matches_brute_force() {
    let b = [0.5, 0.0];
    let model = randers(&b);
    let est = uniformity_constant(&model, &[ChartPoint::origin(2)], 64).unwrap();
    // Brute force over (X, Y, Z) on a grid ten times finer.
    let m = 640;
    let dirs: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let gs: Vec<DMatrix<f64>> = dirs.iter().map(|d| randers_g(&b, d)).collect();
    let mut oracle: f64 = 1.0;
    for y in &dirs {
        let vals: Vec<f64> = gs
            .iter()
            .map(|g| {
                let v = nalgebra::DVector::from_column_slice(y);
                (g * &v).dot(&v)
            })
            .collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        oracle = oracle.max(hi / lo);
    }
    assert!(est.value > 1.0);
    assert!((est.value - oracle).abs() <= 0.01 * oracle, "{} vs {oracle}", est.value);
    assert!(!est.refinement.is_empty());
}

#[test]
fn uniformity_constant_exceeds_one_for_nonzero_drift() {
    for b in [[0.05, 0.0], [0.0, -0.2], [0.3, 0.3]] {
        let model = randers(&b);
        let est = uniformity_constant(&model, &[ChartPoint::origin(2)], 32).unwrap();
        assert!(est.value > 1.0 + 1e-3, "{b:?}: {}", est.value);
    }
}

#[test]
fn average_metric_of_riemannian_families_is_g() {
    let e = MetricModel::Euclidean { dim: 3 };
    let g = average_metric(&e, &ChartPoint::new(0, vec![0.2, 0.1, 0.0]), DEFAULT_NODES_PER_ANGLE).unwrap();
    assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    let s = sphere(2);
    let x = vec![0.3, -0.5];
    let g = average_metric(&s, &ChartPoint::new(0, x.clone()), DEFAULT_NODES_PER_ANGLE).unwrap();
    let want = s.g_matrix(&x, &[1.0, 0.0]);
    assert!((g - want).abs().max() < 1e-10);
}

#[test]
fn randers_average_metric_matches_fine_quadrature() {
    let b = [0.4, 0.0];
    let model = randers(&b);
    let got = average_metric(&model, &ChartPoint::origin(2), DEFAULT_NODES_PER_ANGLE).unwrap();
    let oracle = randers_average_metric(&b, 6400);
    assert!((got - oracle).abs().max() < 1e-6);
}

#[test]
fn average_metric_sandwich() {
    let mut r = rng(6);
    for model in [randers(&[0.4, 0.2]), perturbed_flat(2, 0.3), MetricModel::ReversibleQuartic { dim: 2, eps: 0.4 }] {
        let points: Vec<ChartPoint> = (0..10).map(|_| ChartPoint::new(0, random_vec(&mut r, 2, 0.6))).collect();
        let lambda = uniformity_constant(&model, &points, 32).unwrap().value;
        for p in &points {
            let gh = converged_average_metric(&model, p).unwrap();
            for _ in 0..1000 {
                let x = random_vec(&mut r, 2, 1.0);
                let f2 = model.f(&p.x, &x).powi(2);
                let xv = nalgebra::DVector::from_column_slice(&x);
                let v = (&gh * &xv).dot(&xv);
                assert!(v >= f2 / lambda * (1.0 - 1e-9) && v <= f2 * lambda * (1.0 + 1e-9), "{}", model.id());
            }
        }
    }
}

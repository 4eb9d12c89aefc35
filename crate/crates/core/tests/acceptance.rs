//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the terminal.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use finsler_core::comparison::*;
use finsler_core::connection::flag_curvature;
use finsler_core::geodesic::*;
use finsler_core::indicatrix::uniformity_constant;
use finsler_core::measures::*;
use finsler_core::models::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e<T, E: std::fmt::Debug>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|err| format!("{err:?}"))
}

fn sphere(dim: usize) -> MetricModel {
    MetricModel::RoundSphere { dim, radius: 1.0 }
}

fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * r.gen::<f64>() - 1.0)).collect()
}

fn unit(model: &MetricModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let f = model.f(x, y);
    y.iter().map(|v| v / f).collect()
}

// Composite Simpson rule, used as an oracle independent of the library's
// Gauss–Legendre code.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let m = 2 * panels;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

fn riemannian_reduction() -> Outcome {
    let started = Instant::now();
    let mut worst_flag: f64 = 0.0;
    for (model, expected, bound) in [
        (sphere(2), 1.0, 1.2),
        (sphere(3), 1.0, 1.2),
        (MetricModel::PoincareBall { dim: 2, k: 1.0 }, -1.0, 0.8),
        (MetricModel::PoincareBall { dim: 3, k: 1.0 }, -1.0, 0.8),
    ] {
        let n = model.dim();
        let mut r = rng(11);
        let mut done = 0;
        while done < 100 {
            let x = random_vec(&mut r, n, bound / (n as f64).sqrt());
            let y = random_vec(&mut r, n, 1.0);
            let v = random_vec(&mut r, n, 1.0);
            let Ok(k) = flag_curvature(&model, &TangentSample::new(x, y), &v) else {
                continue;
            };
            worst_flag = worst_flag.max((k - expected).abs());
            done += 1;
        }
        let region = model.spread_points(8);
        let lambda = e(uniformity_constant(&model, &region, 32))?;
        ensure((lambda.value - 1.0).abs() <= 1e-9, format!("{}: Λ_F = {}", model.id(), lambda.value))?;
    }
    ensure(worst_flag <= 1e-6, format!("flag curvature off by {worst_flag:e}"))?;

    let s = sphere(2);
    let mut r = rng(12);
    let mut worst_dist: f64 = 0.0;
    let shooting = DistanceOptions {
        method: DistanceMethod::Shooting,
        ..Default::default()
    };
    for _ in 0..10 {
        let a = normalize(random_vec(&mut r, 3, 1.0));
        let b0 = random_vec(&mut r, 3, 1.0);
        let dot: f64 = a.iter().zip(&b0).map(|(u, v)| u * v).sum();
        let b = normalize(b0.iter().zip(&a).map(|(v, u)| v - dot * u).collect());
        let q: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 3.0f64.cos() * u + 3.0f64.sin() * v).collect();
        let (p, q) = (s.from_embedded(&a), s.from_embedded(&q));
        for opts in [&shooting, &DistanceOptions::default()] {
            worst_dist = worst_dist.max((e(distance(&s, &p, &q, opts))? - 3.0).abs());
        }
    }
    ensure(worst_dist <= 1e-4, format!("distance at angle 3 off by {worst_dist:e}"))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("runtime {secs:.1} s"))?;
    Ok(format!("flag err {worst_flag:.1e}, Λ_F = 1, distance err {worst_dist:.1e}, {secs:.1} s"))
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

fn myers_equality() -> Outcome {
    let started = Instant::now();
    let s = sphere(2);
    let centers = s.spread_points(8);
    let kbar = e(knorm(&s, 1.0, 1.0, 1.0, MeasureKind::BusemannHausdorff, &centers, 200, 21))?;
    ensure(kbar.value == 0.0, format!("K̄ = {}", kbar.value))?;
    let diam = e(sampled_diameter(&s, 500, 22))?;
    ensure(diam <= PI + 1e-3, format!("sampled diameter {diam}"))?;
    let report = e(myers_verify(&s, 1.0, 1.0, 4.0, 0.2, 23, &SamplingOptions::default()))?;
    ensure(report.pass && report.asserted, format!("myers report {:?}", report.notes))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("runtime {secs:.1} s"))?;
    Ok(format!("K̄ = 0, sampled diam {diam:.6} ≤ π + 1e-3, bound asserted, {secs:.1} s"))
}

fn distortion_sandwich() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for b in [0.2, 0.5] {
        let model = MetricModel::RandersFlat { b: vec![b * 0.6, b * 0.8] };
        let n = model.dim() as f64;
        let mut r = rng(31);
        let points: Vec<ChartPoint> = (0..8).map(|_| ChartPoint::new(0, random_vec(&mut r, 2, 2.0))).collect();
        let delta = e(measured_delta(&model, &points))?;
        let (lo, hi) = (delta.powf(-2.0 * n), delta.powf(2.0 * n));
        for kind in MeasureKind::ALL {
            let mut violations = 0;
            for _ in 0..1000 {
                let s = TangentSample::new(random_vec(&mut r, 2, 2.0), random_vec(&mut r, 2, 1.0));
                let et = e(distortion(&model, &s, kind))?.exp();
                if !(lo <= et && et <= hi) {
                    violations += 1;
                }
                worst = worst.max((et.ln().abs()) / (2.0 * n * delta.ln()));
                checked += 1;
            }
            ensure(violations == 0, format!("|b| = {b}, {}: {violations} violations", kind.tag()))?;
        }
    }
    Ok(format!("{checked} samples, 0 violations, largest |τ|/(2n log δ) = {worst:.3}"))
}

fn monotone_quantity_check() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    for (model, k, r_max) in [
        (sphere(2), 1.0, 3.0),
        (sphere(3), 1.0, 3.0),
        (MetricModel::Euclidean { dim: 2 }, 0.0, 3.0),
        (MetricModel::Euclidean { dim: 3 }, 0.0, 3.0),
    ] {
        let p = model.spread_points(3)[1].clone();
        let sampler = IndicatrixSampler::new(&model, &p);
        let mut r = rng(41);
        for _ in 0..50 {
            let u = sampler.sample(&model, &mut r);
            let mut prev: Option<f64> = None;
            for i in 1..=20 {
                let rad = r_max * i as f64 / 20.0;
                let q = e(monotone_quantity(&model, &p, &u, rad, k, MeasureKind::BusemannHausdorff))?;
                if let Some(before) = prev {
                    let rise = (q - before) / before.abs();
                    worst = worst.max(rise);
                    ensure(rise <= 1e-4, format!("{}: rise {rise:e} at r = {rad}", model.id()))?;
                }
                prev = Some(q);
            }
        }
    }
    Ok(format!("50 radial geodesics × 4 models, largest relative rise {worst:.1e}"))
}

fn uniform_in_disk(r: &mut ChaCha8Rng, c: &[f64], radius: f64) -> Vec<f64> {
    loop {
        let v = random_vec(r, 2, radius);
        if v[0] * v[0] + v[1] * v[1] < radius * radius {
            return vec![c[0] + v[0], c[1] + v[1]];
        }
    }
}

fn segment_inequality() -> Outcome {
    let mut lines = Vec::new();
    let euclid = MetricModel::Euclidean { dim: 2 };
    let s = sphere(2);
    let cases = [
        (
            euclid.clone(),
            0.0,
            BallSpec { center: ChartPoint::new(0, vec![0.0, 0.0]), radius: 0.5 },
            BallSpec { center: ChartPoint::new(0, vec![1.0, 0.0]), radius: 0.5 },
        ),
        (
            s.clone(),
            1.0,
            BallSpec { center: ChartPoint::new(0, vec![0.0, 0.0]), radius: 0.4 },
            BallSpec { center: ChartPoint::new(0, vec![(0.3f64).tan(), 0.0]), radius: 0.4 },
        ),
    ];
    for (model, k, a1, a2) in &cases {
        let fs = [
            TestFunction::Zero,
            TestFunction::One,
            TestFunction::DistanceFrom { center: a1.center.clone() },
            TestFunction::Bump { center: a1.center.clone(), width: 1.0 },
            TestFunction::RicciDeficit { q: 1.0, big_k: 1.0 },
        ];
        for f in &fs {
            let started = Instant::now();
            let opts = SegmentOptions {
                k: *k,
                ..Default::default()
            };
            let rep = e(segment_check(model, a1, a2, f, 10_000, 51, &opts))?;
            let secs = started.elapsed().as_secs_f64();
            ensure(rep.pass, format!("{} {}: margin {} (se {})", model.id(), f.name(), rep.margin, rep.standard_error))?;
            ensure(rep.margin >= -3.0 * rep.standard_error, format!("{} {}: margin below −3 s.e.", model.id(), f.name()))?;
            ensure(secs < 60.0, format!("{} {}: runtime {secs:.1} s", model.id(), f.name()))?;
            if matches!(f, TestFunction::Zero) {
                ensure(rep.lhs == 0.0 && rep.rhs == 0.0, "f = 0 must give LHS = RHS = 0")?;
            }
            lines.push(format!("{}/{} {:.1}s", model.id(), f.name(), secs));
        }
    }
    // Direct Monte Carlo of ∬ |x1 − x2| over the Euclidean disks.
    let rep = e(segment_check(&euclid, &cases[0].2, &cases[0].3, &TestFunction::One, 10_000, 51, &SegmentOptions::default()))?;
    let mut r = rng(52);
    let m = 200_000;
    let area = PI * 0.25;
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..m {
        let x = uniform_in_disk(&mut r, &[0.0, 0.0], 0.5);
        let y = uniform_in_disk(&mut r, &[1.0, 0.0], 0.5);
        let d = area * area * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        acc += d;
        acc2 += d * d;
    }
    let mean = acc / m as f64;
    let se_oracle = ((acc2 / m as f64 - mean * mean) / m as f64).sqrt();
    let se_lhs = rep.inputs["lhsStandardError"].as_f64().unwrap_or(f64::INFINITY);
    ensure(
        (rep.lhs - mean).abs() <= 3.0 * (se_lhs * se_lhs + se_oracle * se_oracle).sqrt(),
        format!("LHS {} vs direct MC {mean}", rep.lhs),
    )?;
    Ok(format!("10 cases × 10⁴ pairs pass; euclidean LHS {:.4} vs direct MC {mean:.4}", rep.lhs))
}

fn index_form_check() -> Outcome {
    let opts = GeodesicOptions::default();
    let s = sphere(2);
    let x = vec![0.1, -0.2];
    let start = TangentSample::new(x.clone(), unit(&s, &x, &[0.6, 0.8]));
    let path = e(integrate_geodesic(&s, &start, PI, &opts))?;
    let sph = e(index_form(&s, &path, 1.0, &opts))?;
    ensure(sph.total.abs() <= 1e-4, format!("sphere total {}", sph.total))?;
    ensure(sph.delta.abs() <= 1e-9, format!("sphere Δ {}", sph.delta))?;

    let euclid = MetricModel::Euclidean { dim: 2 };
    let path = e(integrate_geodesic(&euclid, &TangentSample::new(vec![0.0, 0.0], vec![1.0, 0.0]), 1.0, &opts))?;
    let flat = e(index_form(&euclid, &path, 1.0, &opts))?;
    let oracle = simpson(|t| (PI * (PI * t).cos()).powi(2), 0.0, 1.0, 2000);
    ensure((oracle - PI * PI / 2.0).abs() < 1e-9, "oracle quadrature")?;
    ensure((flat.total - oracle).abs() <= 1e-6, format!("euclidean total {} vs {oracle}", flat.total))?;
    Ok(format!("sphere total {:.1e}, Δ {:.1e}; euclidean total {:.9} vs π²/2", sph.total, sph.delta, flat.total))
}

// Independent evaluation of the constant chain: v(n,k,r) by Simpson
// quadrature of the area of geodesic spheres, the segment supremum from
// the hyperbolic sine ratio, and the products evaluated in a different
// order.
fn oracle_volume(n: usize, kk: f64, r: f64) -> f64 {
    let area = 2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n);
    let s = |t: f64| -> f64 {
        if kk < 0.0 {
            ((-kk).sqrt() * t).sinh() / (-kk).sqrt()
        } else {
            t
        }
    };
    area * simpson(|t| s(t).powi(n as i32 - 1), 0.0, r, 4000)
}

// Γ(n/2).
fn gamma_half_integer(n: usize) -> f64 {
    if n % 2 == 0 {
        (1..n / 2).map(|i| i as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut a = 0.5;
        while a < n as f64 / 2.0 - 0.25 {
            g *= a;
            a += 1.0;
        }
        g
    }
}

fn oracle_eps(n: usize, q: f64, k: f64, big_k: f64, delta: f64, radius: f64, rho: f64, r: f64) -> f64 {
    let kk = -k * k;
    let s = |t: f64| if k > 0.0 { (k * t).sinh() / k } else { t };
    let seg = (s(radius) / s(radius / 2.0)).powi(n as i32 - 1) * delta.powi(4 * n as i32);
    let c_rho = oracle_volume(n, kk, (1.0 + delta) * radius) / oracle_volume(n, kk, r) * r * (1.0 + delta) * seg * delta.powi(4 * n as i32) * 2.0;
    let c_q = (c_rho.ln() / q + (1.0 - q) / (2.0 * q) * big_k.ln()).exp();
    let l0 = PI + rho * big_k.sqrt() / 2.0;
    let base = (n as f64 - 1.0) * big_k.sqrt() * (1.0 - PI * PI / (l0 * l0)) / c_q / 2.0;
    (q * base.ln()).exp() * l0
}

fn constant_chains() -> Outcome {
    let c = e(segment_constant(2, 0.0, 1.2, 1.7))?;
    let expected = 2.0 * 1.2f64.powi(8);
    ensure(((c - expected) / expected).abs() <= 1e-12, format!("C(2,0,1.2) = {c}"))?;
    let mut r = rng(71);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(2..=4);
        let q = 1.0 + 3.0 * r.gen::<f64>();
        let k = r.gen::<f64>();
        let big_k = 0.25 + 3.75 * r.gen::<f64>();
        let delta = 1.0 + 0.5 * r.gen::<f64>();
        let radius = PI / big_k.sqrt() + 0.1 + 3.0 * r.gen::<f64>();
        let rho = (0.05 + 0.9 * r.gen::<f64>()) * (radius - PI / big_k.sqrt()) / (1.0 + delta);
        let mc = e(myers_constants(n, q, k, big_k, delta, radius, rho))?;
        ensure(mc.eps <= mc.eps1 && mc.eps <= mc.eps2, "ε exceeds ε₁ or ε₂")?;
        let r1 = rho / (2.0 * (1.0 + delta));
        let r0 = PI / big_k.sqrt() + rho;
        let r2 = 0.5 * (r0 / (1.0 + delta).powi(2)).min(r1);
        let eps1 = oracle_eps(n, q, k, big_k, delta, radius, rho, r1);
        let eps2 = oracle_eps(n, q, k, big_k, delta, r0, rho, r2);
        for (got, want) in [(mc.eps1, eps1), (mc.eps2, eps2), (mc.eps, eps1.min(eps2))] {
            worst = worst.max(((got - want) / want).abs());
        }
    }
    ensure(worst <= 1e-10, format!("constant chain mismatch {worst:e}"))?;
    Ok(format!("C(2,0,1.2,·) = 2·1.2⁸; 100 tuples agree to {worst:.1e}"))
}

fn volume_comparison() -> Outcome {
    let euclid = MetricModel::Euclidean { dim: 2 };
    let opts = VolumeOptions {
        count: 4000,
        radii: Some(vec![0.5, 1.0, 1.5]),
        directions: 50,
        ..Default::default()
    };
    let rep = e(volume_comparison_check(&euclid, 2.0, 0.0, 1.5, 0.5, 81, &opts))?;
    ensure(rep.pass, "euclidean volume comparison failed")?;
    let mut h_err: f64 = 0.0;
    for h in rep.inputs["h"].as_array().ok_or("missing h")? {
        let (v, se) = (h["h"].as_f64().unwrap(), h["standardError"].as_f64().unwrap());
        ensure((v - 1.0).abs() <= 3.0 * se, format!("h = {v} ± {se}"))?;
        h_err = h_err.max((v - 1.0).abs() / se);
    }
    let s = sphere(2);
    let rep = e(volume_comparison_check(&s, 2.0, 0.0, 1.5, 0.5, 82, &opts))?;
    ensure(rep.pass && rep.parts.iter().all(|p| p.asserted), "sphere volume comparison failed")?;
    let cap = |r: f64| 2.0 * PI * (1.0 - r.cos());
    for part in rep.parts.iter().filter(|p| p.check == "volumeRatio") {
        let (r1, r2) = (part.inputs["r1"].as_f64().unwrap(), part.inputs["r2"].as_f64().unwrap());
        let oracle = cap(r1) / cap(r2);
        ensure(
            (part.rhs - oracle).abs() <= 3.0 * part.standard_error + 1e-9,
            format!("ratio {} vs cap oracle {oracle}", part.rhs),
        )?;
    }
    let diff = rep.parts.iter().find(|p| p.check == "differentialInequality").ok_or("missing part")?;
    ensure(diff.lhs <= 5e-4, format!("differential inequality excess {}", diff.lhs))?;
    Ok(format!("h ≡ 1 within {h_err:.2} s.e.; sphere ratios pass with α = 0.5; Riccati excess {:.1e}", diff.lhs))
}

fn berwald_checks() -> Outcome {
    let mut out = Vec::new();
    for b in [0.2, 0.5] {
        let model = MetricModel::RandersFlat { b: vec![b, 0.0] };
        let rep = e(berwald_density_check(&model, 91, &BerwaldOptions::default()))?;
        let part = |name: &str| rep.parts.iter().find(|p| p.check == name).cloned().ok_or(format!("missing {name}"));
        let s = part("sCurvature")?;
        let g = part("chernYDerivative")?;
        let d = part("densityBounds")?;
        ensure(s.lhs <= 1e-7, format!("S-curvature {}", s.lhs))?;
        ensure(g.lhs <= 1e-6, format!("∂Γ/∂y {}", g.lhs))?;
        ensure(d.pass, format!("|log h| = {} > 3n log δ = {}", d.lhs, d.rhs))?;
        out.push(format!("|b|={b}: S {:.0e}, ∂Γ/∂y {:.0e}, |log h| {:.3} ≤ {:.3}", s.lhs, g.lhs, d.lhs, d.rhs));
    }
    Ok(out.join("; "))
}

fn chart_sample(model: &MetricModel, r: &mut ChaCha8Rng) -> TangentSample {
    let n = model.dim();
    loop {
        // Points within |x| < 0.9 keep the difference stencils away from the
        // boundary of the Poincaré chart.
        let x = random_vec(r, n, 0.9);
        if x.iter().map(|v| v * v).sum::<f64>() >= 0.81 {
            continue;
        }
        let y = random_vec(r, n, 1.0);
        let s = TangentSample::new(x, y);
        if model.check_sample(&s).is_ok() {
            return s;
        }
    }
}

fn derivative_integrity() -> Outcome {
    let models: Vec<MetricModel> = vec![
        MetricModel::Euclidean { dim: 3 },
        sphere(2),
        sphere(3),
        MetricModel::PoincareBall { dim: 2, k: 1.5 },
        MetricModel::RandersFlat { b: vec![0.3, -0.2, 0.1] },
        MetricModel::RandersPerturbed { base: PerturbedBase::Sphere { dim: 2, radius: 1.0 }, eps: 0.2, safe_radius: None },
        MetricModel::RandersPerturbed { base: PerturbedBase::Flat { dim: 3 }, eps: 0.2, safe_radius: None },
        MetricModel::BerwaldProduct { factor: Box::new(sphere(2)), drift: 0.3 },
        MetricModel::ReversibleQuartic { dim: 2, eps: 0.3 },
    ];
    let mut worst: f64 = 0.0;
    for model in &models {
        let n = model.dim();
        let mut r = rng(101);
        for _ in 0..500 {
            let s = chart_sample(model, &mut r);
            let jet = e(model.metric_jet(&s, 2))?;
            let f2 = |x: &[f64], y: &[f64]| model.f2::<f64>(x, y);
            let scale = f2(&s.x, &s.y).abs().max(1e-12);
            // Richardson-extrapolated central differences (fourth order).
            let richardson = |d: &dyn Fn(f64) -> f64, h: f64| (4.0 * d(h / 2.0) - d(h)) / 3.0;
            let shifted = |v: &[f64], i: usize, d: f64| {
                let mut w = v.to_vec();
                w[i] += d;
                w
            };
            let zero = vec![0u8; n];
            // Steps in y scale with |y| since F² is 2-homogeneous there.
            let hy = 1e-3 * s.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for i in 0..n {
                let dx = |h: f64| (f2(&shifted(&s.x, i, h), &s.y) - f2(&shifted(&s.x, i, -h), &s.y)) / (2.0 * h);
                let dy = |h: f64| (f2(&s.x, &shifted(&s.y, i, h)) - f2(&s.x, &shifted(&s.y, i, -h))) / (2.0 * h);
                let mut ei = zero.clone();
                ei[i] = 1;
                let jx = jet.partial(&ei, &zero);
                let jy = jet.partial(&zero, &ei);
                worst = worst.max((jx - richardson(&dx, 1e-3)).abs() / scale.max(jx.abs()));
                worst = worst.max((jy - richardson(&dy, hy)).abs() / scale.max(jy.abs()));
                for j in 0..n {
                    let dyy = |h: f64| {
                        let at = |a: f64, b: f64| f2(&s.x, &shifted(&shifted(&s.y, i, a), j, b));
                        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
                    };
                    let mut ey = zero.clone();
                    ey[i] += 1;
                    ey[j] += 1;
                    let jyy = jet.partial(&zero, &ey);
                    worst = worst.max((jyy - richardson(&dyy, hy)).abs() / scale.max(jyy.abs()));
                }
            }
        }
        ensure(worst <= 1e-5, format!("{}: jet vs difference {worst:e}", model.id()))?;
    }
    Ok(format!("{} families × 500 samples, largest relative gap {worst:.1e}", models.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("riemannian reduction", riemannian_reduction),
        ("myers equality case", myers_equality),
        ("distortion sandwich", distortion_sandwich),
        ("monotone polar quantity", monotone_quantity_check),
        ("segment inequality", segment_inequality),
        ("index form", index_form_check),
        ("constant chains", constant_chains),
        ("volume comparison", volume_comparison),
        ("berwald checks", berwald_checks),
        ("derivative integrity", derivative_integrity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let stdout = std::io::stdout();
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        let mut out = stdout.lock();
        match outcome {
            Ok(detail) => writeln!(out, "PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1).unwrap(),
            Err(why) => {
                failed += 1;
                writeln!(out, "FAIL {:>2} {name} ({secs:.1} s): {why}", i + 1).unwrap();
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

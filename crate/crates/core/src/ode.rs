//! Dormand–Prince 5(4) embedded Runge–Kutta pair with cubic Hermite dense
//! output.

use crate::error::{FinslerError, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Error-control settings.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step magnitude.
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            h_max: f64::INFINITY,
        }
    }
}

/// Outcome of one trial step.
pub struct TrialStep {
    pub y: Vec<f64>,
    /// Derivative at the new point (first-same-as-last stage).
    pub f: Vec<f64>,
    /// Scaled error norm; the step is acceptable when `≤ 1`.
    pub err: f64,
}

/// One Dormand–Prince step of size `h` from `(t, y)` with `f0 = f(t, y)`.
pub fn dopri_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: &[f64], h: f64, opts: &OdeOptions) -> Result<TrialStep>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f0.to_vec());
    let mut stage = vec![0.0; n];
    for s in 1..7 {
        for i in 0..n {
            let mut acc = y[i];
            for (j, kj) in k.iter().enumerate() {
                acc += h * A[s][j] * kj[i];
            }
            stage[i] = acc;
        }
        k.push(rhs(t + C[s] * h, &stage)?);
    }
    // Stage 7 is evaluated at the 5th-order solution.
    let y5 = stage.clone();
    let mut err: f64 = 0.0;
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            e += (B5[s] - B4[s]) * k[s][i];
        }
        let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        err = err.max((h * e).abs() / scale);
    }
    Ok(TrialStep {
        y: y5,
        f: k.pop().unwrap(),
        err,
    })
}

/// New step size from an error norm (order-5 controller with safety).
pub fn next_step(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

/// Initial step guess from the derivative scale.
pub fn initial_step(y: &[f64], f: &[f64], span: f64, opts: &OdeOptions) -> f64 {
    let d0 = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let d1 = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let h = if d1 < 1e-12 { span.abs() } else { 0.01 * (d0.max(1e-6) / d1) };
    h.min(span.abs()).min(opts.h_max).max(1e-6 * span.abs().min(1.0))
}

/// Cubic Hermite interpolation between `(t0, y0, f0)` and `(t1, y1, f1)`.
pub fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    if h == 0.0 {
        return y0.to_vec();
    }
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

/// Accepted integration node.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeNode {
    pub t: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1` (either direction),
/// landing exactly on each time in `stops`.
pub fn integrate<F>(mut rhs: F, t0: f64, y0: &[f64], t1: f64, stops: &[f64], opts: &OdeOptions) -> Result<Vec<OdeNode>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut targets: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|s| (s - t0) * dir > 0.0 && (t1 - s) * dir > 0.0)
        .collect();
    targets.push(t1);
    targets.sort_by(|a, b| (a * dir).total_cmp(&(b * dir)));
    let f0 = rhs(t0, y0)?;
    let mut nodes = vec![OdeNode {
        t: t0,
        y: y0.to_vec(),
        f: f0,
    }];
    let mut h = initial_step(y0, &nodes[0].f, t1 - t0, opts);
    let mut t = t0;
    for target in targets {
        while (target - t) * dir > 0.0 {
            let remaining = (target - t).abs();
            let last = nodes.last().unwrap();
            let hs = h.min(remaining).min(opts.h_max);
            let landing = hs >= remaining;
            let step = dopri_step(&mut rhs, t, &last.y, &last.f, dir * hs, opts);
            match step {
                Ok(trial) if trial.err <= 1.0 => {
                    t = if landing { target } else { t + dir * hs };
                    nodes.push(OdeNode {
                        t,
                        y: trial.y,
                        f: trial.f,
                    });
                    if !landing {
                        h = next_step(hs, trial.err);
                    }
                }
                Ok(trial) => h = next_step(hs, trial.err),
                Err(_) => h = 0.25 * hs,
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(FinslerError::StepUnderflow { t });
            }
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let opts = OdeOptions::default();
        let nodes = integrate(
            |_, y| Ok(vec![y[1], -y[0]]),
            0.0,
            &[0.0, 1.0],
            10.0,
            &[2.5],
            &opts,
        )
        .unwrap();
        let end = nodes.last().unwrap();
        assert_eq!(end.t, 10.0);
        assert!((end.y[0] - 10.0f64.sin()).abs() < 1e-8);
        assert!(nodes.iter().any(|n| n.t == 2.5));
        let back = integrate(|_, y| Ok(vec![y[1], -y[0]]), 0.0, &[0.0, 1.0], -1.0, &[], &opts).unwrap();
        assert!((back.last().unwrap().y[0] + 1.0f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| t * t * t - 2.0 * t;
        let dp = |t: f64| 3.0 * t * t - 2.0;
        let v = hermite(0.5, &[p(0.5)], &[dp(0.5)], 1.5, &[p(1.5)], &[dp(1.5)], 1.1);
        assert!((v[0] - p(1.1)).abs() < 1e-14);
    }
}

//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A [`Jet`] in `m` variables of degree `d` stores the Taylor coefficients
//! `∂^α f(p) / α!` for every multi-index `|α| ≤ d`. Arithmetic on jets is
//! exact up to truncation, so evaluating a closed-form expression on jets
//! yields all of its partial derivatives at the expansion point.
//!
//! Monomials are stored in graded order and the order within a degree does
//! not depend on the total degree, so the layout of degree `d'` is a prefix
//! of the layout of degree `d > d'`. Truncation is therefore a slice.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Largest number of jet variables supported.
pub const MAX_VARS: usize = 12;
/// Largest supported jet degree.
pub const MAX_DEGREE: usize = 6;

/// Monomial tables for one `(nvars, degree)` pair.
pub struct Layout {
    nvars: usize,
    degree: usize,
    exponents: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    mul: Vec<(u16, u16, u16)>,
    deriv: Vec<Vec<(u16, u16, f64)>>,
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("nvars", &self.nvars)
            .field("degree", &self.degree)
            .field("len", &self.exponents.len())
            .finish()
    }
}

#[allow(clippy::declare_interior_mutable_const)]
const EMPTY: OnceLock<Layout> = OnceLock::new();
#[allow(clippy::declare_interior_mutable_const)]
const EMPTY_ROW: [OnceLock<Layout>; MAX_DEGREE + 1] = [EMPTY; MAX_DEGREE + 1];
static LAYOUTS: [[OnceLock<Layout>; MAX_DEGREE + 1]; MAX_VARS + 1] = [EMPTY_ROW; MAX_VARS + 1];

impl Layout {
    /// Returns the shared layout for `nvars` variables and the given degree.
    pub fn get(nvars: usize, degree: usize) -> &'static Layout {
        assert!(
            nvars <= MAX_VARS && degree <= MAX_DEGREE,
            "jet layout ({nvars}, {degree}) out of range"
        );
        LAYOUTS[nvars][degree].get_or_init(|| Layout::build(nvars, degree))
    }

    fn build(nvars: usize, degree: usize) -> Layout {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        for d in 0..=degree {
            let mut current = vec![0u8; nvars];
            push_compositions(&mut exponents, &mut current, 0, d);
        }
        let index: HashMap<Vec<u8>, usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();

        let mut mul = Vec::new();
        for (i, a) in exponents.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in exponents.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > degree {
                    continue;
                }
                let c: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                mul.push((i as u16, j as u16, index[&c] as u16));
            }
        }

        let mut deriv = Vec::with_capacity(nvars);
        for v in 0..nvars {
            let mut table = Vec::new();
            for (i, e) in exponents.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut lowered = e.clone();
                lowered[v] -= 1;
                table.push((i as u16, index[&lowered] as u16, e[v] as f64));
            }
            deriv.push(table);
        }

        Layout {
            nvars,
            degree,
            exponents,
            index,
            mul,
            deriv,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of monomials.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exponents[i]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

fn push_compositions(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    let n = current.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if var == n - 1 {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k as u8;
        push_compositions(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

/// Truncated Taylor polynomial in several variables.
#[derive(Clone)]
pub struct Jet {
    layout: &'static Layout,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Jet(m={}, d={}, {:?})",
            self.layout.nvars, self.layout.degree, self.coeffs
        )
    }
}

impl Jet {
    pub fn constant(nvars: usize, degree: usize, value: f64) -> Jet {
        let layout = Layout::get(nvars, degree);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Jet { layout, coeffs }
    }

    /// The coordinate function `p_var + δ_var`.
    pub fn variable(nvars: usize, degree: usize, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(nvars, degree, value);
        if degree >= 1 {
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// Independent variables `point[i] + δ_i`, one jet per coordinate.
    pub fn variables(point: &[f64], degree: usize) -> Vec<Jet> {
        let m = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &p)| Jet::variable(m, degree, i, p))
            .collect()
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn degree(&self) -> usize {
        self.layout.degree
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of a monomial (zero when beyond the degree).
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        self.layout
            .index_of(exps)
            .map(|i| self.coeffs[i])
            .unwrap_or(0.0)
    }

    /// Partial derivative `∂^α f` at the expansion point.
    pub fn partial(&self, exps: &[u8]) -> f64 {
        let factorial: f64 = exps
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product();
        self.coeff(exps) * factorial
    }

    /// First partial derivative in `var`.
    pub fn d1(&self, var: usize) -> f64 {
        if self.layout.degree == 0 {
            return 0.0;
        }
        self.coeffs[1 + var]
    }

    /// Truncates to a lower degree.
    pub fn truncate(&self, degree: usize) -> Jet {
        if degree >= self.layout.degree {
            return self.clone();
        }
        let layout = Layout::get(self.layout.nvars, degree);
        Jet {
            layout,
            coeffs: self.coeffs[..layout.len()].to_vec(),
        }
    }

    /// Derivative with respect to `var`, as a jet of one lower degree.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.layout.degree >= 1, "cannot differentiate a degree-0 jet");
        let layout = Layout::get(self.layout.nvars, self.layout.degree - 1);
        let mut coeffs = vec![0.0; layout.len()];
        for &(src, dst, factor) in &self.layout.deriv[var] {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet { layout, coeffs }
    }

    /// Restricts to the listed variables (the others are set to their
    /// expansion point), renumbering them `0..vars.len()`.
    pub fn restrict(&self, vars: &[usize]) -> Jet {
        let layout = Layout::get(vars.len(), self.layout.degree);
        let mut full = vec![0u8; self.layout.nvars];
        let coeffs = (0..layout.len())
            .map(|i| {
                full.iter_mut().for_each(|e| *e = 0);
                for (k, &v) in vars.iter().enumerate() {
                    full[v] = layout.exponents[i][k];
                }
                self.coeff(&full)
            })
            .collect();
        Jet { layout, coeffs }
    }

    fn common(&self, other: &Jet) -> &'static Layout {
        debug_assert_eq!(self.layout.nvars, other.layout.nvars, "jet variable mismatch");
        if self.layout.degree <= other.layout.degree {
            self.layout
        } else {
            other.layout
        }
    }

    fn mul_ref(&self, other: &Jet) -> Jet {
        let layout = self.common(other);
        let mut coeffs = vec![0.0; layout.len()];
        let a = &self.coeffs;
        let b = &other.coeffs;
        for &(i, j, k) in &layout.mul {
            coeffs[k as usize] += a[i as usize] * b[j as usize];
        }
        Jet { layout, coeffs }
    }

    /// Applies a scalar function given its Taylor coefficients
    /// `series[k] = f^(k)(a0) / k!` at the value of `self`.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let d = self.layout.degree;
        debug_assert!(series.len() > d);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet {
            layout: self.layout,
            coeffs: vec![0.0; self.layout.len()],
        };
        out.coeffs[0] = series[d];
        for k in (0..d).rev() {
            out = out.mul_ref(&h);
            out.coeffs[0] += series[k];
        }
        out
    }

    fn series<F: Fn(usize) -> f64>(&self, f: F) -> Vec<f64> {
        (0..=self.layout.degree).map(f).collect()
    }
}

fn binomial_real(p: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (p - i as f64) / (i as f64 + 1.0))
}

fn inv_factorial(k: usize) -> f64 {
    1.0 / (1..=k).map(|i| i as f64).product::<f64>()
}

/// Minimal real-field interface shared by `f64` and [`Jet`], so that metric
/// formulas are written once and evaluated either numerically or on jets.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn constant_like(&self, c: f64) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powf(self, p: f64) -> Self;

    fn square(self) -> Self {
        self.clone() * self
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn constant_like(&self, c: f64) -> Self {
        let mut coeffs = vec![0.0; self.layout.len()];
        coeffs[0] = c;
        Jet {
            layout: self.layout,
            coeffs,
        }
    }
    fn sqrt(self) -> Self {
        self.powf(0.5)
    }
    fn recip(self) -> Self {
        let a = self.coeffs[0];
        let s = self.series(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / a.powi(k as i32 + 1)
        });
        self.compose(&s)
    }
    fn exp(self) -> Self {
        let e = self.coeffs[0].exp();
        let s = self.series(|k| e * inv_factorial(k));
        self.compose(&s)
    }
    fn ln(self) -> Self {
        let a = self.coeffs[0];
        let s = self.series(|k| {
            if k == 0 {
                a.ln()
            } else {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign / (k as f64 * a.powi(k as i32))
            }
        });
        self.compose(&s)
    }
    fn sin(self) -> Self {
        let (s0, c0) = self.coeffs[0].sin_cos();
        let s = self.series(|k| {
            let v = match k % 4 {
                0 => s0,
                1 => c0,
                2 => -s0,
                _ => -c0,
            };
            v * inv_factorial(k)
        });
        self.compose(&s)
    }
    fn cos(self) -> Self {
        let (s0, c0) = self.coeffs[0].sin_cos();
        let s = self.series(|k| {
            let v = match k % 4 {
                0 => c0,
                1 => -s0,
                2 => -c0,
                _ => s0,
            };
            v * inv_factorial(k)
        });
        self.compose(&s)
    }
    fn powf(self, p: f64) -> Self {
        let a = self.coeffs[0];
        let s = self.series(|k| binomial_real(p, k) * a.powf(p - k as f64));
        self.compose(&s)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let layout = self.common(&rhs);
        let coeffs = self.coeffs[..layout.len()]
            .iter()
            .zip(&rhs.coeffs[..layout.len()])
            .map(|(a, b)| a + b)
            .collect();
        Jet { layout, coeffs }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let layout = self.common(&rhs);
        let coeffs = self.coeffs[..layout.len()]
            .iter()
            .zip(&rhs.coeffs[..layout.len()])
            .map(|(a, b)| a - b)
            .collect();
        Jet { layout, coeffs }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        self.mul_ref(rhs)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(mut self, rhs: f64) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c /= rhs);
        self
    }
}

/// `Σ a_i b_i` for scalars; panics on empty input.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = a[0].clone() * b[0].clone();
    for (x, y) in a.iter().zip(b).skip(1) {
        acc = acc + x.clone() * y.clone();
    }
    acc
}

/// Solves `M X = I` for a square matrix of jets by Gauss–Jordan elimination
/// with pivoting on the constant term.
pub fn invert_jet_matrix(m: &[Vec<Jet>]) -> Option<Vec<Vec<Jet>>> {
    let n = m.len();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a[0][0].constant_like(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&r, &s| {
            a[r][col]
                .value()
                .abs()
                .total_cmp(&a[s][col].value().abs())
        })?;
        if a[pivot][col].value().abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone().recip();
        for j in 0..n {
            a[col][j] = &a[col][j] * &p;
            inv[col][j] = &inv[col][j] * &p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col].clone();
            if f.coeffs.iter().all(|&c| c == 0.0) {
                continue;
            }
            for j in 0..n {
                let t = &f * &a[col][j];
                a[r][j] = a[r][j].clone() - t;
                let t = &f * &inv[col][j];
                inv[r][j] = inv[r][j].clone() - t;
            }
        }
    }
    Some(inv)
}

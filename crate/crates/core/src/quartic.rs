//! Real roots of polynomials up to degree four.
//!
//! Roots are isolated by recursion on the derivative: between consecutive
//! real critical points the polynomial is monotone, so each interval holds at
//! most one simple root and is solved by safeguarded Newton/bisection. A
//! critical point where the polynomial touches zero within the imaginary-part
//! tolerance is reported as a (near-)multiple root. Leading coefficients that
//! vanish relative to the rest demote the polynomial to lower degree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Imaginary-part tolerance, relative to `1 + |re|`, under which a complex
/// pair is reported as a real (double) root.
pub const TOL_IMAG: f64 = 1e-9;

/// Relative distance under which two real roots are merged.
pub const TOL_DUP: f64 = 1e-7;

/// `a·u⁴ + b·u³ + c·u² + d·u + e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoeffs<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
}

impl<T: Real> QuarticCoeffs<T> {
    pub fn new(a: T, b: T, c: T, d: T, e: T) -> Self {
        Self { a, b, c, d, e }
    }

    /// Coefficients from highest to lowest degree.
    pub fn to_array(&self) -> [T; 5] {
        [self.a, self.b, self.c, self.d, self.e]
    }

    pub fn eval(&self, u: T) -> T {
        horner(&self.to_array(), u)
    }

    pub fn max_abs(&self) -> T {
        self.to_array().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Degree after dropping negligible leading coefficients.
    pub fn effective_degree(&self) -> usize {
        let coeffs = self.to_array();
        let scale = self.max_abs();
        if scale == T::zero() {
            return 0;
        }
        let tol = T::epsilon() * T::lit(16.0) * scale;
        let lead = coeffs.iter().position(|v| v.abs() > tol).unwrap_or(4);
        4 - lead
    }
}

/// All real roots of `q`, ascending, deduplicated.
///
/// The all-zero polynomial has no root set and is reported as
/// [`Error::DegeneratePolynomial`]; a nonzero constant has no roots.
pub fn solve_real_roots<T: Real>(q: &QuarticCoeffs<T>) -> Result<Vec<T>> {
    let coeffs = q.to_array();
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("quartic coefficients must be finite"));
    }
    let scale = q.max_abs();
    if scale == T::zero() {
        return Err(Error::DegeneratePolynomial);
    }
    let deg = q.effective_degree();
    let scaled: Vec<T> = coeffs[4 - deg..].iter().map(|&v| v / scale).collect();
    Ok(real_roots(&scaled))
}

#[inline]
fn horner<T: Real>(coeffs: &[T], u: T) -> T {
    coeffs.iter().fold(T::zero(), |acc, &c| acc * u + c)
}

fn derivative<T: Real>(coeffs: &[T]) -> Vec<T> {
    let n = coeffs.len() - 1;
    coeffs[..n]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * T::from_index(n - i))
        .collect()
}

/// Rounding bound of a Horner evaluation at `u`.
fn eval_error_bound<T: Real>(coeffs: &[T], u: T) -> T {
    let n = coeffs.len();
    let abs: Vec<T> = coeffs.iter().map(|c| c.abs()).collect();
    T::lit(4.0) * T::from_index(n) * T::epsilon() * horner(&abs, u.abs())
}

/// Real roots of a polynomial with nonzero leading coefficient.
fn real_roots<T: Real>(coeffs: &[T]) -> Vec<T> {
    let deg = coeffs.len().saturating_sub(1);
    match deg {
        0 => Vec::new(),
        1 => vec![-coeffs[1] / coeffs[0]],
        2 => quadratic_roots(coeffs[0], coeffs[1], coeffs[2]),
        _ => bracketed_roots(coeffs),
    }
}

fn quadratic_roots<T: Real>(a: T, b: T, c: T) -> Vec<T> {
    let two = T::lit(2.0);
    let disc = b * b - T::lit(4.0) * a * c;
    let vertex = -b / (two * a);
    if disc < T::zero() {
        let imag = (-disc).sqrt() / (two * a.abs());
        if imag < T::lit(TOL_IMAG) * (T::one() + vertex.abs()) {
            return vec![vertex];
        }
        return Vec::new();
    }
    if disc == T::zero() {
        return vec![vertex];
    }
    // Stable form avoiding cancellation in −b ± √disc.
    let sq = disc.sqrt();
    let qv = -(b + b.signum() * sq) / two;
    let mut roots = if qv == T::zero() {
        vec![T::zero(), T::zero()]
    } else {
        vec![qv / a, c / qv]
    };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    dedup(roots)
}

fn bracketed_roots<T: Real>(coeffs: &[T]) -> Vec<T> {
    let lead = coeffs[0];
    let bound = T::one()
        + coeffs[1..]
            .iter()
            .fold(T::zero(), |m, &c| m.max((c / lead).abs()));
    let dcoeffs = derivative(coeffs);
    let ddcoeffs = derivative(&dcoeffs);
    let crit: Vec<T> = real_roots(&dcoeffs)
        .into_iter()
        .filter(|c| c.abs() < bound)
        .collect();

    let mut knots = Vec::with_capacity(crit.len() + 2);
    knots.push(-bound);
    knots.extend(crit.iter().copied());
    knots.push(bound);

    let mut roots = Vec::new();
    let values: Vec<T> = knots.iter().map(|&u| horner(coeffs, u)).collect();
    for i in 0..knots.len() - 1 {
        let (l, r) = (knots[i], knots[i + 1]);
        let (pl, pr) = (values[i], values[i + 1]);
        if pl == T::zero() {
            roots.push(l);
            continue;
        }
        if pl * pr < T::zero() {
            roots.push(refine(coeffs, &dcoeffs, l, r, pl));
        }
    }
    if values[knots.len() - 1] == T::zero() {
        roots.push(knots[knots.len() - 1]);
    }

    // Touching critical points: a double root, or a complex pair whose
    // imaginary part is below tolerance. Near a simple extremum
    // p(u) ≈ p(c) + p''(c)/2 (u − c)², so the pair sits at c ± i√(2|p(c)/p''(c)|).
    for &c in &crit {
        let pc = horner(coeffs, c);
        let ppc = horner(&ddcoeffs, c);
        let delta = T::lit(TOL_IMAG) * (T::one() + c.abs());
        let touch = ppc.abs() / T::lit(2.0) * delta * delta + eval_error_bound(coeffs, c);
        if pc.abs() <= touch {
            roots.push(c);
        }
    }

    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut roots = dedup(roots);
    // Drop merged duplicates that are no longer roots (cannot happen for exact
    // data, kept cheap).
    roots.retain(|u| u.is_finite());
    roots
}

/// Safeguarded Newton iteration on a sign-changing bracket.
fn refine<T: Real>(coeffs: &[T], dcoeffs: &[T], mut lo: T, mut hi: T, plo: T) -> T {
    let neg_lo = plo < T::zero();
    let mut u = (lo + hi) / T::lit(2.0);
    for _ in 0..200 {
        let p = horner(coeffs, u);
        if p == T::zero() {
            return u;
        }
        if (p < T::zero()) == neg_lo {
            lo = u;
        } else {
            hi = u;
        }
        let width = hi - lo;
        if width <= T::lit(2.0) * T::epsilon() * lo.abs().max(hi.abs()) {
            break;
        }
        let dp = horner(dcoeffs, u);
        let newton = u - p / dp;
        u = if dp != T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::lit(2.0)
        };
    }
    u
}

fn dedup<T: Real>(sorted: Vec<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(sorted.len());
    for r in sorted {
        if let Some(&last) = out.last() {
            let tol = T::lit(TOL_DUP) * T::one().max(r.abs()).max(last.abs());
            if (r - last).abs() <= tol {
                continue;
            }
        }
        out.push(r);
    }
    out
}

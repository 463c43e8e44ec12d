//! Volume-aware maximization of one component's Q term.
//!
//! The closed-form updates hold the domain volume `V_m` fixed. On a finite
//! grid `V_m` depends on `(ρ, θ, σ)`, and ignoring that biases oblique lines
//! whose support is clipped by the image border. Here the exact term
//!
//! `F(ρ, θ, τ) = Σ w·(−τd²/2) − π·log Σ_D exp(−τd²/2)`,  `τ = 1/σ²`,
//!
//! is climbed by damped Newton steps from the better of the closed-form
//! estimate and the previous parameters, so every accepted step increases
//! the exact Q.

use crate::image::ImageDomain;
use crate::model::SIGMA_FLOOR;
use crate::scalar::Real;

use super::MomentSet;

const MAX_NEWTON: usize = 25;
const MAX_DAMPING_TRIALS: usize = 40;
/// Box around the starting shape: `|Δρ| ≤ TRUST_RHO·σ + 1/2`, the matching
/// rotation at the image diagonal, and `τ` within a factor `TRUST_TAU`.
const TRUST_RHO: f64 = 0.25;
const TRUST_TAU: f64 = 1.2;

/// Shape parameters of one component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Shape<T> {
    pub rho: T,
    pub theta: T,
    pub sigma: T,
}

/// Objective value with gradient and Hessian in `(ρ, θ, τ)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Evaluation<T> {
    pub value: T,
    pub grad: [T; 3],
    pub hess: [[T; 3]; 3],
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Refined<T> {
    pub shape: Shape<T>,
    pub value: T,
    pub clamped: bool,
}

/// Smallest `d²` over the rectangle `[1, W] × [1, H]`.
fn min_sq_distance<T: Real>(domain: ImageDomain, rho: T, theta: T) -> T {
    let (s, c) = theta.sin_cos();
    let (w, h) = (T::from_index(domain.width), T::from_index(domain.height));
    let corners = [(T::one(), T::one()), (w, T::one()), (T::one(), h), (w, h)];
    let ds: Vec<T> = corners.iter().map(|&(x, y)| x * c + y * s - rho).collect();
    let pos = ds.iter().any(|&d| d >= T::zero());
    let neg = ds.iter().any(|&d| d <= T::zero());
    if pos && neg {
        T::zero()
    } else {
        ds.iter().fold(T::infinity(), |m, &d| m.min(d * d))
    }
}

/// Data sums, expressed through the weighted moments.
struct DataTerms<T> {
    mass: T,
    d: T,
    d2: T,
    q: T,
    dq: T,
    q2_minus_dp: T,
}

fn data_terms<T: Real>(mom: &MomentSet<T>, rho: T, theta: T) -> DataTerms<T> {
    let (s, c) = theta.sin_cos();
    let two = T::lit(2.0);
    let ep = c * mom.m_x + s * mom.m_y;
    let eq = -s * mom.m_x + c * mom.m_y;
    let ep2 = c * c * mom.m_x2 + two * c * s * mom.m_xy + s * s * mom.m_y2;
    let eq2 = s * s * mom.m_x2 - two * c * s * mom.m_xy + c * c * mom.m_y2;
    let epq = c * s * (mom.m_y2 - mom.m_x2) + (c * c - s * s) * mom.m_xy;
    DataTerms {
        mass: mom.mass,
        d: ep - rho * mom.mass,
        d2: (ep2 - two * rho * ep + rho * rho * mom.mass).max(T::zero()),
        q: eq,
        dq: epq - rho * eq,
        q2_minus_dp: eq2 - (ep2 - rho * ep),
    }
}

/// Evaluates `F` with its derivatives. One pass over the grid.
pub(crate) fn evaluate<T: Real>(domain: ImageDomain, mom: &MomentSet<T>, shape: Shape<T>) -> Evaluation<T> {
    let Shape { rho, theta, sigma } = shape;
    let tau = T::one() / (sigma * sigma);
    let half = T::lit(0.5);
    let (s, c) = theta.sin_cos();
    let shift = -half * tau * min_sq_distance(domain, rho, theta);

    // Σ g·{1, d, d², d³, d⁴, q, dq, d²q, d³q, d²q², q²−dp}
    let mut acc = [T::zero(); 11];
    for (_, x, y) in domain.pixels() {
        let (xf, yf) = (T::from_index(x), T::from_index(y));
        let p = xf * c + yf * s;
        let q = -xf * s + yf * c;
        let d = p - rho;
        let g = (-half * tau * d * d - shift).exp();
        if g == T::zero() {
            continue;
        }
        let gd = g * d;
        let gd2 = gd * d;
        acc[0] = acc[0] + g;
        acc[1] = acc[1] + gd;
        acc[2] = acc[2] + gd2;
        acc[3] = acc[3] + gd2 * d;
        acc[4] = acc[4] + gd2 * d * d;
        acc[5] = acc[5] + g * q;
        acc[6] = acc[6] + gd * q;
        acc[7] = acc[7] + gd2 * q;
        acc[8] = acc[8] + gd2 * d * q;
        acc[9] = acc[9] + gd2 * q * q;
        acc[10] = acc[10] + g * (q * q - d * p);
    }
    let z = acc[0];
    let e: Vec<T> = acc.iter().map(|&v| v / z).collect();
    let (ed, ed2, ed3, ed4, eq, edq, ed2q, ed3q, ed2q2, eq2dp) =
        (e[1], e[2], e[3], e[4], e[5], e[6], e[7], e[8], e[9], e[10]);
    let log_s = shift + z.ln();

    let w = data_terms(mom, rho, theta);
    let pi = w.mass;
    let value = -half * tau * w.d2 - pi * log_s;

    let grad = [
        tau * (w.d - pi * ed),
        -tau * (w.dq - pi * edq),
        -half * (w.d2 - pi * ed2),
    ];

    let var_d = ed2 - ed * ed;
    let cov_d_dq = ed2q - ed * edq;
    let cov_d_d2 = ed3 - ed * ed2;
    let var_dq = ed2q2 - edq * edq;
    let cov_dq_d2 = ed3q - edq * ed2;
    let var_d2 = ed4 - ed2 * ed2;
    let quarter = T::lit(0.25);

    // Σw ∇²ψ − π (E_g ∇²ψ + Cov_g ∇ψ), ψ = −τd²/2
    let h_rr = -pi * tau * tau * var_d;
    let h_rt = tau * (w.q - pi * eq) + pi * tau * tau * cov_d_dq;
    let h_rs = (w.d - pi * ed) + pi * half * tau * cov_d_d2;
    let h_tt = -tau * (w.q2_minus_dp - pi * eq2dp) - pi * tau * tau * var_dq;
    let h_ts = -(w.dq - pi * edq) - pi * half * tau * cov_dq_d2;
    let h_ss = -pi * quarter * var_d2;
    Evaluation {
        value,
        grad,
        hess: [[h_rr, h_rt, h_rs], [h_rt, h_tt, h_ts], [h_rs, h_ts, h_ss]],
    }
}

/// Solves the 3×3 system `a·x = b` by Cholesky; `None` unless `a` is
/// positive definite.
fn cholesky_solve<T: Real>(a: [[T; 3]; 3], b: [T; 3]) -> Option<[T; 3]> {
    let mut l = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i][i] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let mut y = [T::zero(); 3];
    for i in 0..3 {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = [T::zero(); 3];
    for i in (0..3).rev() {
        let mut sum = y[i];
        for k in i + 1..3 {
            sum = sum - l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

/// Climbs `F` from the better of `candidates`.
pub(crate) fn refine<T: Real>(domain: ImageDomain, mom: &MomentSet<T>, candidates: &[Shape<T>]) -> Refined<T> {
    let floor = T::lit(SIGMA_FLOOR);
    let tau_max = T::one() / (floor * floor);
    let mut best: Option<(Shape<T>, Evaluation<T>)> = None;
    for &c in candidates {
        let c = Shape {
            sigma: c.sigma.max(floor),
            ..c
        };
        let ev = evaluate(domain, mom, c);
        if !ev.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| ev.value > b.value) {
            best = Some((c, ev));
        }
    }
    let Some((mut shape, mut ev)) = best else {
        let shape = candidates[0];
        return Refined {
            shape,
            value: T::neg_infinity(),
            clamped: shape.sigma <= floor,
        };
    };
    let origin = shape;
    let reach = origin.sigma * T::lit(TRUST_RHO) + T::lit(0.5);
    let turn = reach / T::lit(domain.diagonal());
    let tau0 = T::one() / (origin.sigma * origin.sigma);
    let (tau_lo, tau_hi) = (tau0 * T::lit(TRUST_TAU).recip(), (tau0 * T::lit(TRUST_TAU)).min(tau_max));
    let mut clamped = false;
    let mut lambda = T::lit(1e-9);
    let tol = T::epsilon() * T::lit(64.0);

    for _ in 0..MAX_NEWTON {
        let neg_h = [
            [-ev.hess[0][0], -ev.hess[0][1], -ev.hess[0][2]],
            [-ev.hess[1][0], -ev.hess[1][1], -ev.hess[1][2]],
            [-ev.hess[2][0], -ev.hess[2][1], -ev.hess[2][2]],
        ];
        let diag: [T; 3] = [0, 1, 2].map(|i| neg_h[i][i].abs().max(T::lit(1e-300)));
        let tau = T::one() / (shape.sigma * shape.sigma);
        let mut accepted = false;
        for _ in 0..MAX_DAMPING_TRIALS {
            let mut a = neg_h;
            for i in 0..3 {
                a[i][i] = a[i][i] + lambda * diag[i];
            }
            let Some(step) = cholesky_solve(a, ev.grad) else {
                lambda = lambda * T::lit(10.0);
                continue;
            };
            let new_tau = (tau + step[2]).max(tau_lo).min(tau_hi);
            let hit_floor = new_tau >= tau_max;
            let trial = Shape {
                rho: (shape.rho + step[0]).max(origin.rho - reach).min(origin.rho + reach),
                theta: (shape.theta + step[1]).max(origin.theta - turn).min(origin.theta + turn),
                sigma: T::one() / new_tau.sqrt(),
            };
            let tev = evaluate(domain, mom, trial);
            if tev.value.is_finite() && tev.value >= ev.value {
                let gain = tev.value - ev.value;
                shape = trial;
                ev = tev;
                clamped = hit_floor;
                lambda = (lambda * T::lit(0.1)).max(T::lit(1e-12));
                accepted = gain > tol * (T::one() + ev.value.abs());
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted {
            break;
        }
    }
    Refined {
        shape,
        value: ev.value,
        clamped,
    }
}

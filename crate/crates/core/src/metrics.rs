//! Error measures between a ground-truth and an estimated mixture.

use serde::{Deserialize, Serialize};

use crate::em::MixtureState;
use crate::model::{width_from_sigma, LineParams};
use crate::scalar::Real;

/// Smallest angle between two undirected line orientations, in `[0, π/2]`.
pub fn angular_distance<T: Real>(a: T, b: T) -> T {
    let pi = T::PI();
    let mut d = (a - b).abs() % pi;
    if d > pi - d {
        d = pi - d;
    }
    d
}

/// `est` rewritten as `(±ρ, θ + kπ)` with the angle closest to `reference`,
/// so radii of the two lines are directly comparable.
pub fn align_line<T: Real>(est: LineParams<T>, reference: T) -> LineParams<T> {
    let pi = T::PI();
    let k = ((reference - est.theta) / pi).round();
    let odd = (k.abs() % T::lit(2.0)) == T::one();
    LineParams {
        rho: if odd { -est.rho } else { est.rho },
        theta: est.theta + k * pi,
    }
}

/// Centerline discrepancy used for matching: `|Δρ| + diag·Δθ`.
pub fn line_cost<T: Real>(truth: LineParams<T>, est: LineParams<T>, diag: T) -> T {
    let a = align_line(est, truth.theta);
    (a.rho - truth.rho).abs() + diag * angular_distance(truth.theta, est.theta)
}

/// Assignment of estimated components to truth components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    /// For each truth component, the matched estimate.
    pub truth_to_est: Vec<Option<usize>>,
    pub unmatched_est: Vec<usize>,
}

/// Minimum-cost assignment, exhaustive over injective maps. Ties resolve to
/// the lexicographically first assignment.
pub fn match_components<T: Real>(truth: &MixtureState<T>, est: &MixtureState<T>, diag: T) -> Matching {
    let (nt, ne) = (truth.len(), est.len());
    let cost: Vec<Vec<T>> = truth
        .components
        .iter()
        .map(|t| est.components.iter().map(|e| line_cost(t.line, e.line, diag)).collect())
        .collect();
    let truth_to_est: Vec<Option<usize>> = if nt <= ne {
        best_assignment(nt, ne, |i, j| cost[i][j]).into_iter().map(Some).collect()
    } else {
        let est_to_truth = best_assignment(ne, nt, |j, i| cost[i][j]);
        let mut out = vec![None; nt];
        for (j, &i) in est_to_truth.iter().enumerate() {
            out[i] = Some(j);
        }
        out
    };
    let unmatched_est = (0..ne).filter(|j| !truth_to_est.contains(&Some(*j))).collect();
    Matching {
        truth_to_est,
        unmatched_est,
    }
}

/// Rows `0..n` mapped injectively into columns `0..m` (`n ≤ m`).
fn best_assignment<T: Real>(n: usize, m: usize, cost: impl Fn(usize, usize) -> T) -> Vec<usize> {
    fn search<T: Real>(
        row: usize,
        n: usize,
        m: usize,
        cost: &dyn Fn(usize, usize) -> T,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        acc: T,
        best: &mut (T, Vec<usize>),
    ) {
        if acc >= best.0 && !best.1.is_empty() {
            return;
        }
        if row == n {
            *best = (acc, cur.clone());
            return;
        }
        for j in 0..m {
            if used[j] {
                continue;
            }
            used[j] = true;
            cur.push(j);
            search(row + 1, n, m, cost, used, cur, acc + cost(row, j), best);
            cur.pop();
            used[j] = false;
        }
    }
    let mut best = (T::infinity(), Vec::new());
    let mut used = vec![false; m];
    search(0, n, m, &cost, &mut used, &mut Vec::with_capacity(n), T::zero(), &mut best);
    best.1
}

/// Absolute errors of one matched pair. Angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub truth: usize,
    pub est: usize,
    pub pi: f64,
    pub theta_deg: f64,
    pub rho: f64,
    pub sigma: f64,
    pub width: f64,
    /// Width error relative to the true width.
    pub rel_width: f64,
}

/// `√(Σ Δ²/M)` over matched components, per parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamRmse {
    pub pi: f64,
    pub theta_deg: f64,
    pub rho: f64,
    pub sigma: f64,
    pub width: f64,
    pub rel_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub components: Vec<ComponentError>,
    pub rmse: ParamRmse,
    pub matching: Matching,
    pub unmatched_truth: Vec<usize>,
}

impl ErrorReport {
    /// Largest AE across matched components and the five parameters
    /// (θ in radians).
    pub fn max_abs_error(&self) -> f64 {
        self.components
            .iter()
            .map(|c| {
                c.pi.max(c.theta_deg.to_radians())
                    .max(c.rho)
                    .max(c.sigma)
                    .max(c.width)
            })
            .fold(0.0, f64::max)
    }
}

pub fn compute_errors<T: Real>(truth: &MixtureState<T>, est: &MixtureState<T>, matching: &Matching) -> ErrorReport {
    let mut components = Vec::new();
    let mut unmatched_truth = Vec::new();
    for (i, m) in matching.truth_to_est.iter().enumerate() {
        let Some(j) = *m else {
            unmatched_truth.push(i);
            continue;
        };
        let t = truth.components[i];
        let e = est.components[j];
        let aligned = align_line(e.line, t.line.theta);
        let wt = width_from_sigma(t.sigma).map(|w| w.as_f64()).unwrap_or(f64::NAN);
        let we = width_from_sigma(e.sigma).map(|w| w.as_f64()).unwrap_or(f64::NAN);
        let dw = (wt - we).abs();
        components.push(ComponentError {
            truth: i,
            est: j,
            pi: (t.pi - e.pi).abs().as_f64(),
            theta_deg: angular_distance(t.line.theta, e.line.theta).as_f64().to_degrees(),
            rho: (aligned.rho - t.line.rho).abs().as_f64(),
            sigma: (t.sigma - e.sigma).abs().as_f64(),
            width: dw,
            rel_width: dw / wt,
        });
    }
    let rmse = rmse_of(&components);
    ErrorReport {
        components,
        rmse,
        matching: matching.clone(),
        unmatched_truth,
    }
}

/// Matches then scores.
pub fn evaluate<T: Real>(truth: &MixtureState<T>, est: &MixtureState<T>, diag: T) -> ErrorReport {
    let m = match_components(truth, est, diag);
    compute_errors(truth, est, &m)
}

pub fn rmse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn rmse_of(cs: &[ComponentError]) -> ParamRmse {
    let col = |f: fn(&ComponentError) -> f64| rmse(&cs.iter().map(f).collect::<Vec<_>>());
    ParamRmse {
        pi: col(|c| c.pi),
        theta_deg: col(|c| c.theta_deg),
        rho: col(|c| c.rho),
        sigma: col(|c| c.sigma),
        width: col(|c| c.width),
        rel_width: col(|c| c.rel_width),
    }
}

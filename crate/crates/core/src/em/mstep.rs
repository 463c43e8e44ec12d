//! Closed-form M-step.
//!
//! The component volumes `V_m` are held at the values used by the preceding
//! E-step, so within one M-step the objective separates per component and
//! every closed form below is its exact coordinate-wise maximizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentParams, LineParams, SIGMA_FLOOR};
use crate::quartic::{solve_real_roots, QuarticCoeffs};
use crate::scalar::{sorted_sum, CompensatedSum, Real, TwoFold};

use super::refine::{refine, Shape};
use super::{MixtureState, MomentSet, NormalizedImage, Responsibilities};

/// Proportion below which a component is treated as collapsed and frozen.
pub const PI_FLOOR: f64 = 1e-6;

/// Candidate roots beyond this magnitude are treated as a vertical normal.
const FAR_ROOT: f64 = 1e8;

/// Responsibility-weighted moments of component `m`.
pub fn compute_moments<T: Real>(h: &NormalizedImage<T>, z: &Responsibilities<T>, m: usize) -> MomentSet<T> {
    let mut acc = [CompensatedSum::<T>::new(); 6];
    for (i, x, y) in h.domain().pixels() {
        let w = z.at_index(i, m) * h.values()[i];
        if w == T::zero() {
            continue;
        }
        let (xf, yf) = (T::from_index(x), T::from_index(y));
        acc[0].add(w);
        acc[1].add(w * xf);
        acc[2].add(w * yf);
        acc[3].add(w * xf * yf);
        acc[4].add(w * xf * xf);
        acc[5].add(w * yf * yf);
    }
    MomentSet {
        mass: acc[0].value(),
        m_x: acc[1].value(),
        m_y: acc[2].value(),
        m_xy: acc[3].value(),
        m_x2: acc[4].value(),
        m_y2: acc[5].value(),
    }
}

/// New proportions `π_m = Σ z·h`.
pub fn m_step_pi<T: Real>(h: &NormalizedImage<T>, z: &Responsibilities<T>) -> Vec<T> {
    let m = z.components();
    let mut acc = vec![CompensatedSum::<T>::new(); m];
    for (i, &hv) in h.values().iter().enumerate() {
        for (k, a) in acc.iter_mut().enumerate() {
            a.add(z.at_index(i, k) * hv);
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Weighted mean projection of the mass onto the normal direction `θ`.
pub fn m_step_rho<T: Real>(
    h: &NormalizedImage<T>,
    z: &Responsibilities<T>,
    m: usize,
    theta: T,
    pi: T,
) -> Result<T> {
    if !(pi >= T::lit(PI_FLOOR)) {
        return Err(Error::CollapsedComponent(m));
    }
    let (s, c) = theta.sin_cos();
    let mut acc = CompensatedSum::new();
    for (i, x, y) in h.domain().pixels() {
        let w = z.at_index(i, m) * h.values()[i];
        acc.add(w * (T::from_index(x) * c + T::from_index(y) * s));
    }
    Ok(acc.value() / pi)
}

/// Result of the scale update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaEstimate<T> {
    /// Scale after applying [`SIGMA_FLOOR`].
    pub sigma: T,
    /// Weighted RMS distance before clamping.
    pub raw: T,
    pub clamped: bool,
    /// `Σ z·h·d²`.
    pub sq_sum: T,
}

/// Weighted RMS signed distance of the mass to the line `(ρ, θ)`.
pub fn m_step_sigma<T: Real>(
    h: &NormalizedImage<T>,
    z: &Responsibilities<T>,
    m: usize,
    theta: T,
    rho: T,
    pi: T,
) -> Result<SigmaEstimate<T>> {
    if !(pi >= T::lit(PI_FLOOR)) {
        return Err(Error::CollapsedComponent(m));
    }
    let line = LineParams::new(rho, theta);
    let (s, c) = theta.sin_cos();
    let mut acc = CompensatedSum::new();
    for (i, x, y) in h.domain().pixels() {
        let w = z.at_index(i, m) * h.values()[i];
        if w == T::zero() {
            continue;
        }
        let d = T::from_index(x) * c + T::from_index(y) * s - line.rho;
        acc.add(w * d * d);
    }
    Ok(sigma_from_sq_sum(acc.value(), pi))
}

fn sigma_from_sq_sum<T: Real>(sq_sum: T, pi: T) -> SigmaEstimate<T> {
    let raw = (sq_sum / pi).max(T::zero()).sqrt();
    let floor = T::lit(SIGMA_FLOOR);
    SigmaEstimate {
        sigma: raw.max(floor),
        raw,
        clamped: !(raw >= floor),
        sq_sum,
    }
}

/// Coefficients of the product of the two sign branches of the angle
/// stationarity condition, as a quartic in `u = tanθ`.
pub fn quartic_coefficients<T: Real>(mom: &MomentSet<T>, rho: T) -> QuarticCoeffs<T> {
    let f = TwoFold::new;
    let two = T::lit(2.0);
    let r2 = TwoFold::product(rho, rho);
    let diff = f(mom.m_x2).sub(f(mom.m_y2));
    let mxy2 = TwoFold::product(mom.m_xy, mom.m_xy);
    let mx2 = TwoFold::product(mom.m_x, mom.m_x);
    let my2 = TwoFold::product(mom.m_y, mom.m_y);
    let mxmy = TwoFold::product(mom.m_x, mom.m_y);
    let cross = f(mom.m_xy).mul(diff);
    let r2_mxmy = r2.mul(mxmy).scale(two);
    QuarticCoeffs {
        a: mxy2.sub(r2.mul(mx2)).value(),
        b: cross.scale(two).add(r2_mxmy).value(),
        c: diff.mul(diff).sub(mxy2.scale(two)).sub(r2.mul(mx2.add(my2))).value(),
        d: r2_mxmy.sub(cross.scale(two)).value(),
        e: mxy2.sub(r2.mul(my2)).value(),
    }
}

/// `Σ z·h·(−x·sinθ + y·cosθ)(x·cosθ + y·sinθ − ρ)`, proportional to ∂Q/∂θ.
pub fn theta_stationarity_residual<T: Real>(mom: &MomentSet<T>, rho: T, theta: T) -> T {
    let (s, c) = theta.sin_cos();
    s * c * (mom.m_y2 - mom.m_x2) + mom.m_xy * (c * c - s * s) + rho * (s * mom.m_x - c * mom.m_y)
}

/// Branch equations: `sign = +1` for `cosθ > 0`, `−1` for `cosθ < 0`.
fn branch_value<T: Real>(mom: &MomentSet<T>, rho: T, u: T, sign: T) -> T {
    (mom.m_x2 - mom.m_y2) * u - mom.m_xy * (T::one() - u * u)
        - sign * rho * (mom.m_x * u - mom.m_y) * (T::one() + u * u).sqrt()
}

/// Outcome of the angle update of one component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaChoice<T> {
    pub theta: T,
    /// Radius of the chosen line; sign-flipped when the root belongs to the
    /// `cosθ < 0` branch.
    pub rho: T,
    pub sigma: T,
    /// Component Q contribution (normalized by `N_v`) at the choice.
    pub q: T,
    pub candidates: usize,
    /// No admissible root: previous angle kept.
    pub fallback: bool,
}

fn component_q<T: Real>(mass: T, sq_sum: T, sigma: T, log_volume: T) -> T {
    if mass == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let sqrt_2pi = (two * T::PI()).sqrt();
    mass * mass.ln() - mass * (log_volume + (sigma * sqrt_2pi).ln()) - sq_sum / (two * sigma * sigma)
}

/// Angle update: the real roots of the quartic are mapped back to angles,
/// each is paired with its optimal scale, and the pair maximizing the
/// component's Q term wins. Ties go to the smallest `|θ|`.
pub fn m_step_theta<T: Real>(mom: &MomentSet<T>, rho: T, prev_theta: T, log_volume: T) -> ThetaChoice<T> {
    let coeffs = quartic_coefficients(mom, rho);
    let roots = solve_real_roots(&coeffs).unwrap_or_default();
    let far = T::lit(FAR_ROOT);

    let mut lines: Vec<LineParams<T>> = Vec::with_capacity(6);
    for &u in &roots {
        if u.abs() > far {
            continue;
        }
        let theta = u.atan();
        let p_pos = branch_value(mom, rho, u, T::one()).abs();
        let p_neg = branch_value(mom, rho, u, -T::one()).abs();
        if p_pos <= p_neg {
            lines.push(LineParams::new(rho, theta));
        } else {
            lines.push(LineParams::new(rho, theta + T::PI()).canonical());
        }
    }
    // A vanishing quartic term or only huge roots mean the optimum may sit at
    // the vertical normal, which u = tanθ cannot represent.
    if lines.is_empty() || coeffs.effective_degree() < 4 {
        let half = T::FRAC_PI_2();
        lines.push(LineParams::new(rho, half));
        lines.push(LineParams::new(-rho, half));
    }

    let mut best: Option<ThetaChoice<T>> = None;
    for line in &lines {
        let sq = mom.squared_distance_sum(line.rho, line.theta);
        let est = sigma_from_sq_sum(sq, mom.mass);
        let q = component_q(mom.mass, sq, est.sigma, log_volume);
        if !q.is_finite() {
            continue;
        }
        let cand = ThetaChoice {
            theta: line.theta,
            rho: line.rho,
            sigma: est.sigma,
            q,
            candidates: lines.len(),
            fallback: false,
        };
        best = match best {
            None => Some(cand),
            Some(b) => {
                let tie = T::lit(1e-14) * (T::one() + b.q.abs());
                if q > b.q + tie || ((q - b.q).abs() <= tie && line.theta.abs() < b.theta.abs()) {
                    Some(cand)
                } else {
                    Some(b)
                }
            }
        };
    }

    best.unwrap_or_else(|| {
        let sq = mom.squared_distance_sum(rho, prev_theta);
        let est = sigma_from_sq_sum(sq, mom.mass);
        ThetaChoice {
            theta: prev_theta,
            rho,
            sigma: est.sigma,
            q: component_q(mom.mass, sq, est.sigma, log_volume),
            candidates: 0,
            fallback: true,
        }
    })
}

/// How the shape parameters are updated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MStepKind {
    /// Closed forms only, with the component volumes held at their E-step
    /// values.
    ClosedForm,
    /// Closed forms followed by damped Newton ascent on the exact Q term,
    /// whose volume normalizer moves with `(ρ, θ, σ)`.
    VolumeAware,
    /// Closed-form iterations until convergence, then volume-aware ones
    /// until convergence again. A single step of this kind is volume-aware.
    #[default]
    Polished,
}

impl std::str::FromStr for MStepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Self::ClosedForm),
            "volume-aware" => Ok(Self::VolumeAware),
            "polished" => Ok(Self::Polished),
            _ => Err(Error::invalid(format!("unknown M-step '{s}' (closed-form|volume-aware|polished)"))),
        }
    }
}

/// Result of one M-step.
#[derive(Clone, Debug, PartialEq)]
pub struct MStepOutcome<T> {
    pub state: MixtureState<T>,
    /// `Q(Φ⁽ᵗ⁺¹⁾ | Φ⁽ᵗ⁾) / N_v`. Volumes are those of the new parameters
    /// for [`MStepKind::VolumeAware`] and the E-step ones otherwise.
    pub q: T,
    pub sigma_clamps: usize,
    pub theta_fallbacks: usize,
    pub collapsed: Vec<usize>,
    /// Per-component angle-stationarity residual at the chosen angle,
    /// divided by the component mass.
    pub theta_residuals: Vec<T>,
}

/// Full M-step: proportions, radii from the previous angles, angles from the
/// quartic with the new radii, then scales on the final lines. With
/// [`MStepKind::VolumeAware`] the shape is then refined on the exact Q term
/// starting from the better of that estimate and the previous parameters.
pub fn m_step<T: Real>(
    h: &NormalizedImage<T>,
    z: &Responsibilities<T>,
    state: &MixtureState<T>,
    kind: MStepKind,
) -> Result<MStepOutcome<T>> {
    let m = state.len();
    if z.components() != m {
        return Err(Error::invalid("responsibilities do not match the mixture size"));
    }
    let mut next = Vec::with_capacity(m);
    let mut q_terms = Vec::with_capacity(m);
    let mut sigma_clamps = 0;
    let mut theta_fallbacks = 0;
    let mut collapsed = Vec::new();
    let mut residuals = Vec::with_capacity(m);

    for k in 0..m {
        let prev = state.components[k];
        let mom = compute_moments(h, z, k);
        let pi = mom.mass;
        let log_v = z.log_volumes.get(k).copied().unwrap_or_else(T::zero);
        if !(pi >= T::lit(PI_FLOOR)) {
            collapsed.push(k);
            let frozen = ComponentParams {
                pi: pi.max(T::zero()),
                ..prev
            };
            next.push(frozen);
            residuals.push(T::zero());
            continue;
        }
        let (s, c) = prev.line.theta.sin_cos();
        let rho = (c * mom.m_x + s * mom.m_y) / pi;
        let choice = m_step_theta(&mom, rho, prev.line.theta, log_v);
        if choice.fallback {
            theta_fallbacks += 1;
        }
        let est = m_step_sigma(h, z, k, choice.theta, choice.rho, pi)?;
        residuals.push(theta_stationarity_residual(&mom, choice.rho, choice.theta) / pi);
        let (line, sigma) = match kind {
            MStepKind::ClosedForm => {
                if est.clamped {
                    sigma_clamps += 1;
                }
                q_terms.push(component_q(pi, est.sq_sum, est.sigma, log_v));
                (LineParams::new(choice.rho, choice.theta), est.sigma)
            }
            MStepKind::VolumeAware | MStepKind::Polished => {
                let closed = Shape {
                    rho: choice.rho,
                    theta: choice.theta,
                    sigma: est.sigma,
                };
                let previous = Shape {
                    rho: prev.line.rho,
                    theta: prev.line.theta,
                    sigma: prev.sigma,
                };
                let r = refine(h.domain(), &mom, &[closed, previous]);
                if r.clamped {
                    sigma_clamps += 1;
                }
                q_terms.push(pi * pi.ln() + r.value);
                (LineParams::new(r.shape.rho, r.shape.theta).canonical(), r.shape.sigma)
            }
        };
        next.push(ComponentParams {
            line,
            sigma,
            pi: pi.min(T::one()),
        });
    }

    let q = sorted_sum(&mut q_terms);
    let mut out = MixtureState::new(next)?;
    out.iteration = state.iteration + 1;
    out.q_history = state.q_history.clone();
    out.q_history.push(q);
    out.q_value = Some(q);
    Ok(MStepOutcome {
        state: out,
        q,
        sigma_clamps,
        theta_fallbacks,
        collapsed,
        theta_residuals: residuals,
    })
}

/// Expected complete-data log-likelihood `Q` (unnormalized, i.e. multiplied
/// by `N_v`) of `state` under the posteriors `z`, with component volumes
/// given as `log_volumes`.
pub fn q_function<T: Real>(
    h: &NormalizedImage<T>,
    z: &Responsibilities<T>,
    state: &MixtureState<T>,
    log_volumes: &[T],
) -> Result<T> {
    let m = state.len();
    if z.components() != m || log_volumes.len() != m {
        return Err(Error::invalid("q_function: size mismatch"));
    }
    let two = T::lit(2.0);
    let sqrt_2pi = (two * T::PI()).sqrt();
    let mut terms = Vec::with_capacity(m);
    for (k, comp) in state.components.iter().enumerate() {
        let log_pi = comp.pi.ln();
        let log_norm = log_volumes[k] + (comp.sigma * sqrt_2pi).ln();
        let inv = T::one() / (two * comp.sigma * comp.sigma);
        let (s, c) = comp.line.theta.sin_cos();
        let mut acc = CompensatedSum::new();
        for (i, x, y) in h.domain().pixels() {
            let w = z.at_index(i, k) * h.values()[i];
            if w == T::zero() {
                continue;
            }
            let d = T::from_index(x) * c + T::from_index(y) * s - comp.line.rho;
            let term = w * (log_pi - log_norm - d * d * inv);
            if !term.is_finite() {
                return Err(Error::NonFinite {
                    x,
                    y,
                    component: k,
                    what: "Q integrand",
                });
            }
            acc.add(term);
        }
        terms.push(acc.value());
    }
    Ok(sorted_sum(&mut terms) * h.mass())
}

/// Analytic `(∂Q̃/∂ρ_m, ∂Q̃/∂σ_m)` of the normalized `Q̃ = Q/N_v` at `state`,
/// with each volume moving with its component. Matches finite differences
/// of [`q_function`] evaluated with the volumes of the perturbed state.
pub fn q_partials<T: Real>(h: &NormalizedImage<T>, z: &Responsibilities<T>, state: &MixtureState<T>) -> Vec<(T, T)> {
    partials(h, z, state, true)
}

/// As [`q_partials`] with the volumes held fixed.
pub fn q_partials_fixed_volume<T: Real>(
    h: &NormalizedImage<T>,
    z: &Responsibilities<T>,
    state: &MixtureState<T>,
) -> Vec<(T, T)> {
    partials(h, z, state, false)
}

fn partials<T: Real>(h: &NormalizedImage<T>, z: &Responsibilities<T>, state: &MixtureState<T>, moving: bool) -> Vec<(T, T)> {
    let two = T::lit(2.0);
    state
        .components
        .iter()
        .enumerate()
        .map(|(k, comp)| {
            let (s, c) = comp.line.theta.sin_cos();
            let sg = comp.sigma;
            let mut mass = CompensatedSum::new();
            let mut first = CompensatedSum::new();
            let mut second = CompensatedSum::new();
            let mut g0 = CompensatedSum::new();
            let mut g1 = CompensatedSum::new();
            let mut g2 = CompensatedSum::new();
            for (i, x, y) in h.domain().pixels() {
                let w = z.at_index(i, k) * h.values()[i];
                let d = T::from_index(x) * c + T::from_index(y) * s - comp.line.rho;
                mass.add(w);
                first.add(w * d);
                second.add(w * d * d);
                if moving {
                    let g = (-(d * d) / (two * sg * sg)).exp();
                    g0.add(g);
                    g1.add(g * d);
                    g2.add(g * d * d);
                }
            }
            let (mean_d, mean_d2) = if moving && g0.value() > T::zero() {
                (g1.value() / g0.value(), g2.value() / g0.value())
            } else {
                (T::zero(), T::zero())
            };
            let pi = mass.value();
            let d_rho = (first.value() - pi * mean_d) / (sg * sg);
            let d_sigma = if moving {
                (second.value() - pi * mean_d2) / (sg * sg * sg)
            } else {
                -pi / sg + second.value() / (sg * sg * sg)
            };
            (d_rho, d_sigma)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{e_step, normalize_image};
    use crate::image::{GrayImage, ImageDomain};
    use approx::assert_relative_eq;

    fn image_from(w: usize, hgt: usize, f: impl FnMut(usize, usize) -> f64) -> NormalizedImage<f64> {
        let d = ImageDomain::new(w, hgt).unwrap();
        normalize_image(&GrayImage::from_fn(d, f)).unwrap()
    }

    fn ones(h: &NormalizedImage<f64>, m: usize) -> Responsibilities<f64> {
        let d = h.domain();
        Responsibilities::from_values(d, m, vec![1.0 / m as f64; d.len() * m]).unwrap()
    }

    #[test]
    fn proportions_trivial_cases() {
        let h = image_from(5, 4, |x, y| (x + y) as f64);
        assert_relative_eq!(m_step_pi(&h, &ones(&h, 1))[0], 1.0, epsilon = 1e-15);
        let p = m_step_pi(&h, &ones(&h, 2));
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rho_of_a_point_mass() {
        let h = image_from(9, 9, |x, y| if (x, y) == (6, 2) { 3.0 } else { 0.0 });
        let z = ones(&h, 1);
        assert_relative_eq!(m_step_rho(&h, &z, 0, 0.0, 1.0).unwrap(), 6.0, epsilon = 1e-14);
        assert_eq!(m_step_rho(&h, &z, 0, 0.0, 1e-9), Err(Error::CollapsedComponent(0)));
    }

    #[test]
    fn rho_of_symmetric_mass() {
        // mass symmetric about the 45° line x + y = 10 (in normal form, ρ = 10/√2)
        let h = image_from(12, 12, |x, y| if (x, y) == (4, 4) || (x, y) == (6, 6) || (x, y) == (2, 10) || (x, y) == (3, 5) { 1.0 } else { 0.0 });
        let theta = std::f64::consts::FRAC_PI_4;
        let rho = m_step_rho(&h, &ones(&h, 1), 0, theta, 1.0).unwrap();
        assert_relative_eq!(rho, 10.0 / 2f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn sigma_cases() {
        let h = image_from(9, 3, |x, _| if x == 5 { 1.0 } else { 0.0 });
        let est = m_step_sigma(&h, &ones(&h, 1), 0, 0.0, 5.0, 1.0).unwrap();
        assert!(est.clamped);
        assert_eq!(est.sigma, SIGMA_FLOOR);
        assert_eq!(est.raw, 0.0);
        let h = image_from(9, 3, |x, _| if x == 2 || x == 8 { 1.0 } else { 0.0 });
        let est = m_step_sigma(&h, &ones(&h, 1), 0, 0.0, 5.0, 1.0).unwrap();
        assert_relative_eq!(est.sigma, 3.0, epsilon = 1e-14);
        assert!(!est.clamped);
    }

    #[test]
    fn moments_trivial_cases() {
        let h = image_from(3, 3, |_, _| 1.0);
        let mom = compute_moments(&h, &ones(&h, 1), 0);
        assert_relative_eq!(mom.m_x, 2.0, epsilon = 1e-15);
        assert_relative_eq!(mom.m_y, 2.0, epsilon = 1e-15);
        let h = image_from(8, 8, |x, y| if (x, y) == (3, 7) { 1.0 } else { 0.0 });
        let mom = compute_moments(&h, &ones(&h, 1), 0);
        assert_eq!(mom.m_xy, 21.0);
        assert_eq!(mom.m_x2, 9.0);
        assert_eq!(mom.m_y2, 49.0);
    }

    #[test]
    fn moments_quadratic_form_matches_direct_sum() {
        let h = image_from(20, 15, |x, y| ((x * 7 + y * 3) % 11) as f64);
        let z = ones(&h, 1);
        let mom = compute_moments(&h, &z, 0);
        let est = m_step_sigma(&h, &z, 0, 0.37, 9.0, mom.mass).unwrap();
        assert_relative_eq!(mom.squared_distance_sum(9.0, 0.37), est.sq_sum, max_relative = 1e-12);
    }

    #[test]
    fn axis_aligned_bar_selects_zero_angle() {
        // vertical bar x ∈ [18, 24] in a 41x31 image, ρ at the true centre
        let h = image_from(41, 31, |x, _| if (18..=24).contains(&x) { 1.0 } else { 0.0 });
        let z = ones(&h, 1);
        let mom = compute_moments(&h, &z, 0);
        let choice = m_step_theta(&mom, 21.0, 0.7, 0.0);
        assert!(choice.theta.abs() < 1e-6, "{choice:?}");
        assert!(!choice.fallback);
        assert_relative_eq!(choice.sigma, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn collapsed_component_is_frozen() {
        let h = image_from(30, 30, |x, _| if x == 5 { 1.0 } else { 0.0 });
        let a = ComponentParams::new(5.0, 0.0, 1.0, 0.5).unwrap();
        let b = ComponentParams::new(29.0, 0.0, 0.5, 0.5).unwrap();
        let s = MixtureState::new(vec![a, b]).unwrap();
        let z = e_step(&h, &s);
        let out = m_step(&h, &z, &s, MStepKind::ClosedForm).unwrap();
        assert_eq!(out.collapsed, vec![1]);
        assert_eq!(out.state.components[1].line, b.line);
        assert!((out.state.proportion_sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn q_of_mass_on_centerline() {
        let h = image_from(15, 10, |x, _| if x == 7 { 2.0 } else { 0.0 });
        let c = ComponentParams::new(7.0, 0.0, SIGMA_FLOOR, 1.0).unwrap();
        let s = MixtureState::new(vec![c]).unwrap();
        let z = e_step(&h, &s);
        let q = q_function(&h, &z, &s, &z.log_volumes).unwrap();
        let expect = -h.mass() * (z.log_volumes[0] + (SIGMA_FLOOR * (2.0 * std::f64::consts::PI).sqrt()).ln());
        assert_relative_eq!(q, expect, max_relative = 1e-13);
    }

    #[test]
    fn q_is_permutation_invariant() {
        let h = image_from(40, 30, |x, y| ((x * 13 + y * 5) % 17) as f64);
        let a = ComponentParams::new(10.0, 0.2, 3.0, 0.3).unwrap();
        let b = ComponentParams::new(25.0, -0.4, 5.0, 0.5).unwrap();
        let c = ComponentParams::new(18.0, 1.1, 2.0, 0.2).unwrap();
        let s1 = MixtureState::new(vec![a, b, c]).unwrap();
        let s2 = MixtureState::new(vec![c, a, b]).unwrap();
        let z1 = e_step(&h, &s1);
        let z2 = e_step(&h, &s2);
        let q1 = q_function(&h, &z1, &s1, &z1.log_volumes).unwrap();
        let q2 = q_function(&h, &z2, &s2, &z2.log_volumes).unwrap();
        assert_eq!(q1.to_bits(), q2.to_bits());
    }
}

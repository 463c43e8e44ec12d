//! Expectation-maximization for a finite mixture of linear anchored Gaussians.
//!
//! The image is read as a population of unit gray-level volumes; each
//! pixel contributes its normalized intensity `h(x, y)` as a weight. One
//! iteration computes per-pixel responsibilities from the current mixture,
//! then re-estimates proportions, radii, angles (through a quartic in
//! `tanθ`) and scales in closed form.

mod driver;
mod estep;
mod mstep;
mod refine;

pub(crate) use driver::drive;
pub use driver::{run_em, EmConfig, EmFlags, EmOutcome, StopReason};
pub use estep::{component_volumes, e_step};
pub use mstep::{
    compute_moments, m_step, m_step_pi, m_step_rho, m_step_sigma, m_step_theta, q_function,
    q_partials, q_partials_fixed_volume, quartic_coefficients, theta_stationarity_residual, MStepKind, MStepOutcome, SigmaEstimate,
    ThetaChoice, PI_FLOOR,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, ImageDomain};
use crate::model::{ComponentParams, SIGMA_FLOOR};
use crate::scalar::{CompensatedSum, Real};

/// Normalized image `h = I / N_v` with its total gray mass `N_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedImage<T> {
    domain: ImageDomain,
    h: Vec<T>,
    n_v: T,
}

impl<T: Real> NormalizedImage<T> {
    pub fn domain(&self) -> ImageDomain {
        self.domain
    }

    pub fn values(&self) -> &[T] {
        &self.h
    }

    /// Total gray mass of the source image.
    pub fn mass(&self) -> T {
        self.n_v
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.h[self.domain.index(x, y)]
    }

    /// Normalizes `values` (raw intensities over `domain`) by their total.
    pub(crate) fn from_raw(domain: ImageDomain, values: Vec<T>) -> Result<Self> {
        let mut acc = CompensatedSum::new();
        for &v in &values {
            acc.add(v);
        }
        let n_v = acc.value();
        if !(n_v > T::zero()) || !n_v.is_finite() {
            return Err(Error::EmptyImage);
        }
        let h = values.into_iter().map(|v| v / n_v).collect();
        Ok(Self { domain, h, n_v })
    }
}

/// `h(x, y) = I(x, y) / N_v`.
///
/// Fails with [`Error::EmptyImage`] when the image carries no positive total
/// mass. Negative pixels (unclamped noise) are kept as signed weights.
pub fn normalize_image<T: Real>(img: &GrayImage<T>) -> Result<NormalizedImage<T>> {
    NormalizedImage::from_raw(img.domain(), img.as_slice().to_vec())
}

/// Mixture parameters at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureState<T> {
    pub components: Vec<ComponentParams<T>>,
    pub iteration: usize,
    /// Last normalized Q value, `Q / N_v`.
    pub q_value: Option<T>,
    pub q_history: Vec<T>,
}

impl<T: Real> MixtureState<T> {
    pub fn new(components: Vec<ComponentParams<T>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("a mixture needs at least one component"));
        }
        Ok(Self {
            components,
            iteration: 0,
            q_value: None,
            q_history: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn proportion_sum(&self) -> T {
        self.components.iter().map(|c| c.pi).sum()
    }

    /// Largest absolute change of any `(π, ρ, θ, σ)` entry between two states
    /// of equal size.
    pub fn max_abs_delta(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                (a.pi - b.pi)
                    .abs()
                    .max((a.line.rho - b.line.rho).abs())
                    .max((a.line.theta - b.line.theta).abs())
                    .max((a.sigma - b.sigma).abs())
            })
            .fold(T::zero(), |m, v| m.max(v))
    }
}

/// Posterior membership `z[x, y, m]`, stored pixel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Responsibilities<T> {
    domain: ImageDomain,
    components: usize,
    z: Vec<T>,
    /// `log V_m` of the components the posteriors were computed with.
    pub log_volumes: Vec<T>,
    /// Pixels where every component density underflowed and the
    /// posterior was set to uniform.
    pub underflow_pixels: usize,
    /// `Σ h·log Σ_m π_m g_m` of the mixture the posteriors came from.
    pub log_likelihood: T,
}

impl<T: Real> Responsibilities<T> {
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn domain(&self) -> ImageDomain {
        self.domain
    }

    #[inline]
    pub fn at_index(&self, pixel: usize, m: usize) -> T {
        self.z[pixel * self.components + m]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, m: usize) -> T {
        self.at_index(self.domain.index(x, y), m)
    }

    /// Posteriors of one pixel across components.
    pub fn pixel(&self, pixel: usize) -> &[T] {
        &self.z[pixel * self.components..(pixel + 1) * self.components]
    }

    /// Builds a field from raw values; used by tests and custom pipelines.
    pub fn from_values(domain: ImageDomain, components: usize, z: Vec<T>) -> Result<Self> {
        if z.len() != domain.len() * components || components == 0 {
            return Err(Error::invalid("responsibility buffer size mismatch"));
        }
        Ok(Self {
            domain,
            components,
            z,
            log_volumes: Vec::new(),
            underflow_pixels: 0,
            log_likelihood: T::zero(),
        })
    }
}

/// Responsibility-weighted image moments of one component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentSet<T> {
    /// `Σ z·h`, the component's new proportion.
    pub mass: T,
    pub m_x: T,
    pub m_y: T,
    pub m_xy: T,
    pub m_x2: T,
    pub m_y2: T,
}

impl<T: Real> MomentSet<T> {
    /// `Σ z·h·(x·cosθ + y·sinθ − ρ)²` expanded over the moments.
    pub fn squared_distance_sum(&self, rho: T, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        let two = T::lit(2.0);
        c * c * self.m_x2 + two * c * s * self.m_xy + s * s * self.m_y2
            - two * rho * (c * self.m_x + s * self.m_y)
            + rho * rho * self.mass
    }
}

/// Initial mixture from angles and proportions.
///
/// Radii are the mass-weighted mean projection of the image onto each
/// normal direction; scales are the matching weighted standard deviation of
/// the projection. An explicit `rho0` overrides the radii, in which case the
/// scale is measured about the given radius.
pub fn init_params<T: Real>(
    h: &NormalizedImage<T>,
    theta0: &[T],
    pi0: &[T],
    rho0: Option<&[T]>,
) -> Result<MixtureState<T>> {
    if theta0.is_empty() {
        return Err(Error::invalid("at least one initial angle is required"));
    }
    if theta0.len() != pi0.len() {
        return Err(Error::invalid(format!(
            "{} angles but {} proportions",
            theta0.len(),
            pi0.len()
        )));
    }
    if let Some(r) = rho0 {
        if r.len() != theta0.len() {
            return Err(Error::invalid("initial radii must match the number of angles"));
        }
    }
    let total: T = pi0.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::invalid(format!("initial proportions sum to {total}, expected 1")));
    }
    if pi0.iter().any(|&p| !(p > T::zero())) {
        return Err(Error::invalid("initial proportions must be positive"));
    }

    let domain = h.domain();
    let mut components = Vec::with_capacity(theta0.len());
    for (m, (&theta, &pi)) in theta0.iter().zip(pi0).enumerate() {
        let line = crate::model::LineParams::new(T::zero(), theta).canonical();
        let (s, c) = line.theta.sin_cos();
        let rho = match rho0 {
            Some(r) => crate::model::LineParams::new(r[m], theta).canonical().rho,
            None => {
                let mut acc = CompensatedSum::new();
                for (i, x, y) in domain.pixels() {
                    acc.add(h.h[i] * (T::from_index(x) * c + T::from_index(y) * s));
                }
                acc.value()
            }
        };
        let mut acc = CompensatedSum::new();
        for (i, x, y) in domain.pixels() {
            let d = T::from_index(x) * c + T::from_index(y) * s - rho;
            acc.add(h.h[i] * d * d);
        }
        let sigma = acc.value().max(T::zero()).sqrt().max(T::lit(SIGMA_FLOOR));
        components.push(ComponentParams::new(rho, line.theta, sigma, pi)?);
    }
    MixtureState::new(components)
}

/// Evenly spread angles `θ₁ + kπ/M` starting from `θ₁ = π·r`.
pub fn spread_angles<T: Real>(first: T, m: usize) -> Vec<T> {
    (0..m)
        .map(|k| first + T::PI() * T::from_index(k) / T::from_index(m))
        .collect()
}

/// Equal proportions `1/M`.
pub fn equal_proportions<T: Real>(m: usize) -> Vec<T> {
    vec![T::one() / T::from_index(m); m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_image_normalization() {
        let d = ImageDomain::new(2, 2).unwrap();
        let img = GrayImage::from_vec(d, vec![7.0; 4]).unwrap();
        let h = normalize_image(&img).unwrap();
        assert_eq!(h.mass(), 28.0);
        assert!(h.values().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn single_pixel_normalization() {
        let d = ImageDomain::new(3, 3).unwrap();
        let mut img = GrayImage::<f64>::new(d);
        img.set(2, 3, 5.0);
        let h = normalize_image(&img).unwrap();
        assert_eq!(h.get(2, 3), 1.0);
        assert_eq!(h.values().iter().filter(|&&v| v == 0.0).count(), 8);
    }

    #[test]
    fn empty_image_rejected() {
        let img = GrayImage::<f64>::new(ImageDomain::new(4, 4).unwrap());
        assert_eq!(normalize_image(&img), Err(Error::EmptyImage));
    }

    #[test]
    fn uniform_init_projects_to_centroid() {
        let d = ImageDomain::new(9, 5).unwrap();
        let img = GrayImage::from_vec(d, vec![1.0; 45]).unwrap();
        let h = normalize_image(&img).unwrap();
        let s = init_params(&h, &[0.0], &[1.0], None).unwrap();
        assert_relative_eq!(s.components[0].rho(), 5.0, max_relative = 1e-14);
        // standard deviation of x over 1..=9
        assert_relative_eq!(s.components[0].sigma, (80.0f64 / 12.0).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn init_validation() {
        let d = ImageDomain::new(3, 3).unwrap();
        let h = normalize_image(&GrayImage::from_vec(d, vec![1.0; 9]).unwrap()).unwrap();
        assert!(init_params::<f64>(&h, &[], &[], None).is_err());
        assert!(init_params(&h, &[0.0, 1.0], &[0.5, 0.4], None).is_err());
        assert!(init_params(&h, &[0.0], &[0.5, 0.5], None).is_err());
    }

    #[test]
    fn spread_for_three_components() {
        let a = spread_angles(0.2f64, 3);
        assert_relative_eq!(a[1] - a[0], std::f64::consts::PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(a[2] - a[0], 2.0 * std::f64::consts::PI / 3.0, max_relative = 1e-15);
    }
}

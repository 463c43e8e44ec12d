//! Linear anchored Gaussian density on a pixel domain.
//!
//! A component is a Gaussian ridge of scale `σ` whose crest is the line
//! `x·cosθ + y·sinθ = ρ`. Its density is constant along the line and normal
//! across it. Normalizing over the image grid turns it into a probability
//! mass function on the pixels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageDomain;
use crate::scalar::{CompensatedSum, Real};

/// Smallest scale the engine lets a component shrink to, in pixels.
///
/// Below half a pixel the discrete normal sum degenerates into a single
/// column of pixels; estimates are clamped to this floor and flagged.
pub const SIGMA_FLOOR: f64 = 0.5;

/// Centerline in normal form `x·cosθ + y·sinθ = ρ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineParams<T> {
    pub rho: T,
    pub theta: T,
}

impl<T: Real> LineParams<T> {
    pub fn new(rho: T, theta: T) -> Self {
        Self { rho, theta }
    }

    /// Signed distance of `(x, y)` to the line.
    #[inline]
    pub fn signed_distance(&self, x: T, y: T) -> T {
        let (s, c) = self.theta.sin_cos();
        x * c + y * s - self.rho
    }

    /// Unique representative with `θ ∈ (−π/2, π/2]`.
    ///
    /// `(ρ, θ)` and `(−ρ, θ ± π)` describe the same line; every shift by π
    /// flips the sign of `ρ`.
    pub fn canonical(self) -> Self {
        let half = T::FRAC_PI_2();
        let pi = T::PI();
        let in_range = |t: T| t > -half && t <= half;
        if in_range(self.theta) {
            return self;
        }
        let mut k = ((self.theta - half) / pi).ceil();
        let mut theta = self.theta - k * pi;
        // Rounding at the range ends can leave theta one ulp outside.
        if theta <= -half {
            theta = theta + pi;
            k = k - T::one();
        } else if theta > half {
            theta = theta - pi;
            k = k + T::one();
        }
        let odd = (k.abs() % T::lit(2.0)) == T::one();
        let rho = if odd { -self.rho } else { self.rho };
        Self { rho, theta }
    }
}

/// One mixture component: proportion `π` and shape `(ρ, θ, σ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentParams<T> {
    pub line: LineParams<T>,
    pub sigma: T,
    pub pi: T,
}

impl<T: Real> ComponentParams<T> {
    pub fn new(rho: T, theta: T, sigma: T, pi: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        if !(pi >= T::zero() && pi <= T::one()) {
            return Err(Error::invalid(format!("proportion must lie in [0, 1], got {pi}")));
        }
        if !rho.is_finite() || !theta.is_finite() {
            return Err(Error::invalid("rho and theta must be finite"));
        }
        Ok(Self {
            line: LineParams::new(rho, theta),
            sigma,
            pi,
        })
    }

    pub fn rho(&self) -> T {
        self.line.rho
    }

    pub fn theta(&self) -> T {
        self.line.theta
    }

    /// Structure thickness implied by the scale, `w = 2√3·σ`.
    pub fn width(&self) -> T {
        T::lit(2.0) * T::lit(3.0).sqrt() * self.sigma
    }

    pub fn canonical(self) -> Self {
        Self {
            line: self.line.canonical(),
            ..self
        }
    }
}

/// Unnormalized ridge `G(x, y) = exp(−d²/2σ²) / (√(2π)·σ)` with `d` the signed
/// distance to the centerline.
#[inline]
pub fn lagd_unnormalized<T: Real>(x: T, y: T, c: &ComponentParams<T>) -> T {
    let d = c.line.signed_distance(x, y);
    let norm = T::one() / ((T::lit(2.0) * T::PI()).sqrt() * c.sigma);
    norm * (-(d * d) / (T::lit(2.0) * c.sigma * c.sigma)).exp()
}

/// Volume under `G` over the pixel grid (discrete sum at pixel centers).
pub fn domain_volume<T: Real>(c: &ComponentParams<T>, d: ImageDomain) -> T {
    let (s, co) = c.line.theta.sin_cos();
    let two_var = T::lit(2.0) * c.sigma * c.sigma;
    let norm = T::one() / ((T::lit(2.0) * T::PI()).sqrt() * c.sigma);
    let mut acc = CompensatedSum::new();
    for y in 1..=d.height {
        let ys = T::from_index(y) * s - c.line.rho;
        for x in 1..=d.width {
            let dist = T::from_index(x) * co + ys;
            acc.add((-(dist * dist) / two_var).exp());
        }
    }
    acc.value() * norm
}

/// Natural log of [`domain_volume`], evaluated with a max shift so that
/// components lying far outside the domain keep a finite value.
pub fn log_domain_volume<T: Real>(c: &ComponentParams<T>, d: ImageDomain) -> T {
    let direct = domain_volume(c, d);
    if direct > T::zero() && direct.is_finite() {
        return direct.ln();
    }
    let (s, co) = c.line.theta.sin_cos();
    let two_var = T::lit(2.0) * c.sigma * c.sigma;
    let exponent = |x: usize, y: usize| {
        let dist = T::from_index(x) * co + T::from_index(y) * s - c.line.rho;
        -(dist * dist) / two_var
    };
    let mut max = T::neg_infinity();
    for (_, x, y) in d.pixels() {
        max = max.max(exponent(x, y));
    }
    let mut acc = CompensatedSum::new();
    for (_, x, y) in d.pixels() {
        acc.add((exponent(x, y) - max).exp());
    }
    max + acc.value().ln() - ((T::lit(2.0) * T::PI()).sqrt() * c.sigma).ln()
}

/// Domain-normalized density `g = G / V`, zero outside the domain.
pub fn lagd_pdf<T: Real>(x: T, y: T, c: &ComponentParams<T>, d: ImageDomain, vol: T) -> Result<T> {
    if !(vol > T::zero()) {
        return Err(Error::invalid(format!("volume must be positive, got {vol}")));
    }
    let inside = x >= T::one()
        && y >= T::one()
        && x <= T::from_index(d.width)
        && y <= T::from_index(d.height);
    if !inside {
        return Ok(T::zero());
    }
    Ok(lagd_unnormalized(x, y, c) / vol)
}

/// `w = 2√3·σ`.
pub fn width_from_sigma<T: Real>(sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    Ok(T::lit(2.0) * T::lit(3.0).sqrt() * sigma)
}

/// `σ = w / (2√3)`, the standard deviation of a uniform strip of width `w`.
pub fn sigma_from_width<T: Real>(width: T) -> Result<T> {
    if !(width > T::zero()) {
        return Err(Error::invalid(format!("width must be positive, got {width}")));
    }
    Ok(width / (T::lit(2.0) * T::lit(3.0).sqrt()))
}

/// Origin of a profile axis perpendicular to the centerline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AxisOrigin<T> {
    /// `(a, 0)` on the x-axis.
    XAxis(T),
    /// `(0, b)` on the y-axis.
    YAxis(T),
    /// The plane origin.
    Origin,
}

/// Mean of the cross-section Gaussian measured along an axis perpendicular
/// to the line and starting at `origin`.
pub fn perpendicular_profile_mean<T: Real>(c: &ComponentParams<T>, origin: AxisOrigin<T>) -> T {
    let (s, co) = c.line.theta.sin_cos();
    match origin {
        AxisOrigin::XAxis(a) => c.line.rho - a * co,
        AxisOrigin::YAxis(b) => c.line.rho - b * s,
        AxisOrigin::Origin => c.line.rho,
    }
}

//! EM with dynamic background subtraction.
//!
//! Before every E-step only the pixels inside a `±νσ` band around some
//! current centerline are kept; the rest of the image, mostly background
//! noise, is zeroed and the remainder renormalized.

use std::borrow::Cow;

use crate::em::{drive, normalize_image, EmConfig, EmOutcome, MixtureState, NormalizedImage};
use crate::error::{Error, Result};
use crate::image::{GrayImage, ImageDomain};
use crate::scalar::Real;

/// Default band half-width multiplier.
pub const DEFAULT_NU: f64 = 2.0;

/// Parameter-change threshold that also ends the masked loop.
pub const PARAM_TOL: f64 = 1e-7;

/// One component's band `ρ − νσ ≤ x·cosθ + y·sinθ ≤ ρ + νσ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band<T> {
    pub theta: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> Band<T> {
    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (s, c) = self.theta.sin_cos();
        let p = T::from_index(x) * c + T::from_index(y) * s;
        p >= self.lower && p <= self.upper
    }
}

/// Union of the component bands over a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMask<T> {
    domain: ImageDomain,
    inside: Vec<bool>,
    pub bands: Vec<Band<T>>,
    /// `ν < √3`: the band is narrower than a bar of the fitted width.
    pub narrow: bool,
}

impl<T: Real> BandMask<T> {
    pub fn domain(&self) -> ImageDomain {
        self.domain
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.inside[self.domain.index(x, y)]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    /// Number of retained pixels.
    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }
}

pub fn build_band_mask<T: Real>(state: &MixtureState<T>, domain: ImageDomain, nu: T) -> BandMask<T> {
    let bands: Vec<Band<T>> = state
        .components
        .iter()
        .map(|c| Band {
            theta: c.line.theta,
            lower: c.line.rho - nu * c.sigma,
            upper: c.line.rho + nu * c.sigma,
        })
        .collect();
    let trig: Vec<(T, T)> = bands.iter().map(|b| b.theta.sin_cos()).collect();
    let inside = domain
        .pixels()
        .map(|(_, x, y)| {
            let (xf, yf) = (T::from_index(x), T::from_index(y));
            bands.iter().zip(&trig).any(|(b, &(s, c))| {
                let p = xf * c + yf * s;
                p >= b.lower && p <= b.upper
            })
        })
        .collect();
    BandMask {
        domain,
        inside,
        bands,
        narrow: nu < T::lit(3.0).sqrt(),
    }
}

/// Zeroes pixels outside `mask` and renormalizes what remains.
pub fn apply_mask<T: Real>(img: &GrayImage<T>, mask: &BandMask<T>) -> Result<NormalizedImage<T>> {
    if img.domain() != mask.domain {
        return Err(Error::invalid("mask and image domains differ"));
    }
    let values = img
        .as_slice()
        .iter()
        .zip(&mask.inside)
        .map(|(&v, &keep)| if keep { v } else { T::zero() })
        .collect();
    NormalizedImage::from_raw(img.domain(), values).map_err(|e| match e {
        Error::EmptyImage => Error::EmptyBand,
        other => other,
    })
}

/// Algorithm 2: mask, then E-step, then M-step, every iteration. Stops on the
/// normalized-Q rule or when no parameter moves by more than [`PARAM_TOL`].
///
/// An iteration whose mask keeps no mass runs on the unmasked image and is
/// counted in [`EmFlags::empty_band_fallbacks`](crate::em::EmFlags).
pub fn run_em_bs<T: Real>(
    img: &GrayImage<T>,
    init: MixtureState<T>,
    cfg: &EmConfig<T>,
    nu: T,
) -> Result<EmOutcome<T>> {
    if !(nu > T::zero()) {
        return Err(Error::invalid("band multiplier must be positive"));
    }
    let full = normalize_image(img)?;
    let domain = img.domain();
    drive(init, cfg, Some(T::lit(PARAM_TOL)), |state, flags| {
        let mask = build_band_mask(state, domain, nu);
        flags.narrow_band |= mask.narrow;
        match apply_mask(img, &mask) {
            Ok(h) => Ok(Cow::Owned(h)),
            Err(Error::EmptyBand) => {
                flags.empty_band_fallbacks += 1;
                Ok(Cow::Borrowed(&full))
            }
            Err(e) => Err(e),
        }
    })
}

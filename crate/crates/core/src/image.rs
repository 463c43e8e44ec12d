//! Gray-level image grid and its rectangular domain.
//!
//! Pixel coordinates exposed by this crate are 1-based and refer to pixel
//! centers: `x ∈ [1, W]` runs along columns, `y ∈ [1, H]` along rows. Storage
//! is row-major with zero-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rectangular pixel domain `W × H`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDomain {
    pub width: usize,
    pub height: usize,
}

impl ImageDomain {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("domain must be non-empty, got {width}x{height}")));
        }
        Ok(Self { width, height })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the domain diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }

    /// Iterates `(index, x, y)` over the grid in storage order with 1-based
    /// coordinates.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let w = self.width;
        (0..self.len()).map(move |i| (i, i % w + 1, i / w + 1))
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x >= 1 && x <= self.width && y >= 1 && y <= self.height);
        (y - 1) * self.width + (x - 1)
    }
}

/// Grid of intensity values.
///
/// Raw acquisitions are non-negative. Synthetic corruption can optionally
/// leave values below zero (unclamped AWGN); consumers that require a
/// probability mass check for that explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T> {
    domain: ImageDomain,
    data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(domain: ImageDomain) -> Self {
        Self {
            domain,
            data: vec![T::zero(); domain.len()],
        }
    }

    pub fn from_vec(domain: ImageDomain, data: Vec<T>) -> Result<Self> {
        if data.len() != domain.len() {
            return Err(Error::invalid(format!(
                "buffer of {} values does not match {}x{} domain",
                data.len(),
                domain.width,
                domain.height
            )));
        }
        Ok(Self { domain, data })
    }

    pub fn from_fn(domain: ImageDomain, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = domain.pixels().map(|(_, x, y)| f(x, y)).collect();
        Self { domain, data }
    }

    pub fn domain(&self) -> ImageDomain {
        self.domain
    }

    pub fn width(&self) -> usize {
        self.domain.width
    }

    pub fn height(&self) -> usize {
        self.domain.height
    }

    /// Value at 1-based pixel `(x, y)`.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[self.domain.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.domain.index(x, y);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            domain: self.domain,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn total(&self) -> T {
        let mut acc = crate::scalar::CompensatedSum::new();
        for &v in &self.data {
            acc.add(v);
        }
        acc.value()
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Element-wise conversion to another scalar type.
    pub fn cast<U: Real>(&self) -> GrayImage<U> {
        GrayImage {
            domain: self.domain,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_based_indexing_round_trips() {
        let d = ImageDomain::new(3, 2).unwrap();
        let img = GrayImage::<f64>::from_fn(d, |x, y| (10 * y + x) as f64);
        assert_eq!(img.get(1, 1), 11.0);
        assert_eq!(img.get(3, 2), 23.0);
        assert_eq!(img.as_slice()[3], 21.0);
        let coords: Vec<_> = d.pixels().map(|(_, x, y)| (x, y)).collect();
        assert_eq!(coords[0], (1, 1));
        assert_eq!(coords[5], (3, 2));
    }

    #[test]
    fn empty_domain_rejected() {
        assert!(ImageDomain::new(0, 4).is_err());
        assert!(ImageDomain::new(4, 0).is_err());
    }
}

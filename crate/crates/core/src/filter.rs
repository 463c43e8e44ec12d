//! Separable Gaussian filtering with symmetric (half-sample) boundary.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::scalar::Real;

/// Sampled, normalized Gaussian of spread `kappa` on `size` taps.
pub fn gaussian_kernel<T: Real>(kappa: T, size: usize) -> Result<Vec<T>> {
    if size.is_multiple_of(2) {
        return Err(Error::invalid(format!("kernel size must be odd, got {size}")));
    }
    if !(kappa > T::zero()) {
        return Err(Error::invalid("kernel spread must be positive"));
    }
    let r = (size / 2) as isize;
    let two = T::lit(2.0);
    let mut k: Vec<T> = (-r..=r)
        .map(|i| {
            let t = T::lit(i as f64);
            (-(t * t) / (two * kappa * kappa)).exp()
        })
        .collect();
    let total: T = k.iter().copied().sum();
    k.iter_mut().for_each(|v| *v = *v / total);
    Ok(k)
}

/// Sampled derivative-of-Gaussian kernel of the given order (0, 1 or 2) at
/// scale `s`, with radius `ceil(4s)`.
///
/// Kernels are applied by correlation. The order-0 kernel sums to one, the
/// first-order kernel has `Σ t·k(t) = 1`, and the second-order kernel has
/// zero sum and `Σ t²·k(t)/2 = 1`, so each is exact on low-degree
/// polynomials.
pub fn derivative_kernel<T: Real>(s: T, order: usize) -> Result<Vec<T>> {
    if !(s > T::zero()) {
        return Err(Error::invalid("derivative scale must be positive"));
    }
    let r = (s * T::lit(4.0)).ceil().to_usize().unwrap_or(1).max(1) as isize;
    let two = T::lit(2.0);
    let taps: Vec<T> = (-r..=r).map(|i| T::lit(i as f64)).collect();
    let g: Vec<T> = taps.iter().map(|&t| (-(t * t) / (two * s * s)).exp()).collect();
    let g_sum: T = g.iter().copied().sum();
    let g: Vec<T> = g.iter().map(|&v| v / g_sum).collect();
    match order {
        0 => Ok(g),
        1 => {
            let k: Vec<T> = taps.iter().zip(&g).map(|(&t, &v)| t * v).collect();
            let m1: T = taps.iter().zip(&k).map(|(&t, &v)| t * v).sum();
            Ok(k.into_iter().map(|v| v / m1).collect())
        }
        2 => {
            let mut k: Vec<T> = taps.iter().zip(&g).map(|(&t, &v)| (t * t - s * s) * v).collect();
            let mean = k.iter().copied().sum::<T>() / T::from_index(k.len());
            // remove the sampling residue of the zero-sum property on g's support
            for (v, &gv) in k.iter_mut().zip(&g) {
                *v = *v - mean * gv * T::from_index(taps.len());
            }
            let m2: T = taps.iter().zip(&k).map(|(&t, &v)| t * t * v).sum::<T>() / two;
            Ok(k.into_iter().map(|v| v / m2).collect())
        }
        _ => Err(Error::invalid(format!("unsupported derivative order {order}"))),
    }
}

/// Index into `0..n` after symmetric reflection about the pixel edges.
#[inline]
fn reflect(i: isize, n: isize) -> usize {
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Correlates rows with `kx` and columns with `ky`.
pub fn convolve_separable<T: Real>(img: &GrayImage<T>, kx: &[T], ky: &[T]) -> GrayImage<T> {
    let (w, h) = (img.width(), img.height());
    let src = img.as_slice();
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;
    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in kx.iter().enumerate() {
                acc = acc + kv * row[reflect(x as isize + k as isize - rx, w as isize)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (k, &kv) in ky.iter().enumerate() {
                acc = acc + kv * tmp[reflect(y as isize + k as isize - ry, h as isize) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage::from_vec(img.domain(), out).expect("same domain")
}

/// Blur with the normalized `size × size` Gaussian of spread `kappa`.
pub fn gaussian_blur<T: Real>(img: &GrayImage<T>, kappa: T, size: usize) -> Result<GrayImage<T>> {
    let k = gaussian_kernel(kappa, size)?;
    Ok(convolve_separable(img, &k, &k))
}

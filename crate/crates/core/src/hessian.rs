//! Number of structures and initial angles from a multiscale Hessian.
//!
//! Ridge pixels are found from the eigenvalues of the scale-normalized
//! Hessian. Their across-ridge directions vote in an orientation histogram
//! whose peaks give the initial angles. Each peak's supporting pixels are
//! then projected onto the peak's normal axis and clustered, so parallel
//! structures sharing one orientation each get their own component.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_separable, derivative_kernel};
use crate::image::GrayImage;
use crate::model::LineParams;
use crate::scalar::Real;

/// Which structures count as ridges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Bright structures on a darker background.
    #[default]
    Bright,
    /// Dark structures on a brighter background.
    Dark,
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bright" => Ok(Self::Bright),
            "dark" => Ok(Self::Dark),
            _ => Err(Error::invalid(format!("unknown polarity '{s}' (bright|dark)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HessianConfig {
    /// Smoothing scales in pixels.
    pub scales: Vec<f64>,
    /// Fraction of strongest pixels that vote.
    pub keep_fraction: f64,
    pub bin_width_deg: f64,
    pub min_peak_separation_deg: f64,
    /// A peak must rise above the histogram median by at least this share
    /// of the tallest peak's rise.
    pub min_peak_fraction: f64,
    /// Projection gap, in units of the median best scale, that separates two
    /// parallel structures.
    pub gap_factor: f64,
    /// Clusters smaller than this share of the largest cluster of the same
    /// peak are dropped.
    pub min_cluster_fraction: f64,
    pub polarity: Polarity,
}

impl Default for HessianConfig {
    fn default() -> Self {
        Self {
            scales: vec![1.0, 2.0, 3.0, 4.0],
            keep_fraction: 0.10,
            bin_width_deg: 2.0,
            min_peak_separation_deg: 10.0,
            min_peak_fraction: 0.2,
            gap_factor: 3.0,
            min_cluster_fraction: 0.2,
            polarity: Polarity::Bright,
        }
    }
}

impl HessianConfig {
    fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.scales.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("at least one positive scale is required"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::invalid("keep_fraction must lie in (0, 1]"));
        }
        let bins = 180.0 / self.bin_width_deg;
        if !(self.bin_width_deg > 0.0) || (bins - bins.round()).abs() > 1e-9 {
            return Err(Error::invalid("bin_width_deg must divide 180"));
        }
        if !(self.min_peak_separation_deg >= 0.0) || !(self.gap_factor > 0.0) {
            return Err(Error::invalid("peak separation and gap factor must be non-negative"));
        }
        Ok(())
    }
}

/// Per-pixel ridge response, maximized over scales.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianResponse<T> {
    pub strength: GrayImage<T>,
    /// Across-ridge direction in `(−π/2, π/2]`, i.e. the normal angle of the
    /// local centerline.
    pub orientation: GrayImage<T>,
    /// Scale at which the strength peaked.
    pub scale: GrayImage<T>,
    /// Scale-normalized derivative along the across-ridge direction at that
    /// scale.
    pub slope: GrayImage<T>,
}

/// One accepted histogram peak.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Normal angle in radians.
    pub angle: f64,
    /// Smoothed bin count at the peak.
    pub count: f64,
    /// Index of the supporting pixel set in [`HessianInit::support`].
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationHistogram {
    pub bin_width_deg: f64,
    /// Bin `i` covers `(−90° + i·w, −90° + (i+1)·w]`.
    pub counts: Vec<usize>,
    /// Sorted by count, descending.
    pub peaks: Vec<Peak>,
}

impl OrientationHistogram {
    pub fn bin_of(&self, theta_deg: f64) -> usize {
        bin_index(theta_deg, self.bin_width_deg, self.counts.len())
    }

    pub fn bin_center_deg(&self, i: usize) -> f64 {
        -90.0 + (i as f64 + 0.5) * self.bin_width_deg
    }
}

/// One detected structure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structure {
    pub line: LineParams<f64>,
    /// Peak the structure came from.
    pub peak: usize,
    pub pixels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianInit {
    pub histogram: OrientationHistogram,
    /// Pixel indices voting for each peak.
    pub support: Vec<Vec<usize>>,
    /// Ordered by peak, then by position along the normal.
    pub structures: Vec<Structure>,
}

impl HessianInit {
    pub fn m(&self) -> usize {
        self.structures.len()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.structures.iter().map(|s| s.line.theta).collect()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.structures.iter().map(|s| s.line.rho).collect()
    }
}

fn bin_index(theta_deg: f64, width: f64, n: usize) -> usize {
    // (−90, 90] → bins; −90 itself belongs with +90
    let t = if theta_deg <= -90.0 { theta_deg + 180.0 } else { theta_deg };
    let i = ((t + 90.0) / width).ceil() as isize - 1;
    i.clamp(0, n as isize - 1) as usize
}

fn canonical_angle<T: Real>(mut a: T) -> T {
    let pi = T::PI();
    let half = T::FRAC_PI_2();
    while a > half {
        a = a - pi;
    }
    while a <= -half {
        a = a + pi;
    }
    a
}

/// Difference between two orientations modulo π, in `[0, π/2]`.
fn orientation_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

/// Multiscale ridge strength and orientation.
///
/// At scale `s` the Hessian of the image smoothed at `s` is scaled by `s²`.
/// With eigenvalues `λ₁ ≥ λ₂`, a bright ridge has strength `|λ₂|` when
/// `λ₂ < 0` and `|λ₂| ≥ |λ₁|`, and zero otherwise; [`Polarity::Dark`]
/// applies the same rule to the negated image.
pub fn hessian_responses<T: Real>(img: &GrayImage<T>, cfg: &HessianConfig) -> Result<HessianResponse<T>> {
    cfg.validate()?;
    let src = match cfg.polarity {
        Polarity::Bright => img.clone(),
        Polarity::Dark => img.map(|v| -v),
    };
    let per_scale: Vec<Result<[GrayImage<T>; 3]>> = cfg
        .scales
        .par_iter()
        .map(|&s| single_scale(&src, T::lit(s)))
        .collect();
    let d = img.domain();
    // responses at rounding level (flat regions) are not ridges
    let (lo, hi) = img.min_max();
    let floor = T::lit(1e-9) * (hi - lo).abs().max(hi.abs()).max(lo.abs());
    let mut strength = GrayImage::new(d);
    let mut orientation = GrayImage::new(d);
    let mut scale = GrayImage::from_vec(d, vec![T::lit(cfg.scales[0]); d.len()])?;
    let mut slope = GrayImage::new(d);
    for (r, &s) in per_scale.into_iter().zip(&cfg.scales) {
        let [st, or, sl] = r?;
        for i in 0..d.len() {
            if st.as_slice()[i] > strength.as_slice()[i] && st.as_slice()[i] > floor {
                strength.as_mut_slice()[i] = st.as_slice()[i];
                orientation.as_mut_slice()[i] = or.as_slice()[i];
                slope.as_mut_slice()[i] = sl.as_slice()[i];
                scale.as_mut_slice()[i] = T::lit(s);
            }
        }
    }
    Ok(HessianResponse {
        strength,
        orientation,
        scale,
        slope,
    })
}

fn single_scale<T: Real>(img: &GrayImage<T>, s: T) -> Result<[GrayImage<T>; 3]> {
    let k0 = derivative_kernel(s, 0)?;
    let k1 = derivative_kernel(s, 1)?;
    let k2 = derivative_kernel(s, 2)?;
    let norm2 = s * s;
    let lxx = convolve_separable(img, &k2, &k0);
    let lyy = convolve_separable(img, &k0, &k2);
    let lxy = convolve_separable(img, &k1, &k1);
    let lx = convolve_separable(img, &k1, &k0);
    let ly = convolve_separable(img, &k0, &k1);
    let d = img.domain();
    let mut strength = GrayImage::new(d);
    let mut orientation = GrayImage::new(d);
    let mut slope = GrayImage::new(d);
    let half = T::lit(0.5);
    for i in 0..d.len() {
        let a = lxx.as_slice()[i] * norm2;
        let c = lyy.as_slice()[i] * norm2;
        let b = lxy.as_slice()[i] * norm2;
        let m = (a + c) * half;
        let r = ((a - c) * half).hypot(b);
        let (l1, l2) = (m + r, m - r);
        if l2 < T::zero() && l2.abs() >= l1.abs() {
            // (cos φ, sin φ) spans the λ₁ eigenspace; λ₂ is orthogonal to it
            let phi = half * (b + b).atan2(a - c);
            let theta = canonical_angle(phi + T::FRAC_PI_2());
            let (sn, cs) = theta.sin_cos();
            strength.as_mut_slice()[i] = -l2;
            orientation.as_mut_slice()[i] = theta;
            slope.as_mut_slice()[i] = (lx.as_slice()[i] * cs + ly.as_slice()[i] * sn) * s;
        }
    }
    Ok([strength, orientation, slope])
}

/// Histogram peaks and the structures supporting them.
///
/// Fails with [`Error::NoStructureDetected`] when no pixel has a positive
/// response or no histogram bin rises above the background level.
pub fn estimate_structures<T: Real>(resp: &HessianResponse<T>, cfg: &HessianConfig) -> Result<HessianInit> {
    cfg.validate()?;
    let d = resp.strength.domain();
    let strength: Vec<f64> = resp.strength.as_slice().iter().map(|v| v.as_f64()).collect();
    let orient: Vec<f64> = resp.orientation.as_slice().iter().map(|v| v.as_f64()).collect();

    let mut positive: Vec<f64> = strength.iter().copied().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::NoStructureDetected);
    }
    positive.sort_by(f64::total_cmp);
    let keep = ((d.len() as f64 * cfg.keep_fraction).ceil() as usize).clamp(1, positive.len());
    let threshold = positive[positive.len() - keep];
    let kept: Vec<usize> = (0..d.len()).filter(|&i| strength[i] > 0.0 && strength[i] >= threshold).collect();

    let n_bins = (180.0 / cfg.bin_width_deg).round() as usize;
    let mut counts = vec![0usize; n_bins];
    for &i in &kept {
        counts[bin_index(orient[i].to_degrees(), cfg.bin_width_deg, n_bins)] += 1;
    }
    let smooth: Vec<f64> = (0..n_bins)
        .map(|i| {
            let l = counts[(i + n_bins - 1) % n_bins] as f64;
            let r = counts[(i + 1) % n_bins] as f64;
            (l + 2.0 * counts[i] as f64 + r) / 4.0
        })
        .collect();
    let mut sorted = smooth.clone();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[n_bins / 2];
    let top = sorted[n_bins - 1];
    if !(top > baseline) {
        return Err(Error::NoStructureDetected);
    }

    let mut candidates: Vec<usize> = (0..n_bins)
        .filter(|&i| {
            let l = smooth[(i + n_bins - 1) % n_bins];
            let r = smooth[(i + 1) % n_bins];
            smooth[i] >= l && smooth[i] > r && smooth[i] - baseline >= cfg.min_peak_fraction * (top - baseline)
        })
        .collect();
    candidates.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]).then(a.cmp(&b)));

    let sep = cfg.min_peak_separation_deg.to_radians();
    let bin_center = |i: usize| (-90.0 + (i as f64 + 0.5) * cfg.bin_width_deg).to_radians();
    let mut centers: Vec<(usize, f64)> = Vec::new();
    for i in candidates {
        let c = bin_center(i);
        if centers.iter().all(|&(_, a)| orientation_gap(a, c) >= sep) {
            centers.push((i, c));
        }
    }
    if centers.is_empty() {
        return Err(Error::NoStructureDetected);
    }

    // each kept pixel supports its nearest peak if within half the separation
    let reach = (sep / 2.0).max(cfg.bin_width_deg.to_radians());
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for &i in &kept {
        let best = centers
            .iter()
            .enumerate()
            .map(|(k, &(_, a))| (k, orientation_gap(orient[i], a)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, gap)) = best {
            if gap <= reach {
                support[k].push(i);
            }
        }
    }

    let mut peaks = Vec::with_capacity(centers.len());
    for (k, &(bin, c)) in centers.iter().enumerate() {
        peaks.push(Peak {
            angle: refine_angle(c, &support[k], &orient, &strength),
            count: smooth[bin],
            support: k,
        });
    }

    let scale: Vec<f64> = resp.scale.as_slice().iter().map(|v| v.as_f64()).collect();
    let slope: Vec<f64> = resp.slope.as_slice().iter().map(|v| v.as_f64()).collect();
    let mut structures = Vec::new();
    for (k, peak) in peaks.iter().enumerate() {
        for rho in split_parallel(peak.angle, &support[k], d.width, &scale, &slope, cfg) {
            structures.push(Structure {
                line: LineParams::new(rho.0, peak.angle),
                peak: k,
                pixels: rho.1,
            });
        }
    }
    if structures.is_empty() {
        return Err(Error::NoStructureDetected);
    }
    Ok(HessianInit {
        histogram: OrientationHistogram {
            bin_width_deg: cfg.bin_width_deg,
            counts,
            peaks,
        },
        support,
        structures,
    })
}

/// Strength-weighted mean orientation of the support, computed on doubled
/// angles so that directions near ±90° average correctly.
fn refine_angle(center: f64, support: &[usize], orient: &[f64], strength: &[f64]) -> f64 {
    let (mut c2, mut s2) = (0.0, 0.0);
    for &i in support {
        let (s, c) = (2.0 * orient[i]).sin_cos();
        c2 += strength[i] * c;
        s2 += strength[i] * s;
    }
    if c2 == 0.0 && s2 == 0.0 {
        return center;
    }
    canonical_angle(0.5 * s2.atan2(c2))
}

/// Positions along the normal of the parallel structures behind one peak,
/// with their pixel counts.
///
/// Projections are sorted and cut where consecutive values are more than
/// `gap_factor` median scales apart. The edge responses of a bar wider than
/// the largest scale form two clusters, one on a rising and one on a falling
/// slope; such adjacent pairs are merged into one structure.
fn split_parallel(
    theta: f64,
    support: &[usize],
    width: usize,
    scale: &[f64],
    slope: &[f64],
    cfg: &HessianConfig,
) -> Vec<(f64, usize)> {
    if support.is_empty() {
        return Vec::new();
    }
    let (sn, cs) = theta.sin_cos();
    let mut proj: Vec<(f64, usize)> = support
        .iter()
        .map(|&i| {
            let (x, y) = ((i % width + 1) as f64, (i / width + 1) as f64);
            (x * cs + y * sn, i)
        })
        .collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut scales: Vec<f64> = support.iter().map(|&i| scale[i]).collect();
    scales.sort_by(f64::total_cmp);
    let gap = cfg.gap_factor * scales[scales.len() / 2];

    let mut clusters: Vec<Vec<(f64, usize)>> = vec![vec![proj[0]]];
    for w in proj.windows(2) {
        if w[1].0 - w[0].0 > gap {
            clusters.push(Vec::new());
        }
        clusters.last_mut().expect("non-empty").push(w[1]);
    }
    let largest = clusters.iter().map(Vec::len).max().unwrap_or(0);
    clusters.retain(|c| c.len() as f64 >= cfg.min_cluster_fraction * largest as f64);

    let trend = |c: &[(f64, usize)]| {
        let rising = c.iter().filter(|p| slope[p.1] > 0.0).count() as f64;
        let share = rising / c.len() as f64;
        if share >= 0.75 {
            1
        } else if share <= 0.25 {
            -1
        } else {
            0
        }
    };
    let mean = |c: &[(f64, usize)]| c.iter().map(|p| p.0).sum::<f64>() / c.len() as f64;

    let mut out = Vec::new();
    let mut k = 0;
    while k < clusters.len() {
        if k + 1 < clusters.len() && trend(&clusters[k]) == 1 && trend(&clusters[k + 1]) == -1 {
            let (a, b) = (&clusters[k], &clusters[k + 1]);
            out.push(((mean(a) + mean(b)) / 2.0, a.len() + b.len()));
            k += 2;
        } else {
            out.push((mean(&clusters[k]), clusters[k].len()));
            k += 1;
        }
    }
    out
}

/// [`hessian_responses`] followed by [`estimate_structures`].
pub fn estimate_m_and_angles<T: Real>(img: &GrayImage<T>, cfg: &HessianConfig) -> Result<HessianInit> {
    let resp = hessian_responses(img, cfg)?;
    estimate_structures(&resp, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageDomain;
    use crate::synth::{render_scene, BarSpec};

    fn bars(w: usize, h: usize, b: &[BarSpec]) -> GrayImage<f64> {
        render_scene(ImageDomain::new(w, h).unwrap(), b).unwrap().0
    }

    #[test]
    fn bin_edges() {
        assert_eq!(bin_index(-89.9, 2.0, 90), 0);
        assert_eq!(bin_index(-88.0, 2.0, 90), 0);
        assert_eq!(bin_index(-87.9, 2.0, 90), 1);
        assert_eq!(bin_index(90.0, 2.0, 90), 89);
        assert_eq!(bin_index(-90.0, 2.0, 90), 89);
        assert_eq!(bin_index(0.0, 2.0, 90), 44);
        assert_eq!(bin_index(0.1, 2.0, 90), 45);
    }

    #[test]
    fn constant_image_has_no_response() {
        let img = GrayImage::from_vec(ImageDomain::new(30, 20).unwrap(), vec![7.0f64; 600]).unwrap();
        let r = hessian_responses(&img, &HessianConfig::default()).unwrap();
        assert!(r.strength.as_slice().iter().all(|&v| v.abs() < 1e-9));
        assert_eq!(
            estimate_structures(&r, &HessianConfig::default()),
            Err(Error::NoStructureDetected)
        );
    }

    #[test]
    fn vertical_bar_points_along_x() {
        let img = bars(60, 50, &[BarSpec::new(30.0, 0.0, 5.0)]);
        let r = hessian_responses(&img, &HessianConfig::default()).unwrap();
        assert!(r.strength.get(30, 25) > 0.0);
        assert!(r.orientation.get(30, 25).abs() < 1e-9);
        let init = estimate_structures(&r, &HessianConfig::default()).unwrap();
        assert_eq!(init.m(), 1);
        assert!(init.angles()[0].to_degrees().abs() <= 2.0);
        assert!((init.radii()[0] - 30.0).abs() < 1.0);
    }

    #[test]
    fn dark_polarity() {
        let img = bars(60, 50, &[BarSpec::new(30.0, 0.0, 5.0)]).map(|v| 255.0 - v);
        let bright = HessianConfig::default();
        let dark = HessianConfig {
            polarity: Polarity::Dark,
            ..HessianConfig::default()
        };
        let r = hessian_responses(&img, &dark).unwrap();
        assert!(r.strength.get(30, 25) > 0.0);
        assert_eq!(hessian_responses(&img, &bright).unwrap().strength.get(30, 25), 0.0);
        assert_eq!(estimate_structures(&r, &dark).unwrap().m(), 1);
    }

    #[test]
    fn wide_bar_is_one_structure() {
        let img = bars(120, 90, &[BarSpec::new(60.0, 0.0, 31.0)]);
        let init = estimate_m_and_angles(&img, &HessianConfig::default()).unwrap();
        assert_eq!(init.m(), 1, "{:?}", init.structures);
        assert!((init.radii()[0] - 60.0).abs() < 1.5);
    }

    #[test]
    fn two_peaks_for_crossing_bars() {
        let img = bars(
            120,
            120,
            &[BarSpec::degrees(60.0, 0.0, 6.0), BarSpec::degrees(80.0, 60.0, 6.0)],
        );
        let init = estimate_m_and_angles(&img, &HessianConfig::default()).unwrap();
        assert_eq!(init.m(), 2);
        let mut a: Vec<f64> = init.angles().iter().map(|t| t.to_degrees()).collect();
        a.sort_by(f64::total_cmp);
        assert!(a[0].abs() < 2.0 && (a[1] - 60.0).abs() < 2.0, "{a:?}");
    }

    #[test]
    fn histogram_shape() {
        let img = bars(60, 50, &[BarSpec::degrees(30.0, 20.0, 5.0)]);
        let init = estimate_m_and_angles(&img, &HessianConfig::default()).unwrap();
        assert_eq!(init.histogram.counts.len(), 90);
        assert!(init.histogram.peaks.windows(2).all(|w| w[0].count >= w[1].count));
        let supported: usize = init.support.iter().map(Vec::len).sum();
        assert!(supported <= init.histogram.counts.iter().sum());
    }
}

//! Synthetic bar scenes with exact ground truth, and reproducible blur and
//! noise corruption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::em::MixtureState;
use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::image::{GrayImage, ImageDomain};
use crate::model::{sigma_from_width, ComponentParams, LineParams};

/// One straight bar: every pixel within `width / 2` of the centerline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarSpec {
    pub line: LineParams<f64>,
    pub width: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
}

fn default_intensity() -> f64 {
    255.0
}

impl BarSpec {
    pub fn new(rho: f64, theta: f64, width: f64) -> Self {
        Self {
            line: LineParams::new(rho, theta),
            width,
            intensity: default_intensity(),
        }
    }

    /// Same bar with the angle given in degrees.
    pub fn degrees(rho: f64, theta_deg: f64, width: f64) -> Self {
        Self::new(rho, theta_deg.to_radians(), width)
    }

    /// Reference scale `w / (2√3)`.
    pub fn sigma(&self) -> f64 {
        sigma_from_width(self.width).unwrap_or(f64::NAN)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.line.signed_distance(x as f64, y as f64).abs() <= self.width / 2.0
    }
}

/// A named scene: domain, bars and optionally the reference proportions to
/// score against (otherwise each bar's share of the gray mass).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub bars: Vec<BarSpec>,
    #[serde(default)]
    pub reference_pi: Option<Vec<f64>>,
}

impl Scene {
    pub fn domain(&self) -> Result<ImageDomain> {
        ImageDomain::new(self.width, self.height)
    }

    /// Rasterized image and the ground-truth mixture to score against.
    pub fn render(&self) -> Result<(GrayImage<f64>, MixtureState<f64>)> {
        let (img, mut truth) = render_scene(self.domain()?, &self.bars)?;
        if let Some(pi) = &self.reference_pi {
            if pi.len() != truth.len() {
                return Err(Error::invalid("reference proportions do not match the bar count"));
            }
            for (c, &p) in truth.components.iter_mut().zip(pi) {
                c.pi = p;
            }
        }
        Ok((img, truth))
    }
}

/// Single bar: 401×401, θ = 0, ρ = 299, w = 43.
pub fn r1() -> Scene {
    Scene {
        name: "r1".into(),
        width: 401,
        height: 401,
        bars: vec![BarSpec::new(299.0, 0.0, 43.0)],
        reference_pi: None,
    }
}

/// Two identical parallel bars at ρ = 97 and 299.
pub fn r2() -> Scene {
    Scene {
        name: "r2".into(),
        width: 401,
        height: 401,
        bars: vec![BarSpec::new(97.0, 0.0, 43.0), BarSpec::new(299.0, 0.0, 43.0)],
        reference_pi: None,
    }
}

/// Three bars of widths 8, 10, 15 on a 169×142 image.
pub fn r3() -> Scene {
    Scene {
        name: "r3".into(),
        width: 169,
        height: 142,
        bars: vec![
            BarSpec::degrees(38.0, 35.0, 8.0),
            BarSpec::degrees(112.0, -17.0, 10.0),
            BarSpec::degrees(79.0, 23.0, 15.0),
        ],
        reference_pi: Some(vec![0.14, 0.34, 0.52]),
    }
}

/// Five bars fanning out from the bottom of a 200×200 image, 12° apart,
/// crossing the row `y = 60` at `x = 30, 65, …, 170`. A stand-in for a hand
/// radiograph.
pub fn fan5() -> Scene {
    let bars = [-24.0f64, -12.0, 0.0, 12.0, 24.0]
        .iter()
        .zip([30.0, 65.0, 100.0, 135.0, 170.0])
        .zip([8.0, 9.0, 10.0, 9.0, 7.0])
        .map(|((&deg, x), w)| {
            let t = deg.to_radians();
            BarSpec::new(x * t.cos() + 60.0 * t.sin(), t, w)
        })
        .collect();
    Scene {
        name: "fan5".into(),
        width: 200,
        height: 200,
        bars,
        reference_pi: None,
    }
}

/// Scene by preset name.
pub fn preset(name: &str) -> Option<Scene> {
    match name {
        "r1" => Some(r1()),
        "r2" => Some(r2()),
        "r3" => Some(r3()),
        "fan5" => Some(fan5()),
        _ => None,
    }
}

/// Seeded random scene: sides in `[max_side/2, max_side]`, one to
/// `max_bars` bars of width 3 to 12 whose centerlines pass through the
/// middle half of the image.
pub fn random_scene(seed: u64, max_side: usize, max_bars: usize) -> Scene {
    let mut rng = rng_for(seed, RANDOM_SCENE_STREAM);
    let lo = (max_side / 2).max(8);
    let width = rng.random_range(lo..=max_side.max(lo));
    let height = rng.random_range(lo..=max_side.max(lo));
    let m = rng.random_range(1..=max_bars.max(1));
    let bars = (0..m)
        .map(|_| {
            let theta = rng.random_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
            let cx = width as f64 * rng.random_range(0.25..0.75);
            let cy = height as f64 * rng.random_range(0.25..0.75);
            let w = rng.random_range(3.0..12.0);
            BarSpec::new(cx * theta.cos() + cy * theta.sin(), theta, w)
        })
        .collect();
    Scene {
        name: format!("random-{seed}"),
        width,
        height,
        bars,
        reference_pi: None,
    }
}

const RANDOM_SCENE_STREAM: u64 = 0x5ce7e;

/// Rasterizes `bars` on a zero background. Overlapping bars take the larger
/// intensity. Reference proportions are each bar's share of the summed bar
/// masses.
pub fn render_scene(domain: ImageDomain, bars: &[BarSpec]) -> Result<(GrayImage<f64>, MixtureState<f64>)> {
    if bars.is_empty() {
        return Err(Error::invalid("a scene needs at least one bar"));
    }
    let mut img = GrayImage::new(domain);
    let mut masses = vec![0.0; bars.len()];
    for (k, bar) in bars.iter().enumerate() {
        if !(bar.width >= 1.0) || !(bar.intensity > 0.0) {
            return Err(Error::invalid(format!("bar {k}: width must be ≥ 1 and intensity > 0")));
        }
        for (i, x, y) in domain.pixels() {
            if bar.contains(x, y) {
                masses[k] += bar.intensity;
                let v: &mut f64 = &mut img.as_mut_slice()[i];
                *v = v.max(bar.intensity);
            }
        }
        if masses[k] == 0.0 {
            return Err(Error::invalid(format!("bar {k} lies entirely outside the image")));
        }
    }
    let total: f64 = masses.iter().sum();
    let components = bars
        .iter()
        .zip(&masses)
        .map(|(b, &m)| {
            let line = b.line.canonical();
            ComponentParams::new(line.rho, line.theta, b.sigma(), m / total)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((img, MixtureState::new(components)?))
}

/// Overall gain of the blur kernel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlurGain {
    /// Kernel sums to one; total mass is preserved.
    #[default]
    Unit,
    /// Kernel taken literally as `(2πκ²)^(−1/2)·exp(−(x²+y²)/(2κ²))` on the
    /// sampled support, which scales intensities by about `√(2π)·κ`.
    AsPrinted,
}

impl BlurGain {
    /// Factor applied on top of the normalized kernel.
    pub fn factor(self, kappa: f64, size: usize) -> f64 {
        match self {
            BlurGain::Unit => 1.0,
            BlurGain::AsPrinted => {
                let r = (size / 2) as i64;
                let s: f64 = (-r..=r).map(|t| (-((t * t) as f64) / (2.0 * kappa * kappa)).exp()).sum();
                s * s / ((2.0 * std::f64::consts::PI).sqrt() * kappa)
            }
        }
    }
}

impl std::str::FromStr for BlurGain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "as-printed" => Ok(Self::AsPrinted),
            _ => Err(Error::invalid(format!("unknown blur gain '{s}' (unit|as-printed)"))),
        }
    }
}

/// What happens to intensities after noise is added.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampPolicy {
    /// Keep signed values.
    None,
    /// Clamp below at 0.
    #[default]
    Zero,
    /// Clamp to `[0, 255]`.
    Byte,
}

impl std::str::FromStr for ClampPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "zero" => Ok(Self::Zero),
            "byte" => Ok(Self::Byte),
            _ => Err(Error::invalid(format!("unknown clamp policy '{s}' (none|zero|byte)"))),
        }
    }
}

/// Blur then additive white Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// Blur spread; 0 disables blurring.
    pub kappa: f64,
    #[serde(default = "default_kernel_size")]
    pub kernel_size: usize,
    /// Noise standard deviation; 0 disables noise.
    pub sigma_n: f64,
    pub seed: u64,
    /// Independent stream under the same seed, one per scenario.
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub clamp: ClampPolicy,
    #[serde(default)]
    pub gain: BlurGain,
}

fn default_kernel_size() -> usize {
    15
}

impl CorruptionSpec {
    pub fn new(sigma_n: f64, kappa: f64, seed: u64) -> Self {
        Self {
            kappa,
            kernel_size: default_kernel_size(),
            sigma_n,
            seed,
            stream: 0,
            clamp: ClampPolicy::default(),
            gain: BlurGain::default(),
        }
    }

    pub fn none() -> Self {
        Self::new(0.0, 0.0, 0)
    }

    pub fn is_identity(&self) -> bool {
        self.kappa == 0.0 && self.sigma_n == 0.0
    }
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The clean image corrupted per `spec`.
pub fn corrupt(img: &GrayImage<f64>, spec: &CorruptionSpec) -> Result<GrayImage<f64>> {
    if spec.kappa < 0.0 || spec.sigma_n < 0.0 || !spec.kappa.is_finite() || !spec.sigma_n.is_finite() {
        return Err(Error::invalid("kappa and sigma_n must be finite and non-negative"));
    }
    let mut out = if spec.kappa > 0.0 {
        let g = spec.gain.factor(spec.kappa, spec.kernel_size);
        let blurred = gaussian_blur(img, spec.kappa, spec.kernel_size)?;
        if g == 1.0 {
            blurred
        } else {
            blurred.map(|v| v * g)
        }
    } else {
        img.clone()
    };
    if spec.sigma_n > 0.0 {
        let normal = Normal::new(0.0, spec.sigma_n).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = rng_for(spec.seed, spec.stream);
        for v in out.as_mut_slice() {
            *v += normal.sample(&mut rng);
        }
        match spec.clamp {
            ClampPolicy::None => {}
            ClampPolicy::Zero => out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0)),
            ClampPolicy::Byte => out.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(0.0, 255.0)),
        }
    }
    Ok(out)
}

//! Initialization plus Algorithm 1 or 2 as one call.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::band::{run_em_bs, DEFAULT_NU};
use crate::em::{equal_proportions, init_params, normalize_image, run_em, spread_angles, EmConfig, EmOutcome, MixtureState};
use crate::error::{Error, Result};
use crate::hessian::{estimate_m_and_angles, HessianConfig, HessianInit};
use crate::image::GrayImage;
use crate::synth::rng_for;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Algorithm 1 on the whole image.
    #[default]
    Em,
    /// Algorithm 2 with band background subtraction.
    EmBs,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Self::Em),
            "em-bs" => Ok(Self::EmBs),
            _ => Err(Error::invalid(format!("unknown algorithm '{s}' (em|em-bs)"))),
        }
    }
}

/// Where the initial angles (and optionally radii) come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitStrategy {
    /// Given angles in radians; radii default to the mass-mean projection.
    Manual {
        angles: Vec<f64>,
        #[serde(default)]
        rho: Option<Vec<f64>>,
    },
    /// First angle `π·r` with `r` uniform in `[0, 1)`, the others spread
    /// evenly over `[θ₁, θ₁ + π)`.
    Random { m: usize },
    /// Angles, radii and `M` from the Hessian histogram; `m` keeps the `m`
    /// best-supported structures.
    Hessian {
        #[serde(default)]
        m: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub algorithm: Algorithm,
    pub init: InitStrategy,
    pub em: EmConfig<f64>,
    pub nu: f64,
    pub hessian: HessianConfig,
    /// Seed of the random initialization.
    pub seed: u64,
    /// Stream of the random initialization under `seed`.
    #[serde(default)]
    pub stream: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Em,
            init: InitStrategy::Random { m: 1 },
            em: EmConfig::default(),
            nu: DEFAULT_NU,
            hessian: HessianConfig::default(),
            seed: 0,
            stream: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub initial: MixtureState<f64>,
    pub outcome: EmOutcome<f64>,
    pub hessian: Option<HessianInit>,
}

/// Initial mixture for `img` under `cfg.init`.
pub fn initialize(img: &GrayImage<f64>, cfg: &DetectConfig) -> Result<(MixtureState<f64>, Option<HessianInit>)> {
    let h = normalize_image(img)?;
    match &cfg.init {
        InitStrategy::Manual { angles, rho } => {
            if angles.is_empty() {
                return Err(Error::invalid("manual init needs at least one angle"));
            }
            if let Some(r) = rho {
                if r.len() != angles.len() {
                    return Err(Error::invalid("manual init needs one radius per angle"));
                }
            }
            let state = init_params(&h, angles, &equal_proportions(angles.len()), rho.as_deref())?;
            Ok((state, None))
        }
        InitStrategy::Random { m } => {
            if *m == 0 {
                return Err(Error::invalid("random init needs M ≥ 1"));
            }
            let r: f64 = rng_for(cfg.seed, cfg.stream).random();
            let angles = spread_angles(std::f64::consts::PI * r, *m);
            Ok((init_params(&h, &angles, &equal_proportions(*m), None)?, None))
        }
        InitStrategy::Hessian { m } => {
            let mut found = estimate_m_and_angles(img, &cfg.hessian)?;
            if let Some(m) = *m {
                if m == 0 || m > found.structures.len() {
                    return Err(Error::invalid(format!(
                        "requested M = {m} but the Hessian found {} structures",
                        found.structures.len()
                    )));
                }
                let mut order: Vec<usize> = (0..found.structures.len()).collect();
                order.sort_by(|&a, &b| found.structures[b].pixels.cmp(&found.structures[a].pixels).then(a.cmp(&b)));
                order.truncate(m);
                order.sort_unstable();
                found.structures = order.into_iter().map(|i| found.structures[i]).collect();
            }
            let n = found.m();
            let state = init_params(&h, &found.angles(), &equal_proportions(n), Some(&found.radii()))?;
            Ok((state, Some(found)))
        }
    }
}

/// Initializes and runs the configured algorithm on `img`.
pub fn detect(img: &GrayImage<f64>, cfg: &DetectConfig) -> Result<Detection> {
    let (initial, hessian) = initialize(img, cfg)?;
    let outcome = match cfg.algorithm {
        Algorithm::Em => run_em(&normalize_image(img)?, initial.clone(), &cfg.em)?,
        Algorithm::EmBs => run_em_bs(img, initial.clone(), &cfg.em, cfg.nu)?,
    };
    Ok(Detection {
        initial,
        outcome,
        hessian,
    })
}

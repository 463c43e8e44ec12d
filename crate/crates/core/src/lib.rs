//! Thick linear structure detection.
//!
//! A grayscale image is treated as a population of unit gray-level volumes
//! drawn from a mixture of linear anchored Gaussians: densities that are
//! constant along a centerline `x·cosθ + y·sinθ = ρ` and Gaussian of scale
//! `σ` across it. Fitting the mixture by EM recovers each structure's
//! centerline and its thickness `w = 2√3·σ`.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the tolerances in this crate assume.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod model;
pub mod quartic;
pub mod scalar;

pub mod band;
pub mod bench;
pub mod em;
pub mod filter;
pub mod hessian;
pub mod metrics;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use image::{GrayImage, ImageDomain};
pub use model::{
    domain_volume, lagd_pdf, lagd_unnormalized, log_domain_volume, sigma_from_width, width_from_sigma, ComponentParams,
    LineParams, SIGMA_FLOOR,
};
pub use band::{build_band_mask, run_em_bs, BandMask};
pub use hessian::{estimate_m_and_angles, hessian_responses, HessianConfig, HessianInit, Polarity};
pub use metrics::{evaluate, ErrorReport};
pub use pipeline::{detect, Algorithm, DetectConfig, Detection, InitStrategy};
pub use synth::{BarSpec, BlurGain, ClampPolicy, CorruptionSpec, Scene};
pub use quartic::{solve_real_roots, QuarticCoeffs};
pub use scalar::{CompensatedSum, Real, TwoFold};

pub use em::{
    e_step, init_params, m_step, normalize_image, MStepKind, q_function, run_em, EmConfig, EmFlags, EmOutcome, MixtureState,
    NormalizedImage, Responsibilities, StopReason,
};

/// `f64` image.
pub type Image = GrayImage<f64>;
/// `f64` component.
pub type Component = ComponentParams<f64>;
/// `f64` line.
pub type Line = LineParams<f64>;
/// `f64` mixture state.
pub type Mixture = MixtureState<f64>;
/// `f64` normalized image.
pub type Normalized = NormalizedImage<f64>;

//! JSON documents written by the tool. See `SCHEMA.md`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thickline::{
    em::EmFlags, synth::Scene, width_from_sigma, Algorithm, Component, CorruptionSpec, Detection, InitStrategy, MStepKind,
    Mixture, StopReason,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub pi: f64,
    pub rho: f64,
    pub theta_rad: f64,
    pub theta_deg: f64,
    pub sigma: f64,
    pub width: f64,
}

impl From<&Component> for ComponentReport {
    fn from(c: &Component) -> Self {
        Self {
            pi: c.pi,
            rho: c.line.rho,
            theta_rad: c.line.theta,
            theta_deg: c.line.theta.to_degrees(),
            sigma: c.sigma,
            width: width_from_sigma(c.sigma).unwrap_or(f64::NAN),
        }
    }
}

pub fn components(m: &Mixture) -> Vec<ComponentReport> {
    m.components.iter().map(ComponentReport::from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSummary {
    pub m: usize,
    pub theta_rad: Vec<f64>,
    pub rho: Vec<f64>,
    /// Orientation peaks before parallel splitting.
    pub peaks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub init: InitStrategy,
    pub m_step: MStepKind,
    pub eps: f64,
    pub max_iter: usize,
    /// Band multiplier; present for `em-bs` only.
    pub nu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub schema_version: u32,
    pub input: Option<String>,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub settings: RunSettings,
    pub stop: StopReason,
    pub converged: bool,
    pub iterations: usize,
    /// Normalized log-likelihood at the start of the last iteration.
    pub log_likelihood: f64,
    pub runtime_ms: f64,
    pub flags: EmFlags,
    pub initial: Vec<ComponentReport>,
    pub components: Vec<ComponentReport>,
    pub hessian: Option<HessianSummary>,
}

impl DetectionReport {
    pub fn new(input: Option<String>, width: usize, height: usize, seed: u64, settings: RunSettings, d: &Detection) -> Self {
        let o = &d.outcome;
        Self {
            schema_version: SCHEMA_VERSION,
            input,
            width,
            height,
            seed,
            settings,
            stop: o.stop,
            converged: o.converged(),
            iterations: o.iterations,
            log_likelihood: o.loglik_history.last().copied().unwrap_or(f64::NAN),
            runtime_ms: o.runtime.as_secs_f64() * 1e3,
            flags: o.flags.clone(),
            initial: components(&d.initial),
            components: components(&o.state),
            hessian: d.hessian.as_ref().map(|h| HessianSummary {
                m: h.m(),
                theta_rad: h.angles(),
                rho: h.radii(),
                peaks: h.histogram.peaks.len(),
            }),
        }
    }

    /// Human-readable lines, angles in degrees.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} components, {} iterations ({:?}), {:.1} ms",
            self.components.len(),
            self.iterations,
            self.stop,
            self.runtime_ms
        );
        for (k, c) in self.components.iter().enumerate() {
            let _ = writeln!(
                s,
                "  #{k}: pi={:.4} rho={:.3} theta={:.3}° sigma={:.3} w={:.3}",
                c.pi, c.rho, c.theta_deg, c.sigma, c.width
            );
        }
        s
    }
}

/// Ground truth written next to a generated image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthReport {
    pub schema_version: u32,
    pub scene: Scene,
    pub corruption: Option<CorruptionSpec>,
    pub image: String,
    pub bits: u8,
    /// Samples clipped to the file's range when quantizing.
    pub clipped_pixels: usize,
    pub components: Vec<ComponentReport>,
}

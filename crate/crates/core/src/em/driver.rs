use std::borrow::Cow;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{e_step, m_step, MStepKind, MixtureState, NormalizedImage};

/// Stopping rule of the EM loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig<T> {
    /// Threshold on the change of the normalized Q between iterations.
    pub eps: T,
    pub max_iter: usize,
    pub m_step: MStepKind,
}

impl<T: Real> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(1e-6),
            max_iter: 1000,
            m_step: MStepKind::default(),
        }
    }
}

impl<T: Real> EmConfig<T> {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.eps > T::zero()) {
            return Err(Error::invalid("eps must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// `|ΔQ̃| < eps`.
    QConverged,
    /// Largest parameter change below the safeguard threshold.
    ParamsConverged,
    /// Iteration budget exhausted; the last state is returned.
    NotConverged,
}

/// Diagnostics accumulated over a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmFlags {
    /// Pixel-iterations whose posteriors underflowed and were set uniform.
    pub underflow_pixels: usize,
    /// Component-iterations where σ hit the floor.
    pub sigma_clamps: usize,
    /// Component-iterations where no admissible quartic root existed.
    pub theta_fallbacks: usize,
    /// Components frozen for vanishing proportion.
    pub collapsed: Vec<usize>,
    /// Iterations where the band mask kept no mass.
    pub empty_band_fallbacks: usize,
    /// Band multiplier below √3.
    pub narrow_band: bool,
    /// Last `ΔQ` in raw and normalized units.
    pub last_delta_q: f64,
    pub last_delta_q_raw: f64,
    /// Iterations completed before the volume-aware phase of a polished run.
    pub polish_from: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmOutcome<T> {
    pub state: MixtureState<T>,
    pub stop: StopReason,
    pub iterations: usize,
    pub flags: EmFlags,
    /// Normalized log-likelihood `Σ h·log f` of each iterate, starting with
    /// the initial state (on the data of that iteration).
    pub loglik_history: Vec<T>,
    pub runtime: Duration,
}

impl<T> EmOutcome<T> {
    pub fn converged(&self) -> bool {
        self.stop != StopReason::NotConverged
    }
}

/// Algorithm 1: alternate E- and M-steps on fixed data until the normalized
/// Q stops changing.
pub fn run_em<T: Real>(h: &NormalizedImage<T>, init: MixtureState<T>, cfg: &EmConfig<T>) -> Result<EmOutcome<T>> {
    drive(init, cfg, None, |_, _| Ok(Cow::Borrowed(h)))
}

/// Shared loop. `data` supplies the normalized image for the iteration about
/// to run, given the current state.
pub(crate) fn drive<'a, T, F>(
    init: MixtureState<T>,
    cfg: &EmConfig<T>,
    param_tol: Option<T>,
    mut data: F,
) -> Result<EmOutcome<T>>
where
    T: Real,
    F: FnMut(&MixtureState<T>, &mut EmFlags) -> Result<Cow<'a, NormalizedImage<T>>>,
{
    cfg.validate()?;
    let started = Instant::now();
    let mut flags = EmFlags::default();
    let mut state = init;
    state.q_history.clear();
    state.q_value = None;
    state.iteration = 0;
    let mut loglik = Vec::new();
    let mut stop = StopReason::NotConverged;
    let mut iterations = 0;
    let mut kind = match cfg.m_step {
        MStepKind::Polished => MStepKind::ClosedForm,
        k => k,
    };

    while iterations < cfg.max_iter {
        let h = data(&state, &mut flags)?;
        let z = e_step(&h, &state);
        flags.underflow_pixels += z.underflow_pixels;
        loglik.push(z.log_likelihood);
        let out = m_step(&h, &z, &state, kind)?;
        flags.sigma_clamps += out.sigma_clamps;
        flags.theta_fallbacks += out.theta_fallbacks;
        for k in out.collapsed {
            if !flags.collapsed.contains(&k) {
                flags.collapsed.push(k);
            }
        }
        let prev_q = state.q_value;
        let delta_params = state.max_abs_delta(&out.state);
        state = out.state;
        iterations += 1;

        let mut reason = None;
        if let Some(pq) = prev_q {
            let dq = (out.q - pq).abs();
            flags.last_delta_q = dq.as_f64();
            flags.last_delta_q_raw = (dq * h.mass()).as_f64();
            if dq < cfg.eps {
                reason = Some(StopReason::QConverged);
            }
        }
        if let Some(tol) = param_tol {
            if reason.is_none() && delta_params < tol {
                reason = Some(StopReason::ParamsConverged);
            }
        }
        if let Some(r) = reason {
            if kind == MStepKind::ClosedForm && cfg.m_step == MStepKind::Polished {
                kind = MStepKind::VolumeAware;
                flags.polish_from = Some(iterations);
                // The two phases record different Q values.
                state.q_value = None;
                continue;
            }
            stop = r;
            break;
        }
    }
    flags.collapsed.sort_unstable();

    Ok(EmOutcome {
        state,
        stop,
        iterations,
        flags,
        loglik_history: loglik,
        runtime: started.elapsed(),
    })
}

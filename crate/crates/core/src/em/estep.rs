use crate::image::ImageDomain;
use crate::model::{domain_volume, log_domain_volume};
use crate::scalar::{sorted_sum, CompensatedSum, Real};

use super::{MixtureState, NormalizedImage, Responsibilities};

/// Volume `V_m` under each component over the domain.
pub fn component_volumes<T: Real>(state: &MixtureState<T>, domain: ImageDomain) -> Vec<T> {
    state
        .components
        .iter()
        .map(|c| domain_volume(c, domain))
        .collect()
}

/// Posterior probabilities of every component at every pixel.
///
/// Densities are combined in the log domain. A pixel where every weighted
/// density is `−∞` or not finite gets uniform responsibilities and is counted
/// in [`Responsibilities::underflow_pixels`]. The same pass yields the
/// normalized log-likelihood `Σ h·log f` of `state`, with underflowed pixels
/// left out.
pub fn e_step<T: Real>(h: &NormalizedImage<T>, state: &MixtureState<T>) -> Responsibilities<T> {
    let domain = h.domain();
    let m = state.len();
    let log_volumes: Vec<T> = state
        .components
        .iter()
        .map(|c| log_domain_volume(c, domain))
        .collect();

    let two = T::lit(2.0);
    let sqrt_2pi = (two * T::PI()).sqrt();
    // log(π_m) − log(V_m σ_m √(2π)) and 1/(2σ²)
    let offsets: Vec<T> = state
        .components
        .iter()
        .zip(&log_volumes)
        .map(|(c, &log_v)| c.pi.ln() - log_v - (c.sigma * sqrt_2pi).ln())
        .collect();
    let inv_two_var: Vec<T> = state
        .components
        .iter()
        .map(|c| T::one() / (two * c.sigma * c.sigma))
        .collect();
    let trig: Vec<(T, T)> = state.components.iter().map(|c| c.line.theta.sin_cos()).collect();

    let uniform = T::one() / T::from_index(m);
    let mut z = vec![T::zero(); domain.len() * m];
    let mut log_w = vec![T::zero(); m];
    let mut terms = vec![T::zero(); m];
    let mut underflow = 0usize;
    let mut loglik = CompensatedSum::new();

    for (i, x, y) in domain.pixels() {
        let (xf, yf) = (T::from_index(x), T::from_index(y));
        let mut max = T::neg_infinity();
        for k in 0..m {
            let (s, c) = trig[k];
            let d = xf * c + yf * s - state.components[k].line.rho;
            let lw = offsets[k] - d * d * inv_two_var[k];
            log_w[k] = lw;
            if lw > max {
                max = lw;
            }
        }
        let row = &mut z[i * m..(i + 1) * m];
        if !max.is_finite() {
            row.iter_mut().for_each(|v| *v = uniform);
            underflow += 1;
            continue;
        }
        for k in 0..m {
            terms[k] = (log_w[k] - max).exp();
        }
        let mut scratch = terms.clone();
        let denom = sorted_sum(&mut scratch);
        if !(denom > T::zero()) || !denom.is_finite() {
            row.iter_mut().for_each(|v| *v = uniform);
            underflow += 1;
            continue;
        }
        for k in 0..m {
            row[k] = terms[k] / denom;
        }
        let hv = h.values()[i];
        if hv != T::zero() {
            loglik.add(hv * (max + denom.ln()));
        }
    }

    Responsibilities {
        domain,
        components: m,
        z,
        log_volumes,
        underflow_pixels: underflow,
        log_likelihood: loglik.value(),
    }
}

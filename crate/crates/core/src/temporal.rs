//! Delay dispersion of a power delay profile and the single-slope
//! exponential PDP model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smallscale::{sample, FadingModel};
use crate::sparsity::PdpRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    /// Power-weighted mean delay relative to the first tap (s).
    pub mean_excess_delay: f64,
    /// RMS delay spread (s).
    pub rms_delay_spread: f64,
}

pub fn delay_stats(p: &PdpRecord) -> Result<DelayStats> {
    p.validate()?;
    let t0 = p.delays[0];
    let total = p.total_power();
    let mean = p.delays.iter().zip(&p.powers).map(|(d, w)| w * (d - t0)).sum::<f64>() / total;
    let var = p
        .delays
        .iter()
        .zip(&p.powers)
        .map(|(d, w)| w * (d - t0 - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok(DelayStats { mean_excess_delay: mean, rms_delay_spread: var.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpPdpFit {
    /// Fitted share of total power in the first tap.
    pub p0_bar: f64,
    /// Decay constant (s); `+∞` when the profile does not decay.
    pub gamma: f64,
    pub r2: f64,
    /// False when the fitted slope is not negative.
    pub decaying: bool,
}

/// Least squares of `ln(P_n / P_tot)` on excess delay.
pub fn fit_exp_pdp(p: &PdpRecord) -> Result<ExpPdpFit> {
    p.validate()?;
    let total = p.total_power();
    let t0 = p.delays[0];
    let pts: Vec<(f64, f64)> = p
        .delays
        .iter()
        .zip(&p.powers)
        .filter(|(_, &w)| w > 0.0)
        .map(|(d, w)| (d - t0, (w / total).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("exponential fit needs at least two positive taps".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let decaying = slope < 0.0;
    Ok(ExpPdpFit {
        p0_bar: intercept.exp(),
        gamma: if decaying { -1.0 / slope } else { f64::INFINITY },
        r2,
        decaying,
    })
}

/// First-tap share of an `n_taps` exponential profile normalized to unit
/// total power.
pub fn exp_pdp_first_share(gamma: f64, delta_tau: f64, n_taps: usize) -> f64 {
    let r = (-delta_tau / gamma).exp();
    (1.0 - r) / (1.0 - r.powi(n_taps as i32))
}

/// Exponential profile `∝ exp(-τ/γ)` on `n_taps` taps spaced `delta_tau`,
/// each optionally scaled by the squared envelope drawn from `tap_fading`,
/// normalized to unit total power.
pub fn synth_exp_pdp(
    gamma: f64,
    delta_tau: f64,
    n_taps: usize,
    tap_fading: Option<&FadingModel>,
    seed: u64,
) -> Result<PdpRecord> {
    if !(gamma > 0.0 && delta_tau > 0.0 && gamma.is_finite() && delta_tau.is_finite()) {
        return Err(Error::domain(format!(
            "decay constant and spacing must be positive (gamma={gamma}, delta_tau={delta_tau})"
        )));
    }
    if n_taps == 0 {
        return Err(Error::domain("need at least one tap"));
    }
    let delays: Vec<f64> = (0..n_taps).map(|i| i as f64 * delta_tau).collect();
    let mut powers: Vec<f64> = delays.iter().map(|t| (-t / gamma).exp()).collect();
    if let Some(m) = tap_fading {
        let gains = sample(m, n_taps, seed)?;
        for (p, g) in powers.iter_mut().zip(gains) {
            *p *= g * g;
        }
    }
    let total: f64 = powers.iter().sum();
    powers.iter_mut().for_each(|p| *p /= total);
    PdpRecord::new(delays, powers)
}

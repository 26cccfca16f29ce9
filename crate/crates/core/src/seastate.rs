//! Pierson-Moskowitz wave spectrum and a finite-harmonic, long-crested sea
//! surface realization along the Tx-Rx axis.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;
/// Phillips constant of the P-M spectrum.
pub const PM_ALPHA: f64 = 8.1e-3;
pub const PM_BETA: f64 = 0.74;

/// P-M spectral density `a0 g² ω⁻⁵ exp(-β (g / (v ω))⁴)` in m²·s.
pub fn pm_spectrum(omega: f64, wind_speed: f64) -> Result<f64> {
    if !(omega > 0.0 && wind_speed > 0.0) {
        return Err(Error::domain(format!(
            "spectrum needs positive frequency and wind speed (omega={omega}, v={wind_speed})"
        )));
    }
    let r = GRAVITY / (wind_speed * omega);
    Ok(PM_ALPHA * GRAVITY * GRAVITY / omega.powi(5) * (-PM_BETA * r.powi(4)).exp())
}

/// Angular frequency of the spectral peak.
pub fn peak_frequency(wind_speed: f64) -> f64 {
    GRAVITY / wind_speed * (0.8 * PM_BETA).powf(0.25)
}

/// Total variance `∫ S dω = a0 v⁴ / (4 β g²)`.
pub fn total_variance(wind_speed: f64) -> f64 {
    PM_ALPHA * wind_speed.powi(4) / (4.0 * PM_BETA * GRAVITY * GRAVITY)
}

/// Deep-water wavelength for angular frequency `omega`.
pub fn deep_water_wavelength(omega: f64) -> f64 {
    2.0 * PI * GRAVITY / (omega * omega)
}

fn default_harmonics() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpectrumConfig {
    pub wind_speed: f64,
    #[serde(default = "default_harmonics")]
    pub n_harmonics: usize,
    /// Lower band edge (rad/s); `None` means half the peak frequency.
    #[serde(default)]
    pub omega_lo: Option<f64>,
    /// Upper band edge (rad/s); `None` means 2.5 times the peak frequency.
    #[serde(default)]
    pub omega_hi: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl WaveSpectrumConfig {
    pub fn new(wind_speed: f64, seed: u64) -> Self {
        WaveSpectrumConfig {
            wind_speed,
            n_harmonics: 5,
            omega_lo: None,
            omega_hi: None,
            seed,
        }
    }

    pub fn band(&self) -> (f64, f64) {
        let wp = peak_frequency(self.wind_speed);
        (self.omega_lo.unwrap_or(0.5 * wp), self.omega_hi.unwrap_or(2.5 * wp))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wind_speed.is_finite() && self.wind_speed > 0.0) {
            return Err(Error::domain(format!("wind speed must be positive, got {}", self.wind_speed)));
        }
        if self.n_harmonics == 0 {
            return Err(Error::domain("at least one harmonic is required"));
        }
        let (lo, hi) = self.band();
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::domain(format!("invalid frequency band [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub omega: f64,
    pub period: f64,
    pub wavelength: f64,
    pub phase: f64,
}

/// A sampled sea surface: a finite sum of progressive sinusoids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HarmonicSet {
    pub harmonics: Vec<Harmonic>,
}

impl HarmonicSet {
    /// A flat sea.
    pub fn calm() -> Self {
        HarmonicSet::default()
    }

    pub fn is_calm(&self) -> bool {
        self.harmonics.iter().all(|h| h.amplitude == 0.0)
    }

    /// Upper bound on `|surface_height|`.
    pub fn max_excursion(&self) -> f64 {
        self.harmonics.iter().map(|h| h.amplitude.abs()).sum()
    }

    pub fn shortest_wavelength(&self) -> Option<f64> {
        self.harmonics.iter().map(|h| h.wavelength).reduce(f64::min)
    }
}

/// Sample `n_harmonics` equally spaced components of the P-M spectrum.
///
/// Component `i` sits at the center of the `i`-th of `n` equal sub-bands
/// and carries amplitude `sqrt(2 S(ω_i) Δω)`; phases are drawn uniformly in
/// `[0, 2π)` from a generator seeded with `cfg.seed`.
pub fn build_harmonics(cfg: &WaveSpectrumConfig) -> Result<HarmonicSet> {
    cfg.validate()?;
    let (lo, hi) = cfg.band();
    let n = cfg.n_harmonics;
    let d_omega = (hi - lo) / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut harmonics = Vec::with_capacity(n);
    for i in 0..n {
        let omega = lo + (i as f64 + 0.5) * d_omega;
        let s = pm_spectrum(omega, cfg.wind_speed)?;
        harmonics.push(Harmonic {
            amplitude: (2.0 * s * d_omega).sqrt(),
            omega,
            period: 2.0 * PI / omega,
            wavelength: deep_water_wavelength(omega),
            phase: rng.random::<f64>() * 2.0 * PI,
        });
    }
    Ok(HarmonicSet { harmonics })
}

/// Sea height at time `t` and position `x` along the link.
pub fn surface_height(h: &HarmonicSet, t: f64, x: f64) -> f64 {
    h.harmonics
        .iter()
        .map(|c| c.amplitude * (2.0 * PI * t / c.period - 2.0 * PI * x / c.wavelength + c.phase).sin())
        .sum()
}

/// `4 sqrt(Σ A_i² / 2)`.
pub fn significant_wave_height(h: &HarmonicSet) -> f64 {
    4.0 * (h.harmonics.iter().map(|c| c.amplitude * c.amplitude).sum::<f64>() / 2.0).sqrt()
}

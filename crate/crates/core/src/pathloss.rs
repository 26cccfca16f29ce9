//! Large-scale path-loss models: free space, the simplified two-ray model,
//! the modified two-ray (MTR) model with sea-surface divergence, shadowing
//! and roughness factors, single- and dual-slope close-in (CI) models, and
//! the dual-slope CI-MTR model.
//!
//! All evaluators are deterministic. An interference null of a two-ray
//! style model is reported as `f64::INFINITY` rather than an error so that
//! distance sweeps run through nulls; use [`is_null`] to detect it.
//! Shadow fading is never added here; see [`shadow_fading`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geometry::{reflection_geometry, LinkGeometry, SPEED_OF_LIGHT};
use crate::numeric::bessel_i0e;

/// Magnitudes below this are treated as an exact interference null.
const NULL_EPS: f64 = 1e-12;

/// True when a loss value marks an interference null.
pub fn is_null(loss_db: f64) -> bool {
    loss_db == f64::INFINITY
}

fn default_gamma() -> Complex64 {
    Complex64::new(-1.0, 0.0)
}

/// Sea state as seen by the reflected ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeaState {
    /// Wind speed in m/s.
    pub wind_speed: f64,
    /// Smooth-sea reflection coefficient, serialized as `[re, im]`.
    #[serde(default = "default_gamma")]
    pub gamma: Complex64,
}

impl SeaState {
    pub fn new(wind_speed: f64) -> Result<Self> {
        let sea = SeaState {
            wind_speed,
            gamma: default_gamma(),
        };
        sea.validate()?;
        Ok(sea)
    }

    pub fn with_gamma(mut self, gamma: Complex64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wind_speed.is_finite() && self.wind_speed >= 0.0) {
            return Err(Error::domain(format!("wind speed must be >= 0, got {}", self.wind_speed)));
        }
        if !(self.gamma.norm() <= 1.0 + 1e-12) {
            return Err(Error::domain(format!("|gamma| must be <= 1, got {}", self.gamma.norm())));
        }
        Ok(())
    }
}

/// Form of the divergence factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceForm {
    /// `[1 + 2 d1 d2 / (r_e (h_t + h_r))]^(-1/2)`, always in (0, 1].
    #[default]
    InverseSqrt,
    /// `1 + 2 d1 d2 / (r_e (h_t + h_r))` exactly as typeset in the source
    /// formula; exceeds 1.
    AsPrinted,
}

/// Form of the reflected-ray phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseForm {
    /// `2π Δd / λ`.
    #[default]
    Corrected,
    /// `2π Δd / (λ d)` as typeset in the source formula.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MtrOptions {
    pub divergence: DivergenceForm,
    pub phase: PhaseForm,
}

/// Factors scaling the sea-surface reflection in the MTR model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtrFactors {
    pub divergence: f64,
    pub shadowing: f64,
    pub roughness: f64,
    /// Reflected-ray phase in radians.
    pub phase: f64,
    /// RMS sea slope.
    pub beta0: f64,
    /// Sea-height standard deviation in meters.
    pub sigma_s: f64,
}

impl MtrFactors {
    /// Same phase, with D = S = R = 1.
    pub fn without_losses(self) -> Self {
        MtrFactors {
            divergence: 1.0,
            shadowing: 1.0,
            roughness: 1.0,
            ..self
        }
    }

    /// `1 + D S R Γ e^{-jΦ}`.
    pub fn interference(&self, gamma: Complex64) -> Complex64 {
        let scale = self.divergence * self.shadowing * self.roughness;
        1.0 + gamma * scale * Complex64::from_polar(1.0, -self.phase)
    }
}

/// Empirical RMS sea slope for wind speed `v_w` (m/s).
pub fn rms_slope(wind_speed: f64) -> f64 {
    0.003 + 0.005_12 * wind_speed
}

/// Empirical sea-surface height standard deviation (m).
pub fn sea_height_std(wind_speed: f64) -> f64 {
    0.0051 * wind_speed * wind_speed
}

/// Wave-shadowing factor for grazing angle `grazing` and RMS slope `beta0`.
pub fn shadowing_factor(grazing: f64, beta0: f64) -> f64 {
    let mu = grazing.tan();
    if mu <= 0.0 {
        return 0.0;
    }
    let arg = mu / (std::f64::consts::SQRT_2 * beta0);
    let lambda = 0.5 * ((2.0 / PI).sqrt() * beta0 / mu * (-arg * arg).exp() - erfc(arg));
    (1.0 - 0.5 * erfc(arg)) / (lambda + 1.0)
}

/// Miller-Brown roughness factor `exp(-z) I0(z)`, `z = (4π σ_s sinθ)² / (2λ²)`.
pub fn roughness_factor(sigma_s: f64, grazing: f64, wavelength: f64) -> f64 {
    let g = 4.0 * PI * sigma_s * grazing.sin();
    let z = g * g / (2.0 * wavelength * wavelength);
    bessel_i0e(z)
}

pub fn divergence_factor(d1: f64, d2: f64, radius: f64, h_sum: f64, form: DivergenceForm) -> f64 {
    let x = 1.0 + 2.0 * d1 * d2 / (radius * h_sum);
    match form {
        DivergenceForm::InverseSqrt => 1.0 / x.sqrt(),
        DivergenceForm::AsPrinted => x,
    }
}

/// Free-space path loss in dB.
pub fn fspl(freq_hz: f64, distance: f64) -> f64 {
    20.0 * (4.0 * PI * freq_hz * distance / SPEED_OF_LIGHT).log10()
}

/// Simplified two-ray loss with Γ = -1 and `d >> h_t, h_r`.
pub fn two_ray_simplified(geom: &LinkGeometry) -> f64 {
    let lambda = geom.wavelength();
    let d = geom.distance;
    let s = (2.0 * PI * geom.h_tx * geom.h_rx / (lambda * d)).sin().abs();
    if s < NULL_EPS {
        return f64::INFINITY;
    }
    20.0 * ((4.0 * PI * d / lambda) / (2.0 * s)).log10()
}

/// MTR factors for the link with the antennas at the given heights above
/// the reflecting plane.
pub fn mtr_factors(
    geom: &LinkGeometry,
    sea: &SeaState,
    h_t_eff: f64,
    h_r_eff: f64,
    options: MtrOptions,
) -> Result<MtrFactors> {
    let refl = reflection_geometry(geom, h_t_eff, h_r_eff)?;
    let lambda = geom.wavelength();
    let beta0 = rms_slope(sea.wind_speed);
    let sigma_s = sea_height_std(sea.wind_speed);
    let divergence = divergence_factor(
        refl.d1,
        refl.d2,
        geom.effective_radius(),
        h_t_eff + h_r_eff,
        options.divergence,
    );
    let phase = match options.phase {
        PhaseForm::Corrected => 2.0 * PI * refl.delta_d / lambda,
        PhaseForm::AsPrinted => 2.0 * PI * refl.delta_d / (lambda * geom.distance),
    };
    Ok(MtrFactors {
        divergence,
        shadowing: shadowing_factor(refl.grazing_angle, beta0),
        roughness: roughness_factor(sigma_s, refl.grazing_angle, lambda),
        phase,
        beta0,
        sigma_s,
    })
}

/// MTR loss for explicit factors; `f64::INFINITY` at an exact null.
pub fn mtr_loss_from_factors(geom: &LinkGeometry, factors: &MtrFactors, gamma: Complex64) -> f64 {
    let mag = factors.interference(gamma).norm();
    if mag < NULL_EPS {
        return f64::INFINITY;
    }
    20.0 * ((4.0 * PI * geom.distance / geom.wavelength()) / mag).log10()
}

/// MTR loss with antennas at the given effective heights.
pub fn mtr_path_loss_at_heights(
    geom: &LinkGeometry,
    sea: &SeaState,
    h_t_eff: f64,
    h_r_eff: f64,
    options: MtrOptions,
) -> Result<f64> {
    let factors = mtr_factors(geom, sea, h_t_eff, h_r_eff, options)?;
    Ok(mtr_loss_from_factors(geom, &factors, sea.gamma))
}

/// Modified two-ray loss over a calm mean sea level.
pub fn mtr_path_loss(geom: &LinkGeometry, sea: &SeaState, options: MtrOptions) -> Result<f64> {
    mtr_path_loss_at_heights(geom, sea, geom.h_tx, geom.h_rx, options)
}

fn default_d0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiParams {
    /// Path-loss exponent.
    pub n: f64,
    #[serde(default = "default_d0")]
    pub d0: f64,
    #[serde(default)]
    pub sigma_sf: f64,
}

impl CiParams {
    pub fn new(n: f64) -> Self {
        CiParams { n, d0: 1.0, sigma_sf: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSlopeParams {
    pub n1: f64,
    pub n2: f64,
    pub d_break: f64,
    #[serde(default = "default_d0")]
    pub d0: f64,
    #[serde(default)]
    pub sigma_sf: f64,
}

impl DualSlopeParams {
    pub fn new(n1: f64, n2: f64, d_break: f64) -> Self {
        DualSlopeParams {
            n1,
            n2,
            d_break,
            d0: 1.0,
            sigma_sf: 0.0,
        }
    }
}

/// Close-in reference distance model (deterministic mean).
pub fn ci_path_loss(p: &CiParams, freq_hz: f64, distance: f64) -> Result<f64> {
    if distance < p.d0 {
        return Err(Error::domain(format!(
            "distance {distance} m is below the reference distance {} m",
            p.d0
        )));
    }
    Ok(fspl(freq_hz, p.d0) + 10.0 * p.n * (distance / p.d0).log10())
}

/// Dual-slope CI model, continuous at the break distance.
pub fn dual_ci_path_loss(p: &DualSlopeParams, freq_hz: f64, distance: f64) -> f64 {
    let anchor = fspl(freq_hz, p.d0);
    if distance <= p.d_break {
        anchor + 10.0 * p.n1 * (distance / p.d0).log10()
    } else {
        anchor + 10.0 * p.n1 * (p.d_break / p.d0).log10() + 10.0 * p.n2 * (distance / p.d_break).log10()
    }
}

/// Dual-slope CI-MTR model at `distance`: the MTR term scaled by `n1` up to
/// the break distance, then a second slope `n2` anchored at the MTR value
/// at the break distance.
pub fn dual_ci_mtr_path_loss(
    p: &DualSlopeParams,
    geom: &LinkGeometry,
    sea: &SeaState,
    options: MtrOptions,
    distance: f64,
) -> Result<f64> {
    let (seg_one, seg_two) = dual_ci_mtr_regressors(geom, sea, options, p.d_break, distance)?;
    if is_null(seg_one) {
        return Ok(f64::INFINITY);
    }
    Ok(p.n1 * seg_one + p.n2 * seg_two)
}

/// Regressors `(x1, x2)` of the dual-slope CI-MTR model, which is linear in
/// the exponents: `PL = n1 x1 + n2 x2`.
pub fn dual_ci_mtr_regressors(
    geom: &LinkGeometry,
    sea: &SeaState,
    options: MtrOptions,
    d_break: f64,
    distance: f64,
) -> Result<(f64, f64)> {
    let anchor = distance.min(d_break);
    let at = geom.with_distance(anchor)?;
    let mtr = mtr_path_loss(&at, sea, options)?;
    // 10 log10 of the amplitude ratio is half the MTR loss in dB
    let x1 = 0.5 * mtr;
    let x2 = if distance > d_break {
        10.0 * (distance / d_break).log10()
    } else {
        0.0
    };
    Ok((x1, x2))
}

/// Received power decomposition: `P_tx - PL - X_swift - X_small` (dBm).
pub fn received_power(p_tx_dbm: f64, path_loss_db: f64, swift_db: f64, small_scale_db: f64) -> f64 {
    p_tx_dbm - path_loss_db - swift_db - small_scale_db
}

/// Zero-mean Gaussian shadow-fading draws in dB.
pub fn shadow_fading(n: usize, sigma_db: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_db.is_finite() && sigma_db >= 0.0) {
        return Err(Error::domain(format!("shadow-fading sigma must be >= 0, got {sigma_db}")));
    }
    if sigma_db == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let normal = Normal::new(0.0, sigma_db).map_err(|e| Error::domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

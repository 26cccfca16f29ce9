//! Link geometry, physical constants and the threshold distances that split
//! a shore-to-ship link into propagation regimes.
//!
//! Everything here is SI (Hz, m, s). The only exception is the ITU-R P.1546
//! clearance expression, which is evaluated internally in MHz/km and
//! converted back to meters before it leaves
//! [`fresnel_clearance_distance`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mean Earth radius in meters. The effective radius used for horizon and
/// divergence calculations is `k_eff * earth_radius`.
pub const EARTH_RADIUS: f64 = 6_371_000.0;

fn default_earth_radius() -> f64 {
    EARTH_RADIUS
}

fn default_k_eff() -> f64 {
    1.0
}

/// Carrier, antenna heights over the calm sea and horizontal range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub freq_hz: f64,
    pub h_tx: f64,
    pub h_rx: f64,
    pub distance: f64,
    #[serde(default = "default_earth_radius")]
    pub earth_radius: f64,
    /// Effective-Earth-radius multiplier (1 = geometric, 4/3 = standard refraction).
    #[serde(default = "default_k_eff")]
    pub k_eff: f64,
}

impl LinkGeometry {
    pub fn new(freq_hz: f64, h_tx: f64, h_rx: f64, distance: f64) -> Result<Self> {
        let geom = LinkGeometry {
            freq_hz,
            h_tx,
            h_rx,
            distance,
            earth_radius: EARTH_RADIUS,
            k_eff: 1.0,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn with_k_eff(mut self, k_eff: f64) -> Result<Self> {
        self.k_eff = k_eff;
        self.validate()?;
        Ok(self)
    }

    pub fn with_distance(mut self, distance: f64) -> Result<Self> {
        self.distance = distance;
        self.validate()?;
        Ok(self)
    }

    pub fn with_heights(mut self, h_tx: f64, h_rx: f64) -> Result<Self> {
        self.h_tx = h_tx;
        self.h_rx = h_rx;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frequency", self.freq_hz),
            ("tx height", self.h_tx),
            ("rx height", self.h_rx),
            ("distance", self.distance),
            ("earth radius", self.earth_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.k_eff.is_finite() && self.k_eff >= 1.0) {
            return Err(Error::domain(format!("k_eff must be >= 1, got {}", self.k_eff)));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq_hz
    }

    pub fn effective_radius(&self) -> f64 {
        self.k_eff * self.earth_radius
    }
}

pub fn wavelength(freq_hz: f64) -> Result<f64> {
    if !(freq_hz.is_finite() && freq_hz > 0.0) {
        return Err(Error::domain(format!("frequency must be positive, got {freq_hz}")));
    }
    Ok(SPEED_OF_LIGHT / freq_hz)
}

/// Last maximum of the two-ray interference pattern, `4 h_t h_r / λ`.
pub fn break_distance(geom: &LinkGeometry) -> f64 {
    4.0 * geom.h_tx * geom.h_rx / geom.wavelength()
}

/// Distance to the radio horizon from one antenna of height `h`.
pub fn horizon_distance(h: f64, radius: f64) -> f64 {
    (h * h + 2.0 * h * radius).sqrt()
}

/// Maximum line-of-sight range over a spherical Earth of radius `k_eff * r_e`.
pub fn max_los_distance(geom: &LinkGeometry) -> f64 {
    let r = geom.effective_radius();
    horizon_distance(geom.h_tx, r) + horizon_distance(geom.h_rx, r)
}

/// Range beyond which Earth bulge intrudes into 60% of the first Fresnel
/// zone (ITU-R P.1546 form, MHz in / km out, converted to meters).
pub fn fresnel_clearance_distance(geom: &LinkGeometry) -> f64 {
    let f_mhz = geom.freq_hz / 1e6;
    let (ht, hr) = (geom.h_tx, geom.h_rx);
    let roots = ht.sqrt() + hr.sqrt();
    let km = 0.000_159_49 * f_mhz * ht * hr * roots / (0.000_038_9 * f_mhz * ht * hr + 4.1 * roots);
    km * 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDistances {
    pub d_break: f64,
    pub d_06f: f64,
    pub d_los_vision: f64,
}

pub fn thresholds(geom: &LinkGeometry) -> ThresholdDistances {
    ThresholdDistances {
        d_break: break_distance(geom),
        d_06f: fresnel_clearance_distance(geom),
        d_los_vision: max_los_distance(geom),
    }
}

/// Specular reflection point and path-length difference over a flat plane
/// at the effective reflection level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionGeometry {
    /// Horizontal distance Tx to reflection point.
    pub d1: f64,
    /// Horizontal distance reflection point to Rx.
    pub d2: f64,
    pub grazing_angle: f64,
    /// Reflected minus direct path length.
    pub delta_d: f64,
}

pub fn reflection_geometry(geom: &LinkGeometry, h_t_eff: f64, h_r_eff: f64) -> Result<ReflectionGeometry> {
    if !(h_t_eff > 0.0 && h_r_eff > 0.0) {
        return Err(Error::domain(format!(
            "effective heights must be positive (h_t_eff={h_t_eff}, h_r_eff={h_r_eff})"
        )));
    }
    let d = geom.distance;
    if !(d > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {d}")));
    }
    let d1 = d * h_t_eff / (h_t_eff + h_r_eff);
    let d2 = d - d1;
    let sum = h_t_eff + h_r_eff;
    let diff = h_t_eff - h_r_eff;
    // difference of square roots written without cancellation
    let reflected = (d * d + sum * sum).sqrt();
    let direct = (d * d + diff * diff).sqrt();
    let delta_d = 4.0 * h_t_eff * h_r_eff / (reflected + direct);
    Ok(ReflectionGeometry {
        d1,
        d2,
        grazing_angle: (h_t_eff / d1).atan(),
        delta_d,
    })
}

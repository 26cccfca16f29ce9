//! Least-squares fitting of path-loss exponents and shadow-fading spread.
//!
//! Every model fitted here is linear in its exponents once the break
//! distance and reference distance are fixed, so fits are closed-form
//! ordinary least squares in the dB domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{break_distance, LinkGeometry};
use crate::pathloss::{dual_ci_mtr_regressors, fspl, is_null, CiParams, DualSlopeParams, MtrOptions, SeaState};

/// Above this share of null-flagged samples a CI-MTR fit carries a warning.
pub const NULL_WARNING_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSample {
    /// Distance in meters.
    pub d: f64,
    pub pl_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FittedModel {
    Ci(CiParams),
    DualCi(DualSlopeParams),
    DualCiMtr(DualSlopeParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlFitReport {
    pub params: FittedModel,
    pub rmse_db: f64,
    pub n_samples: usize,
    /// Measured minus model, one per accepted sample.
    pub residuals: Vec<f64>,
    /// Samples dropped because the model sits on an interference null there.
    pub excluded_nulls: usize,
    pub warnings: Vec<String>,
}

fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

fn check_samples(samples: &[PathLossSample], d0: f64) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {}", samples.len())));
    }
    for s in samples {
        if !(s.d > 0.0 && s.pl_db.is_finite()) {
            return Err(Error::domain(format!("invalid sample d={} pl={}", s.d, s.pl_db)));
        }
        if s.d < d0 {
            return Err(Error::domain(format!("sample distance {} below reference distance {d0}", s.d)));
        }
    }
    Ok(())
}

/// Solve the 2x2 normal equations of `y ≈ a x1 + b x2` without intercept.
fn solve_two(rows: &[(f64, f64, f64)]) -> Result<(f64, f64)> {
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x1, x2, y) in rows {
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        s1y += x1 * y;
        s2y += x2 * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 || det == 0.0 {
        return Err(Error::Degenerate("singular dual-slope design".into()));
    }
    Ok(((s22 * s1y - s12 * s2y) / det, (s11 * s2y - s12 * s1y) / det))
}

/// Single-slope CI fit: `n = Σ a_i b_i / Σ b_i²`.
pub fn fit_ci(samples: &[PathLossSample], freq_hz: f64, d0: f64) -> Result<PlFitReport> {
    check_samples(samples, d0)?;
    let anchor = fspl(freq_hz, d0);
    let (mut sab, mut sbb) = (0.0, 0.0);
    for s in samples {
        let a = s.pl_db - anchor;
        let b = 10.0 * (s.d / d0).log10();
        sab += a * b;
        sbb += b * b;
    }
    let first = samples[0].d;
    if sbb == 0.0 || samples.iter().all(|s| s.d == first) {
        return Err(Error::Degenerate("all samples at one distance".into()));
    }
    let n = sab / sbb;
    let residuals: Vec<f64> = samples
        .iter()
        .map(|s| s.pl_db - anchor - n * 10.0 * (s.d / d0).log10())
        .collect();
    let rmse = rms(&residuals);
    Ok(PlFitReport {
        params: FittedModel::Ci(CiParams { n, d0, sigma_sf: rmse }),
        rmse_db: rmse,
        n_samples: residuals.len(),
        residuals,
        excluded_nulls: 0,
        warnings: Vec::new(),
    })
}

/// Dual-slope CI fit with the break distance held fixed.
///
/// Without any sample beyond `d_break` the result falls back to a
/// single-slope fit and carries a warning.
pub fn fit_dual_ci(samples: &[PathLossSample], freq_hz: f64, d_break: f64, d0: f64) -> Result<PlFitReport> {
    check_samples(samples, d0)?;
    if !(d_break > d0) {
        return Err(Error::domain(format!("break distance {d_break} must exceed d0 {d0}")));
    }
    if !samples.iter().any(|s| s.d > d_break) {
        let mut report = fit_ci(samples, freq_hz, d0)?;
        report
            .warnings
            .push("no samples beyond the break distance; second slope not identified".into());
        return Ok(report);
    }
    let anchor = fspl(freq_hz, d0);
    let design = |d: f64| {
        if d <= d_break {
            (10.0 * (d / d0).log10(), 0.0)
        } else {
            (10.0 * (d_break / d0).log10(), 10.0 * (d / d_break).log10())
        }
    };
    let rows: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|s| {
            let (x1, x2) = design(s.d);
            (x1, x2, s.pl_db - anchor)
        })
        .collect();
    let (n1, n2) = solve_two(&rows)?;
    let residuals: Vec<f64> = rows.iter().map(|&(x1, x2, y)| y - n1 * x1 - n2 * x2).collect();
    let rmse = rms(&residuals);
    Ok(PlFitReport {
        params: FittedModel::DualCi(DualSlopeParams {
            n1,
            n2,
            d_break,
            d0,
            sigma_sf: rmse,
        }),
        rmse_db: rmse,
        n_samples: residuals.len(),
        residuals,
        excluded_nulls: 0,
        warnings: Vec::new(),
    })
}

/// Dual-slope CI-MTR fit. The break distance comes from the geometry and
/// samples where the MTR term is an exact null are left out of the design.
pub fn fit_dual_ci_mtr(
    samples: &[PathLossSample],
    geom: &LinkGeometry,
    sea: &SeaState,
    options: MtrOptions,
) -> Result<PlFitReport> {
    check_samples(samples, 0.0)?;
    let d_break = break_distance(geom);
    let mut rows = Vec::with_capacity(samples.len());
    let mut nulls = 0usize;
    for s in samples {
        let (x1, x2) = dual_ci_mtr_regressors(geom, sea, options, d_break, s.d)?;
        if is_null(x1) {
            nulls += 1;
            continue;
        }
        rows.push((x1, x2, s.pl_db));
    }
    let mut warnings = Vec::new();
    if nulls as f64 > NULL_WARNING_SHARE * samples.len() as f64 {
        warnings.push(format!(
            "{nulls} of {} samples fall on interference nulls and were excluded",
            samples.len()
        ));
    }
    let beyond = rows.iter().any(|r| r.1 > 0.0);
    let (n1, n2) = if beyond {
        solve_two(&rows)?
    } else {
        let sxx: f64 = rows.iter().map(|r| r.0 * r.0).sum();
        if sxx == 0.0 {
            return Err(Error::Degenerate("no usable samples".into()));
        }
        warnings.push("no samples beyond the break distance; second slope not identified".into());
        (rows.iter().map(|r| r.0 * r.2).sum::<f64>() / sxx, f64::NAN)
    };
    let residuals: Vec<f64> = rows
        .iter()
        .map(|&(x1, x2, y)| y - n1 * x1 - if x2 > 0.0 { n2 * x2 } else { 0.0 })
        .collect();
    let rmse = rms(&residuals);
    Ok(PlFitReport {
        params: FittedModel::DualCiMtr(DualSlopeParams {
            n1,
            n2,
            d_break,
            d0: 1.0,
            sigma_sf: rmse,
        }),
        rmse_db: rmse,
        n_samples: residuals.len(),
        residuals,
        excluded_nulls: nulls,
        warnings,
    })
}

/// RMS deviation of the samples from a model, in dB.
pub fn shadow_sigma<F: Fn(f64) -> f64>(samples: &[PathLossSample], model: F) -> f64 {
    let residuals: Vec<f64> = samples.iter().map(|s| s.pl_db - model(s.d)).collect();
    rms(&residuals)
}

//! Small-scale envelope statistics: six candidate families with densities,
//! distribution functions, samplers, maximum-likelihood fitting and
//! goodness-of-fit measures.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::numeric::{bessel_i0e, gauss_kronrod_15, integrate, ln_bessel_i0, mean, median, nelder_mead, std_dev};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FadingModel {
    Rician { s: f64, sigma: f64 },
    /// Two specular waves plus diffuse power `2σ²`; `k` is the linear
    /// specular-to-diffuse ratio and `delta` the specular balance.
    Twdp { k: f64, delta: f64, sigma: f64 },
    Nakagami { mu: f64, omega: f64 },
    /// `ln x ~ N(mu, sigma²)`.
    Lognormal { mu: f64, sigma: f64 },
    Laplace { mu: f64, b: f64 },
    AsymLaplace { mu: f64, b1: f64, b2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Rician,
    Twdp,
    Nakagami,
    Lognormal,
    Laplace,
    AsymLaplace,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Rician,
        Family::Twdp,
        Family::Nakagami,
        Family::Lognormal,
        Family::Laplace,
        Family::AsymLaplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rician => "rician",
            Family::Twdp => "twdp",
            Family::Nakagami => "nakagami",
            Family::Lognormal => "lognormal",
            Family::Laplace => "laplace",
            Family::AsymLaplace => "asym-laplace",
        }
    }

    /// Families whose support is the positive half-line.
    pub fn is_amplitude(self) -> bool {
        !matches!(self, Family::Laplace | Family::AsymLaplace)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown distribution family '{s}'")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {v}")))
    }
}

impl FadingModel {
    pub fn family(&self) -> Family {
        match self {
            FadingModel::Rician { .. } => Family::Rician,
            FadingModel::Twdp { .. } => Family::Twdp,
            FadingModel::Nakagami { .. } => Family::Nakagami,
            FadingModel::Lognormal { .. } => Family::Lognormal,
            FadingModel::Laplace { .. } => Family::Laplace,
            FadingModel::AsymLaplace { .. } => Family::AsymLaplace,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingModel::Rician { s, sigma } => {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::domain(format!("Rician s must be >= 0, got {s}")));
                }
                positive("Rician sigma", sigma)
            }
            FadingModel::Twdp { k, delta, sigma } => {
                if !(k.is_finite() && k >= 0.0) {
                    return Err(Error::domain(format!("TWDP K must be >= 0, got {k}")));
                }
                if !(0.0..=1.0).contains(&delta) {
                    return Err(Error::domain(format!("TWDP delta must lie in [0, 1], got {delta}")));
                }
                positive("TWDP sigma", sigma)
            }
            FadingModel::Nakagami { mu, omega } => {
                if !(mu.is_finite() && mu >= 0.5) {
                    return Err(Error::domain(format!("Nakagami mu must be >= 0.5, got {mu}")));
                }
                positive("Nakagami omega", omega)
            }
            FadingModel::Lognormal { mu, sigma } => {
                finite("lognormal mu", mu)?;
                positive("lognormal sigma", sigma)
            }
            FadingModel::Laplace { mu, b } => {
                finite("Laplace mu", mu)?;
                positive("Laplace b", b)
            }
            FadingModel::AsymLaplace { mu, b1, b2 } => {
                finite("asymmetric Laplace mu", mu)?;
                positive("asymmetric Laplace b1", b1)?;
                positive("asymmetric Laplace b2", b2)
            }
        }
    }

    /// Range outside which the density of an amplitude family is
    /// negligible (below `exp(-70)` relative to its peak).
    pub fn effective_support(&self) -> (f64, f64) {
        match *self {
            FadingModel::Rician { s, sigma } => ((s - 12.0 * sigma).max(0.0), s + 12.0 * sigma),
            FadingModel::Twdp { k, delta, sigma } => {
                let lo = sigma * (2.0 * k * (1.0 - delta)).sqrt();
                let hi = sigma * (2.0 * k * (1.0 + delta)).sqrt();
                ((lo - 12.0 * sigma).max(0.0), hi + 12.0 * sigma)
            }
            FadingModel::Nakagami { mu, omega } => {
                let sd = (omega / (4.0 * mu)).sqrt();
                let peak = omega.sqrt();
                ((peak - 14.0 * sd).max(0.0), peak + 14.0 * sd + 2.0 * omega.sqrt() / mu.sqrt())
            }
            FadingModel::Lognormal { mu, sigma } => ((mu - 12.0 * sigma).exp(), (mu + 12.0 * sigma).exp()),
            FadingModel::Laplace { mu, b } => (mu - 70.0 * b, mu + 70.0 * b),
            FadingModel::AsymLaplace { mu, b1, b2 } => (mu - 70.0 * b1, mu + 70.0 * b2),
        }
    }
}

const TWDP_START_NODES: usize = 64;
const TWDP_MAX_NODES: usize = 1 << 16;

/// Log of the TWDP density at `u > 0`.
///
/// The density is a uniform mixture over `x ∈ [0, π]` of Rician densities
/// with specular amplitude `s(x) = σ sqrt(2K(1 - Δ cos x))`. The mixing
/// integrand is smooth and periodic, so the trapezoid rule converges
/// geometrically; nodes are doubled from 64 until the estimate moves by
/// less than 1e-9 relative.
fn twdp_log_pdf(u: f64, k: f64, delta: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    // each node contributes exp(g) * i0e(z); g is kept apart so the sum can
    // be carried in the linear domain relative to a running maximum
    let node = |x: f64| {
        let s = sigma * (2.0 * k * (1.0 - delta * x.cos())).max(0.0).sqrt();
        (-(u - s) * (u - s) / (2.0 * s2), bessel_i0e(u * s / s2))
    };
    let mut shift = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let add = |g: f64, b: f64, w: f64, sum: &mut f64, shift: &mut f64| {
        if g > *shift {
            *sum *= (*shift - g).exp();
            *shift = g;
        }
        *sum += w * b * (g - *shift).exp();
    };
    let mut n = TWDP_START_NODES;
    for j in 0..=n {
        let (g, b) = node(j as f64 * PI / n as f64);
        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
        add(g, b, w, &mut sum, &mut shift);
    }
    let mut estimate = sum.ln() + shift + (PI / n as f64).ln();
    while n < TWDP_MAX_NODES {
        let h = PI / n as f64;
        for j in 0..n {
            let (g, b) = node((j as f64 + 0.5) * h);
            add(g, b, 1.0, &mut sum, &mut shift);
        }
        n *= 2;
        let next = sum.ln() + shift + (PI / n as f64).ln();
        let change = (next - estimate).abs();
        estimate = next;
        if change < 1e-9 {
            break;
        }
    }
    u.ln() - 2.0 * sigma.ln() + estimate - PI.ln()
}

fn rician_log_pdf(x: f64, s: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let z = x * s / s2;
    x.ln() - 2.0 * sigma.ln() - (x - s) * (x - s) / (2.0 * s2) + ln_bessel_i0(z) - z
}

/// Log density; `-∞` outside the support.
pub fn log_pdf(m: &FadingModel, x: f64) -> Result<f64> {
    m.validate()?;
    Ok(log_pdf_unchecked(m, x))
}

fn log_pdf_unchecked(m: &FadingModel, x: f64) -> f64 {
    if m.family().is_amplitude() && x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    match *m {
        FadingModel::Rician { s, sigma } => rician_log_pdf(x, s, sigma),
        FadingModel::Twdp { k, delta, sigma } => twdp_log_pdf(x, k, delta, sigma),
        FadingModel::Nakagami { mu, omega } => {
            2f64.ln() + mu * (mu / omega).ln() - ln_gamma(mu) + (2.0 * mu - 1.0) * x.ln() - mu * x * x / omega
        }
        FadingModel::Lognormal { mu, sigma } => {
            let z = (x.ln() - mu) / sigma;
            -x.ln() - sigma.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
        }
        FadingModel::Laplace { mu, b } => -(2.0 * b).ln() - (x - mu).abs() / b,
        FadingModel::AsymLaplace { mu, b1, b2 } => {
            let tail = if x < mu { (x - mu) / b1 } else { -(x - mu) / b2 };
            -(b1 + b2).ln() + tail
        }
    }
}

pub fn pdf(m: &FadingModel, x: f64) -> Result<f64> {
    Ok(log_pdf(m, x)?.exp())
}

fn pdf_unchecked(m: &FadingModel, x: f64) -> f64 {
    log_pdf_unchecked(m, x).exp()
}

/// Panels for integrating an amplitude density with peak width `w` over `[lo, hi]`.
fn panels_for(lo: f64, hi: f64, w: f64) -> usize {
    (((hi - lo) / w).ceil() as usize).clamp(8, 4096)
}

fn characteristic_width(m: &FadingModel) -> f64 {
    match *m {
        FadingModel::Rician { sigma, .. } | FadingModel::Twdp { sigma, .. } => sigma,
        _ => {
            let (lo, hi) = m.effective_support();
            (hi - lo) / 64.0
        }
    }
}

/// Distribution function. Rician and TWDP are integrated numerically
/// (absolute tolerance 1e-8); the rest are closed forms.
pub fn cdf(m: &FadingModel, x: f64) -> Result<f64> {
    m.validate()?;
    Ok(cdf_unchecked(m, x))
}

fn cdf_unchecked(m: &FadingModel, x: f64) -> f64 {
    if m.family().is_amplitude() && x <= 0.0 {
        return 0.0;
    }
    match *m {
        FadingModel::Rician { .. } | FadingModel::Twdp { .. } => {
            let (lo, hi) = m.effective_support();
            if x <= lo {
                return 0.0;
            }
            let top = x.min(hi);
            let v = integrate(|u| pdf_unchecked(m, u), lo, top, 1e-9, panels_for(lo, top, characteristic_width(m)));
            v.clamp(0.0, 1.0)
        }
        FadingModel::Nakagami { mu, omega } => gamma_lr(mu, mu * x * x / omega),
        FadingModel::Lognormal { mu, sigma } => 0.5 * erfc(-(x.ln() - mu) / (sigma * 2f64.sqrt())),
        FadingModel::Laplace { mu, b } => {
            if x < mu {
                0.5 * ((x - mu) / b).exp()
            } else {
                1.0 - 0.5 * (-(x - mu) / b).exp()
            }
        }
        FadingModel::AsymLaplace { mu, b1, b2 } => {
            let total = b1 + b2;
            if x < mu {
                b1 / total * ((x - mu) / b1).exp()
            } else {
                1.0 - b2 / total * (-(x - mu) / b2).exp()
            }
        }
    }
}

/// Cumulative table of a density on a uniform grid with cubic Hermite
/// interpolation (values from per-cell Gauss-Kronrod, slopes from the
/// density itself).
struct CdfTable {
    lo: f64,
    step: f64,
    cum: Vec<f64>,
    dens: Vec<f64>,
}

impl CdfTable {
    fn new<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cells: usize) -> Self {
        let step = (hi - lo) / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        let mut dens = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        dens.push(f(lo));
        for i in 0..cells {
            let a = lo + i as f64 * step;
            acc += gauss_kronrod_15(&f, a, a + step).0;
            cum.push(acc);
            dens.push(f(a + step));
        }
        CdfTable { lo, step, cum, dens }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.cum.len() - 1;
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 {
            return 0.0;
        }
        if pos >= n as f64 {
            return self.cum[n].min(1.0);
        }
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * self.cum[i]
            + (t3 - 2.0 * t2 + t) * self.step * self.dens[i]
            + (-2.0 * t3 + 3.0 * t2) * self.cum[i + 1]
            + (t3 - t2) * self.step * self.dens[i + 1];
        v.clamp(0.0, 1.0)
    }
}

/// Distribution function at many points; Rician and TWDP go through one
/// cumulative table instead of an integral per point.
fn cdf_many(m: &FadingModel, xs: &[f64]) -> Vec<f64> {
    match m {
        FadingModel::Rician { .. } | FadingModel::Twdp { .. } if xs.len() > 64 => {
            let (lo, hi) = m.effective_support();
            let cells = (((hi - lo) / (characteristic_width(m) / 64.0)).ceil() as usize).clamp(64, 1 << 16);
            let table = CdfTable::new(|u| pdf_unchecked(m, u), lo, hi, cells);
            xs.iter().map(|&x| table.eval(x)).collect()
        }
        _ => xs.iter().map(|&x| cdf_unchecked(m, x)).collect(),
    }
}

/// `V1, V2` of the two specular waves for given `(K, Δ, σ)`.
pub fn voltages_from_params(k: f64, delta: f64, sigma: f64) -> Result<(f64, f64)> {
    FadingModel::Twdp { k, delta, sigma }.validate()?;
    let p = 2.0 * sigma * sigma * k;
    let a = (p * (1.0 + delta)).sqrt();
    let b = (p * (1.0 - delta)).sqrt();
    Ok((0.5 * (a + b), 0.5 * (a - b)))
}

/// `(K, Δ)` from the specular amplitudes.
pub fn params_from_voltages(v1: f64, v2: f64, sigma: f64) -> Result<(f64, f64)> {
    positive("sigma", sigma)?;
    if !(v2 >= 0.0 && v1 >= v2 && v1.is_finite()) {
        return Err(Error::domain(format!("voltages must satisfy 0 <= V2 <= V1, got V1={v1}, V2={v2}")));
    }
    let p = v1 * v1 + v2 * v2;
    let delta = if p == 0.0 { 0.0 } else { 2.0 * v1 * v2 / p };
    Ok((p / (2.0 * sigma * sigma), delta))
}

/// `10 log10(s² / 2σ²)`.
pub fn rician_k_db(s: f64, sigma: f64) -> Result<f64> {
    positive("sigma", sigma)?;
    Ok(10.0 * (s * s / (2.0 * sigma * sigma)).log10())
}

/// `n` i.i.d. draws.
pub fn sample(m: &FadingModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    m.validate()?;
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let out = match *m {
        FadingModel::Rician { s, sigma } => (0..n)
            .map(|_| {
                let re = s + sigma * gauss(&mut rng);
                let im = sigma * gauss(&mut rng);
                re.hypot(im)
            })
            .collect(),
        FadingModel::Twdp { k, delta, sigma } => {
            let (v1, v2) = voltages_from_params(k, delta, sigma)?;
            (0..n)
                .map(|_| {
                    let p1 = rng.random::<f64>() * 2.0 * PI;
                    let p2 = rng.random::<f64>() * 2.0 * PI;
                    let re = v1 * p1.cos() + v2 * p2.cos() + sigma * gauss(&mut rng);
                    let im = v1 * p1.sin() + v2 * p2.sin() + sigma * gauss(&mut rng);
                    re.hypot(im)
                })
                .collect()
        }
        FadingModel::Nakagami { mu, omega } => {
            let g = Gamma::new(mu, omega / mu).map_err(|e| Error::domain(e.to_string()))?;
            (0..n).map(|_| rng.sample(g).sqrt()).collect()
        }
        FadingModel::Lognormal { mu, sigma } => (0..n).map(|_| (mu + sigma * gauss(&mut rng)).exp()).collect(),
        FadingModel::Laplace { mu, b } => (0..n)
            .map(|_| {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    mu + b * e
                } else {
                    mu - b * e
                }
            })
            .collect(),
        FadingModel::AsymLaplace { mu, b1, b2 } => {
            let left = b1 / (b1 + b2);
            (0..n)
                .map(|_| {
                    let e: f64 = rng.sample(Exp1);
                    if rng.random::<f64>() < left {
                        mu - b1 * e
                    } else {
                        mu + b2 * e
                    }
                })
                .collect()
        }
    };
    Ok(out)
}

/// A batch of envelope amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSamples {
    values: Vec<f64>,
}

impl EnvelopeSamples {
    /// Take values as they are.
    pub fn raw(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no envelope samples".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("non-finite envelope sample {v}")));
        }
        Ok(EnvelopeSamples { values })
    }

    /// Scale values to unit mean.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let raw = Self::raw(values)?;
        if raw.values.iter().any(|&v| v <= 0.0) {
            return Err(Error::domain("envelope amplitudes must be positive"));
        }
        let m = mean(&raw.values);
        Ok(EnvelopeSamples { values: raw.values.into_iter().map(|v| v / m).collect() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical step CDF
/// and the model CDF.
pub fn ks_statistic(data: &EnvelopeSamples, m: &FadingModel) -> Result<f64> {
    m.validate()?;
    let mut xs = data.values.clone();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let f = cdf_many(m, &xs);
    let mut d: f64 = 0.0;
    for (i, fi) in f.into_iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - fi).max(fi - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Equal-width histogram over `[min, max]` as `(center, density)` pairs.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<(f64, f64)>> {
    if bins < 2 {
        return Err(Error::domain(format!("need at least 2 bins, got {bins}")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("histogram of constant data".into()));
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    let norm = values.len() as f64 * w;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * w, c as f64 / norm))
        .collect())
}

/// RMS difference between the data histogram and a density at bin centers.
pub fn pdf_rmse_with<F: Fn(f64) -> f64>(data: &EnvelopeSamples, density: F, bins: usize) -> Result<f64> {
    let h = histogram(&data.values, bins)?;
    let ss: f64 = h.iter().map(|&(c, v)| (v - density(c)).powi(2)).sum();
    Ok((ss / h.len() as f64).sqrt())
}

pub fn pdf_rmse(data: &EnvelopeSamples, m: &FadingModel, bins: usize) -> Result<f64> {
    m.validate()?;
    pdf_rmse_with(data, |x| pdf_unchecked(m, x), bins)
}

pub fn log_likelihood(data: &EnvelopeSamples, m: &FadingModel) -> Result<f64> {
    m.validate()?;
    Ok(data.values.iter().map(|&x| log_pdf_unchecked(m, x)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub min_samples: usize,
    pub bins: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { min_samples: 30, bins: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FadingModel,
    pub ks: f64,
    pub pdf_rmse: f64,
    pub loglik: f64,
    pub n_samples: usize,
    pub bins: usize,
    /// False when the numeric search stopped on its evaluation budget.
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitReport {
    /// Rician K factor in dB for Rician and TWDP fits.
    pub fn k_db(&self) -> Option<f64> {
        match self.model {
            FadingModel::Rician { s, sigma } => rician_k_db(s, sigma).ok(),
            FadingModel::Twdp { k, .. } => Some(10.0 * k.log10()),
            _ => None,
        }
    }
}

/// Maximum-likelihood fit of one family.
///
/// Lognormal, Laplace and asymmetric Laplace have closed forms; Nakagami
/// reduces to a one-dimensional root; Rician and TWDP use a simplex search
/// on log-scaled parameters, TWDP from a multi-start grid.
pub fn fit_mle(family: Family, data: &EnvelopeSamples, opts: &FitOptions) -> Result<FitReport> {
    let xs = data.values();
    if xs.len() < opts.min_samples {
        return Err(Error::Degenerate(format!(
            "{} samples is below the fitting floor of {}",
            xs.len(),
            opts.min_samples
        )));
    }
    if std_dev(xs) <= 1e-12 * mean(xs).abs() {
        return Err(Error::Degenerate("envelope samples have zero variance".into()));
    }
    if family.is_amplitude() && xs.iter().any(|&x| x <= 0.0) {
        return Err(Error::domain(format!("{family} fitting needs positive amplitudes")));
    }
    let mut warnings = Vec::new();
    let (model, converged) = match family {
        Family::Lognormal => {
            let logs: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
            (FadingModel::Lognormal { mu: mean(&logs), sigma: std_dev(&logs) }, true)
        }
        Family::Laplace => {
            let mu = median(xs);
            let b = xs.iter().map(|x| (x - mu).abs()).sum::<f64>() / xs.len() as f64;
            (FadingModel::Laplace { mu, b }, true)
        }
        Family::AsymLaplace => (fit_asym_laplace(xs), true),
        Family::Nakagami => {
            let (model, clamped) = fit_nakagami(xs)?;
            if clamped {
                warnings.push("Nakagami shape hit its lower bound 0.5".into());
            }
            (model, true)
        }
        Family::Rician => fit_rician(xs),
        Family::Twdp => fit_twdp(xs),
    };
    if !converged {
        warnings.push("likelihood search stopped on its evaluation budget".into());
    }
    model.validate()?;
    Ok(FitReport {
        model,
        ks: ks_statistic(data, &model)?,
        pdf_rmse: pdf_rmse(data, &model, opts.bins)?,
        loglik: log_likelihood(data, &model)?,
        n_samples: xs.len(),
        bins: opts.bins,
        converged,
        warnings,
    })
}

/// Location minimizing `sqrt(α) + sqrt(β)` over the data points, where α
/// and β are the mean left and right deviations; scales follow in closed
/// form as `b1 = α + sqrt(αβ)`, `b2 = β + sqrt(αβ)`.
fn fit_asym_laplace(xs: &[f64]) -> FadingModel {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let nf = n as f64;
    let total: f64 = v.iter().sum();
    let mut below = 0.0;
    let mut best = (f64::INFINITY, v[0], 0.0, 0.0);
    for (i, &mu) in v.iter().enumerate() {
        // i points strictly left of index i
        let alpha = (i as f64 * mu - below) / nf;
        let beta = ((total - below) - (n - i) as f64 * mu) / nf;
        let score = alpha.max(0.0).sqrt() + beta.max(0.0).sqrt();
        if score < best.0 {
            best = (score, mu, alpha.max(0.0), beta.max(0.0));
        }
        below += mu;
    }
    let (_, mu, alpha, beta) = best;
    let g = (alpha * beta).sqrt();
    FadingModel::AsymLaplace { mu, b1: alpha + g, b2: beta + g }
}

fn fit_nakagami(xs: &[f64]) -> Result<(FadingModel, bool)> {
    let omega = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    let mean_log = xs.iter().map(|x| (x * x).ln()).sum::<f64>() / xs.len() as f64;
    let c = omega.ln() - mean_log;
    if !(c > 0.0) {
        return Err(Error::Degenerate("Nakagami shape equation has no solution".into()));
    }
    // ln m - ψ(m) decreases from +∞ to 0
    let g = |m: f64| m.ln() - digamma(m) - c;
    if g(0.5) <= 0.0 {
        return Ok((FadingModel::Nakagami { mu: 0.5, omega }, true));
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    Ok((FadingModel::Nakagami { mu: 0.5 * (lo + hi), omega }, false))
}

fn fit_rician(xs: &[f64]) -> (FadingModel, bool) {
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n;
    let s4 = 2.0 * m2 * m2 - m4;
    let s0 = if s4 > 0.0 { s4.sqrt().sqrt() } else { 0.1 * m2.sqrt() };
    let sig0 = (0.5 * (m2 - s0 * s0)).max(1e-6 * m2).sqrt();
    let nll = |p: &[f64]| {
        let (s, sigma) = (p[0].exp(), p[1].exp());
        -xs.iter().map(|&x| rician_log_pdf(x, s, sigma)).sum::<f64>()
    };
    let r = nelder_mead(nll, &[s0.ln(), sig0.ln()], &[0.1, 0.1], 1e-13, 1e-9, 4000);
    (FadingModel::Rician { s: r.x[0].exp(), sigma: r.x[1].exp() }, r.converged)
}

/// Linear interpolation weights of the samples on a uniform grid, so that
/// a tabulated log density gives the log likelihood in O(n).
struct GridLikelihood {
    lo: f64,
    step: f64,
    nodes: usize,
    weights: Vec<f64>,
}

impl GridLikelihood {
    fn new(xs: &[f64], cells: usize) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let step = (hi - lo) / cells as f64;
        let mut weights = vec![0.0; cells + 1];
        for &x in xs {
            let pos = ((x - lo) / step).clamp(0.0, cells as f64);
            let i = (pos.floor() as usize).min(cells - 1);
            let t = pos - i as f64;
            weights[i] += 1.0 - t;
            weights[i + 1] += t;
        }
        GridLikelihood { lo, step, nodes: cells + 1, weights }
    }

    fn log_likelihood<F: Fn(f64) -> f64>(&self, log_density: F) -> f64 {
        (0..self.nodes)
            .filter(|&i| self.weights[i] > 0.0)
            .map(|i| self.weights[i] * log_density(self.lo + i as f64 * self.step))
            .sum()
    }
}

const TWDP_DIRECT_LIMIT: usize = 512;
const TWDP_GRID_CELLS: usize = 512;

fn fit_twdp(xs: &[f64]) -> (FadingModel, bool) {
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    let grid = (xs.len() > TWDP_DIRECT_LIMIT).then(|| GridLikelihood::new(xs, TWDP_GRID_CELLS));
    let loglik = |k: f64, delta: f64, sigma: f64| -> f64 {
        match &grid {
            Some(g) => g.log_likelihood(|u| twdp_log_pdf(u, k, delta, sigma)),
            None => xs.iter().map(|&u| twdp_log_pdf(u, k, delta, sigma)).sum(),
        }
    };
    // parameters: ln K, t with Δ = sin²t, ln σ
    let unpack = |p: &[f64]| (p[0].exp(), p[1].sin().powi(2), p[2].exp());
    let nll = |p: &[f64]| {
        let (k, delta, sigma) = unpack(p);
        let v = -loglik(k, delta, sigma);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut starts = Vec::new();
    for &k in &[0.1, 1.0, 10.0, 100.0, 1000.0, 10_000.0] {
        let sigma = (m2 / (2.0 * (1.0 + k))).sqrt();
        for &delta in &[0.0, 0.25, 0.5, 0.75, 1.0f64] {
            let p = vec![f64::ln(k), delta.sqrt().asin(), sigma.ln()];
            let v = nll(&p);
            starts.push((v, p));
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (_, p) in starts.into_iter().take(3) {
        let r = nelder_mead(nll, &p, &[0.5, 0.3, 0.1], 1e-11, 1e-6, 3000);
        if best.as_ref().is_none_or(|b| r.value < b.0) {
            best = Some((r.value, r.x, r.converged));
        }
    }
    let (_, p, converged) = best.expect("at least one start");
    let (k, delta, sigma) = unpack(&p);
    (FadingModel::Twdp { k, delta, sigma }, converged)
}

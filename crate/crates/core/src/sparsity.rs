//! Power delay profiles, multipath sparsity (Gini index, Rician K), MPC
//! extraction and the tap splitting / bin merging operations used to probe
//! how resolution affects sparsity.

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default delay resolution (20 MHz sounding bandwidth).
pub const DEFAULT_RESOLUTION: f64 = 50e-9;

/// Default MPC detection threshold above the noise floor.
pub const DEFAULT_THRESHOLD_DB: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpRecord {
    /// Tap delays in seconds, strictly increasing.
    pub delays: Vec<f64>,
    /// Linear tap powers.
    pub powers: Vec<f64>,
    #[serde(default)]
    pub noise_floor: f64,
}

impl PdpRecord {
    pub fn new(delays: Vec<f64>, powers: Vec<f64>) -> Result<Self> {
        let p = PdpRecord { delays, powers, noise_floor: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays.len() != self.powers.len() {
            return Err(Error::domain(format!(
                "{} delays but {} powers",
                self.delays.len(),
                self.powers.len()
            )));
        }
        if self.powers.is_empty() {
            return Err(Error::Empty("PDP has no taps".into()));
        }
        if self.delays.iter().any(|d| !d.is_finite()) || self.delays.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("PDP delays must be finite and strictly increasing"));
        }
        if self.powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::domain("PDP powers must be finite and non-negative"));
        }
        if !self.powers.iter().any(|&p| p > 0.0) {
            return Err(Error::domain("PDP has no positive power"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Smallest spacing between taps, or `DEFAULT_RESOLUTION` for one tap.
    pub fn resolution(&self) -> f64 {
        self.delays.windows(2).map(|w| w[1] - w[0]).reduce(f64::min).unwrap_or(DEFAULT_RESOLUTION)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityMetrics {
    pub gini: f64,
    /// `+∞` for a single-tap profile (serialized as null).
    pub k_factor_db: f64,
    pub n_mpc: usize,
}

/// Gini index of the tap powers.
///
/// Evaluated in the pairwise form `Σ_{n ≤ N/2} (N+1-2n)(P_(N+1-n) - P_(n)) / (N P_tot)`
/// over the ascending powers, which is algebraically the usual
/// `1 - 2 Σ (P_n/P_tot)(N-n+1/2)/N` but is exactly zero for equal powers and
/// never negative.
pub fn gini(p: &PdpRecord) -> Result<f64> {
    p.validate()?;
    Ok(gini_of(&p.powers))
}

pub(crate) fn gini_of(powers: &[f64]) -> f64 {
    let mut v = powers.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let total: f64 = v.iter().sum();
    let mut acc = 0.0;
    for i in 0..n / 2 {
        // 1-based rank r = i + 1 pairs with N + 1 - r
        let coef = (n - 2 * i - 1) as f64;
        acc += coef * (v[n - 1 - i] - v[i]);
    }
    (acc / (n as f64 * total)).clamp(0.0, 1.0)
}

/// Strongest tap over the sum of all others (linear). `+∞` when nothing
/// else carries power.
pub fn rician_k_from_pdp(p: &PdpRecord) -> Result<f64> {
    p.validate()?;
    let max = p.powers.iter().copied().fold(0.0, f64::max);
    let rest = p.total_power() - max;
    if p.len() < 2 || rest <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(max / rest)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn sparsity_metrics(p: &PdpRecord) -> Result<SparsityMetrics> {
    Ok(SparsityMetrics {
        gini: gini(p)?,
        k_factor_db: to_db(rician_k_from_pdp(p)?),
        n_mpc: p.len(),
    })
}

/// Mean noise power of a mostly-empty power series, from its median
/// (the median of exponential noise power is `ln 2` times its mean).
pub fn estimate_noise_floor(raw: &[f64]) -> f64 {
    crate::numeric::median(raw) / std::f64::consts::LN_2
}

/// Keep the bins of a dense power series lying strictly above
/// `noise_floor · 10^(threshold_db/10)`. Bin `i` sits at delay `i · delta_tau`.
pub fn mpc_extract(raw: &[f64], delta_tau: f64, noise_floor: f64, threshold_db: f64) -> Result<PdpRecord> {
    if !(threshold_db >= 0.0 && threshold_db.is_finite()) {
        return Err(Error::domain(format!("threshold must be >= 0 dB, got {threshold_db}")));
    }
    if !(delta_tau > 0.0) {
        return Err(Error::domain(format!("delay resolution must be positive, got {delta_tau}")));
    }
    if noise_floor.is_nan() || noise_floor < 0.0 {
        return Err(Error::domain(format!("noise floor must be >= 0, got {noise_floor}")));
    }
    let level = noise_floor * 10f64.powf(threshold_db / 10.0);
    let (delays, powers): (Vec<f64>, Vec<f64>) = raw
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > level)
        .map(|(i, &p)| (i as f64 * delta_tau, p))
        .unzip();
    if powers.is_empty() {
        return Err(Error::Empty(format!("no bin exceeds the detection level {level}")));
    }
    let rec = PdpRecord { delays, powers, noise_floor };
    rec.validate()?;
    Ok(rec)
}

/// Sub-delays for `m` pieces of a tap, spread symmetrically inside its
/// resolution cell so that merging at that resolution restores the tap.
fn sub_delays(center: f64, resolution: f64, m: usize) -> impl Iterator<Item = f64> {
    let step = resolution / m as f64;
    (0..m).map(move |j| center + (j as f64 - (m as f64 - 1.0) / 2.0) * step)
}

fn check_split(p: &PdpRecord, m: usize) -> Result<()> {
    p.validate()?;
    if m == 0 {
        return Err(Error::domain("split factor must be at least 1"));
    }
    Ok(())
}

/// Replace every tap by `m` taps of equal power.
pub fn split_equal(p: &PdpRecord, m: usize) -> Result<PdpRecord> {
    check_split(p, m)?;
    if m == 1 {
        return Ok(p.clone());
    }
    let res = p.resolution();
    let mut delays = Vec::with_capacity(p.len() * m);
    let mut powers = Vec::with_capacity(p.len() * m);
    for (&d, &pw) in p.delays.iter().zip(&p.powers) {
        delays.extend(sub_delays(d, res, m));
        powers.extend(std::iter::repeat_n(pw / m as f64, m));
    }
    Ok(PdpRecord { delays, powers, noise_floor: p.noise_floor })
}

/// Replace every tap by `m` taps with uniformly random (Dirichlet(1)) shares.
pub fn split_random(p: &PdpRecord, m: usize, seed: u64) -> Result<PdpRecord> {
    check_split(p, m)?;
    if m == 1 {
        return Ok(p.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let res = p.resolution();
    let mut delays = Vec::with_capacity(p.len() * m);
    let mut powers = Vec::with_capacity(p.len() * m);
    let mut shares = vec![0.0; m];
    for (&d, &pw) in p.delays.iter().zip(&p.powers) {
        for s in shares.iter_mut() {
            *s = rng.sample::<f64, _>(Exp1);
        }
        let total: f64 = shares.iter().sum();
        delays.extend(sub_delays(d, res, m));
        powers.extend(shares.iter().map(|s| pw * s / total));
    }
    Ok(PdpRecord { delays, powers, noise_floor: p.noise_floor })
}

/// Merge taps into bins of width `bin_width` centered on its multiples,
/// summing powers; each bin's delay becomes its center.
pub fn coarsen_pdp(fine: &PdpRecord, bin_width: f64) -> Result<PdpRecord> {
    fine.validate()?;
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
    }
    let mut delays: Vec<f64> = Vec::new();
    let mut powers: Vec<f64> = Vec::new();
    let mut last: Option<i64> = None;
    for (&d, &pw) in fine.delays.iter().zip(&fine.powers) {
        let k = (d / bin_width).round() as i64;
        if last == Some(k) {
            *powers.last_mut().unwrap() += pw;
        } else {
            delays.push(k as f64 * bin_width);
            powers.push(pw);
            last = Some(k);
        }
    }
    Ok(PdpRecord { delays, powers, noise_floor: fine.noise_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::pearson;
    use proptest::{prop_assert, proptest};

    fn rec(powers: &[f64]) -> PdpRecord {
        let delays = (0..powers.len()).map(|i| i as f64 * DEFAULT_RESOLUTION).collect();
        PdpRecord::new(delays, powers.to_vec()).unwrap()
    }

    fn random_pdp(rng: &mut ChaCha8Rng) -> PdpRecord {
        let n = rng.random_range(1..=50);
        let mut powers: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
        powers[rng.random_range(0..n)] += 1e-3;
        rec(&powers)
    }

    #[test]
    fn gini_anchor_values() {
        for n in 1..40 {
            assert_eq!(gini(&rec(&vec![0.37; n])).unwrap(), 0.0);
        }
        assert_eq!(gini(&rec(&[1.0, 0.0, 0.0, 0.0])).unwrap(), 0.75);
        assert_eq!(gini(&rec(&[0.0, 0.0, 3.0, 0.0])).unwrap(), 0.75);
        assert_eq!(gini(&rec(&[5.0])).unwrap(), 0.0);
        assert!(PdpRecord::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn gini_matches_textbook_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = random_pdp(&mut rng);
            let mut v = p.powers.clone();
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let tot: f64 = v.iter().sum();
            let textbook = 1.0
                - 2.0 * v.iter().enumerate().map(|(i, x)| x / tot * (n - (i as f64 + 1.0) + 0.5) / n).sum::<f64>();
            assert!((gini(&p).unwrap() - textbook).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn gini_bounded_and_scale_invariant(powers in proptest::collection::vec(0.0..10.0f64, 1..60), c in 1e-6..1e6f64) {
            let mut powers = powers;
            powers[0] += 0.1;
            let p = rec(&powers);
            let g = gini(&p).unwrap();
            prop_assert!((0.0..=1.0).contains(&g));
            let scaled = rec(&powers.iter().map(|x| x * c).collect::<Vec<_>>());
            prop_assert!((gini(&scaled).unwrap() - g).abs() < 1e-12);
            let k = rician_k_from_pdp(&p).unwrap();
            let ks = rician_k_from_pdp(&scaled).unwrap();
            prop_assert!(k == ks || (k - ks).abs() < 1e-12 * k);
        }
    }

    #[test]
    fn k_factor_values() {
        let k = rician_k_from_pdp(&rec(&[0.9, 0.1])).unwrap();
        assert!((k - 9.0).abs() < 1e-12);
        assert!((to_db(k) - 9.542).abs() < 1e-3);
        assert_eq!(rician_k_from_pdp(&rec(&[0.5, 0.5])).unwrap(), 1.0);
        assert!(rician_k_from_pdp(&rec(&[1.0])).unwrap().is_infinite());

        let gamma = 24e-9;
        let powers: Vec<f64> = (0..10).map(|i| (-(i as f64) * 50e-9 / gamma).exp()).collect();
        let rest: f64 = powers[1..].iter().sum();
        let k = rician_k_from_pdp(&rec(&powers)).unwrap();
        assert!((k - 1.0 / rest).abs() < 1e-12 * k);
    }

    #[test]
    fn extraction() {
        let raw = [0.0, 0.0, 1.0, 0.0, 0.4, 0.0, 0.0, 0.1];
        let p = mpc_extract(&raw, 50e-9, 0.0, 0.0).unwrap();
        assert_eq!(p.powers, vec![1.0, 0.4, 0.1]);
        assert_eq!(p.delays, vec![100e-9, 200e-9, 350e-9]);

        let p = mpc_extract(&[1.0, 2.0, 4.0], 1.0, 1.0, 3.0103).unwrap();
        assert_eq!(p.powers, vec![4.0]);
        assert!(mpc_extract(&[1.0, 1.0], 1.0, 1.0, 0.0).is_err());
        assert!(mpc_extract(&raw, 1.0, 0.0, -1.0).is_err());

        let mut failures = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise: Vec<f64> = (0..4096).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            if mpc_extract(&noise, 50e-9, estimate_noise_floor(&noise), 30.0).is_ok() {
                failures += 1;
            }
        }
        assert_eq!(failures, 0);
    }

    #[test]
    fn splitting_preserves_power_and_gini() {
        let p = rec(&[1.0, 0.3, 0.05, 0.2]);
        assert_eq!(split_equal(&p, 1).unwrap(), p);
        assert_eq!(split_random(&p, 1, 99).unwrap(), p);
        for m in 2..=8 {
            let e = split_equal(&p, m).unwrap();
            e.validate().unwrap();
            assert_eq!(e.len(), 4 * m);
            assert!((e.total_power() - p.total_power()).abs() < 1e-15);
            assert!((gini(&e).unwrap() - gini(&p).unwrap()).abs() < 1e-12);
            let r = split_random(&p, m, m as u64).unwrap();
            r.validate().unwrap();
            assert!((r.total_power() / p.total_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_split_never_less_sparse_than_equal_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..2000 {
            let p = random_pdp(&mut rng);
            let m = rng.random_range(1..=8);
            let ge = gini(&split_equal(&p, m).unwrap()).unwrap();
            assert!((ge - gini(&p).unwrap()).abs() < 1e-12);
            let gr = gini(&split_random(&p, m, seed).unwrap()).unwrap();
            assert!(gr >= ge - 1e-12);
        }
    }

    #[test]
    fn coarsening() {
        let p = rec(&[1.0, 0.3, 0.05]);
        assert_eq!(coarsen_pdp(&p, 10e-9).unwrap().powers, p.powers);
        assert_eq!(coarsen_pdp(&p, 10e-9).unwrap().delays, p.delays);
        let two = PdpRecord::new(vec![100e-9, 110e-9], vec![0.3, 0.7]).unwrap();
        let merged = coarsen_pdp(&two, 50e-9).unwrap();
        assert_eq!(merged.powers, vec![1.0]);
        assert_eq!(merged.delays, vec![100e-9]);
        assert!(coarsen_pdp(&p, 0.0).is_err());
    }

    #[test]
    fn coarsening_undoes_splitting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..10_000 {
            let p = random_pdp(&mut rng);
            let m = rng.random_range(1..=8);
            let fine = split_random(&p, m, seed).unwrap();
            let back = coarsen_pdp(&fine, DEFAULT_RESOLUTION).unwrap();
            assert_eq!(back.len(), p.len());
            for (a, b) in back.powers.iter().zip(&p.powers) {
                assert!((a - b).abs() <= 1e-12 * b.max(1e-300) + 1e-300);
            }
            assert!(gini(&back).unwrap() <= gini(&fine).unwrap() + 1e-12);
        }
    }

    #[test]
    fn merging_unequal_bins_can_raise_gini() {
        // resolution loss does not bound the index in general
        let fine = PdpRecord::new(vec![0.0, 50e-9, 60e-9], vec![1.0, 5.0, 5.0]).unwrap();
        let coarse = coarsen_pdp(&fine, 50e-9).unwrap();
        assert_eq!(coarse.powers, vec![1.0, 10.0]);
        assert!(gini(&coarse).unwrap() > gini(&fine).unwrap());
    }

    #[test]
    fn k_and_gini_correlate_on_strong_los_ensemble() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut gs, mut ks) = (Vec::new(), Vec::new());
        for _ in 0..500 {
            let gamma = rng.random_range(50.0..200.0);
            let mut powers = vec![0.0];
            powers.extend((1..40).map(|i| (-(i as f64) * 50.0 / gamma).exp() * rng.sample::<f64, _>(Exp1)));
            let tail: f64 = powers.iter().sum();
            powers[0] = tail * 10f64.powf(rng.random_range(0.5..2.5));
            let p = rec(&powers);
            gs.push(gini(&p).unwrap());
            ks.push(to_db(rician_k_from_pdp(&p).unwrap()));
        }
        let r = pearson(&ks, &gs);
        assert!(r > 0.5, "r = {r}");
        assert!(crate::numeric::median(&gs) > 0.9);
    }
}

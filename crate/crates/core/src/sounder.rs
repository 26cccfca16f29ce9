//! Zadoff-Chu correlation sounding: sequence generation, a periodic
//! tapped-delay-line link with white Gaussian noise, and CIR extraction by
//! circular cross-correlation.
//!
//! Received samples can be stored in the MCIQ1 binary format:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 5 | ASCII `MCIQ1` |
//! | 5 | 8 | sample count `n`, u64 little-endian |
//! | 13 | 16·n | interleaved I, Q as f64 little-endian |

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparsity::PdpRecord;

pub const DEFAULT_LENGTH: usize = 65535;
pub const DEFAULT_DELTA_TAU: f64 = 50e-9;
pub const IQ_MAGIC: &[u8; 5] = b"MCIQ1";

/// Taps with at most this many non-zero entries are convolved directly.
const DIRECT_CONV_TAPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZcConfig {
    pub length: usize,
    pub root: u64,
}

impl Default for ZcConfig {
    fn default() -> Self {
        ZcConfig { length: DEFAULT_LENGTH, root: 1 }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ZcConfig {
    pub fn new(length: usize, root: u64) -> Result<Self> {
        let c = ZcConfig { length, root };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.length == 0 || self.length.is_multiple_of(2) {
            return Err(Error::domain(format!("ZC length must be odd and positive, got {}", self.length)));
        }
        if self.root == 0 || gcd(self.root, self.length as u64) != 1 {
            return Err(Error::domain(format!("root {} is not coprime with length {}", self.root, self.length)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cir {
    pub taps: Vec<Complex64>,
    /// Delay bin width (s).
    pub delta_tau: f64,
}

impl Cir {
    pub fn new(taps: Vec<Complex64>, delta_tau: f64) -> Result<Self> {
        let c = Cir { taps, delta_tau };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_tau > 0.0 && self.delta_tau.is_finite()) {
            return Err(Error::domain(format!("delay bin width must be positive, got {}", self.delta_tau)));
        }
        if self.taps.iter().any(|t| !(t.re.is_finite() && t.im.is_finite())) {
            return Err(Error::domain("CIR taps must be finite"));
        }
        Ok(())
    }

    /// Tap amplitudes `sqrt(P_n)` of a power delay profile on its own grid
    /// (delays rounded to multiples of `delta_tau`).
    pub fn from_pdp(p: &PdpRecord, delta_tau: f64) -> Result<Self> {
        p.validate()?;
        let t0 = p.delays[0];
        let last = ((p.delays[p.len() - 1] - t0) / delta_tau).round() as usize;
        let mut taps = vec![Complex64::new(0.0, 0.0); last + 1];
        for (d, w) in p.delays.iter().zip(&p.powers) {
            taps[((d - t0) / delta_tau).round() as usize] += Complex64::new(w.sqrt(), 0.0);
        }
        Cir::new(taps, delta_tau)
    }
}

/// `z[k] = exp(-jπ u k(k+1) / L)`, with the phase reduced modulo `2L` in
/// integer arithmetic.
pub fn zc_sequence(cfg: &ZcConfig) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let l = cfg.length as u64;
    let two_l = 2 * l;
    let u = cfg.root % two_l;
    Ok((0..l)
        .map(|k| {
            let m = u * ((k * (k + 1)) % two_l) % two_l;
            Complex64::from_polar(1.0, -std::f64::consts::PI * m as f64 / l as f64)
        })
        .collect())
}

fn fft(x: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let plan = if inverse { planner.plan_fft_inverse(x.len()) } else { planner.plan_fft_forward(x.len()) };
    plan.process(x);
}

/// Circular cross-correlation of one period of `rx` with the reference,
/// normalized by `L`. Longer records are averaged over whole periods.
pub fn extract_cir(rx: &[Complex64], cfg: &ZcConfig) -> Result<Cir> {
    extract_cir_with(rx, cfg, DEFAULT_DELTA_TAU)
}

pub fn extract_cir_with(rx: &[Complex64], cfg: &ZcConfig, delta_tau: f64) -> Result<Cir> {
    cfg.validate()?;
    let l = cfg.length;
    if rx.len() < l {
        return Err(Error::domain(format!("need at least {l} received samples, got {}", rx.len())));
    }
    let periods = rx.len() / l;
    let mut acc = vec![Complex64::new(0.0, 0.0); l];
    for chunk in rx.chunks_exact(l) {
        for (a, r) in acc.iter_mut().zip(chunk) {
            *a += r;
        }
    }
    let mut z = zc_sequence(cfg)?;
    fft(&mut acc, false);
    fft(&mut z, false);
    for (a, zk) in acc.iter_mut().zip(&z) {
        *a *= zk.conj();
    }
    fft(&mut acc, true);
    let scale = 1.0 / (l as f64 * l as f64 * periods as f64);
    acc.iter_mut().for_each(|a| *a *= scale);
    Cir::new(acc, delta_tau)
}

/// Tap powers `|h|²` at delays `n · delta_tau`.
pub fn pdp_from_cir(c: &Cir) -> PdpRecord {
    PdpRecord {
        delays: (0..c.taps.len()).map(|i| i as f64 * c.delta_tau).collect(),
        powers: c.taps.iter().map(|t| t.norm_sqr()).collect(),
        noise_floor: 0.0,
    }
}

/// One period of the ZC sequence circularly convolved with `true_cir`, plus
/// complex white Gaussian noise of power `10^(-snr_db/10)` per sample
/// (the transmitted sequence has unit power). `snr_db = +∞` disables noise.
pub fn simulate_link(true_cir: &Cir, cfg: &ZcConfig, snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    true_cir.validate()?;
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::domain(format!("SNR must be finite or +inf, got {snr_db}")));
    }
    let l = cfg.length;
    if true_cir.taps.len() > l {
        return Err(Error::domain(format!("CIR has {} taps but the period is {l}", true_cir.taps.len())));
    }
    let z = zc_sequence(cfg)?;
    let nonzero: Vec<(usize, Complex64)> =
        true_cir.taps.iter().copied().enumerate().filter(|(_, h)| h.norm_sqr() > 0.0).collect();
    let mut rx = if nonzero.len() <= DIRECT_CONV_TAPS {
        let mut rx = vec![Complex64::new(0.0, 0.0); l];
        for &(k, h) in &nonzero {
            for (n, r) in rx.iter_mut().enumerate() {
                *r += h * z[(n + l - k) % l];
            }
        }
        rx
    } else {
        let mut h = true_cir.taps.clone();
        h.resize(l, Complex64::new(0.0, 0.0));
        let mut zf = z;
        fft(&mut h, false);
        fft(&mut zf, false);
        for (a, b) in h.iter_mut().zip(&zf) {
            *a *= b;
        }
        fft(&mut h, true);
        h.iter_mut().for_each(|a| *a /= l as f64);
        h
    };
    if snr_db.is_finite() {
        let sd = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for r in rx.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *r += Complex64::new(sd * re, sd * im);
        }
    }
    Ok(rx)
}

pub fn write_iq<W: Write>(mut w: W, samples: &[Complex64]) -> Result<()> {
    w.write_all(IQ_MAGIC)?;
    w.write_all(&(samples.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * samples.len());
    for s in samples {
        buf.extend_from_slice(&s.re.to_le_bytes());
        buf.extend_from_slice(&s.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_iq<R: Read>(mut r: R) -> Result<Vec<Complex64>> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| Error::Parse("IQ file too short for its header".into()))?;
    if &magic != IQ_MAGIC {
        return Err(Error::Parse("not an MCIQ1 file".into()));
    }
    let mut count = [0u8; 8];
    r.read_exact(&mut count).map_err(|_| Error::Parse("IQ file too short for its header".into()))?;
    let n = u64::from_le_bytes(count) as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 16 * n {
        return Err(Error::Parse(format!("IQ header announces {n} samples but body has {} bytes", body.len())));
    }
    Ok(body
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparsity::coarsen_pdp;
    use crate::temporal::{fit_exp_pdp, synth_exp_pdp};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn config_validation() {
        assert!(ZcConfig::new(255, 2).is_ok());
        assert!(ZcConfig::new(256, 1).is_err());
        assert!(ZcConfig::new(255, 5).is_err());
        assert!(ZcConfig::new(63, 21).is_err());
        assert!(ZcConfig::new(63, 0).is_err());
        assert_eq!(ZcConfig::default(), ZcConfig { length: 65535, root: 1 });
    }

    #[test]
    fn zc_matches_definition() {
        for (l, u) in [(63usize, 1u64), (63, 5), (255, 7), (65535, 1)] {
            let z = zc_sequence(&ZcConfig::new(l, u).unwrap()).unwrap();
            assert_eq!(z.len(), l);
            for (k, zk) in z.iter().enumerate().step_by(97) {
                let kf = k as f64;
                let phase = -std::f64::consts::PI * u as f64 * kf * (kf + 1.0) / l as f64;
                let want = Complex64::from_polar(1.0, phase);
                assert!((zk - want).norm() < 1e-6, "L={l} k={k}");
                assert!((zk.norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn brute_force_periodic_autocorrelation() {
        for (l, u) in [(63usize, 1u64), (63, 2), (63, 11), (255, 1), (255, 4), (255, 127)] {
            let z = zc_sequence(&ZcConfig::new(l, u).unwrap()).unwrap();
            for lag in 0..l {
                let r: Complex64 = (0..l).map(|n| z[n] * z[(n + lag) % l].conj()).sum();
                if lag == 0 {
                    assert!((r - c(l as f64, 0.0)).norm() < 1e-9);
                } else {
                    assert!(r.norm() < 1e-9 * l as f64, "L={l} u={u} lag={lag}: {}", r.norm());
                }
            }
        }
    }

    #[test]
    fn clean_sequence_gives_delta() {
        for cfg in [ZcConfig::new(255, 1).unwrap(), ZcConfig::default()] {
            let z = zc_sequence(&cfg).unwrap();
            let cir = extract_cir(&z, &cfg).unwrap();
            assert!((cir.taps[0] - c(1.0, 0.0)).norm() < 1e-9);
            assert!(cir.taps[1..].iter().all(|t| t.norm() < 1e-9));
        }
    }

    #[test]
    fn shift_and_scale() {
        let cfg = ZcConfig::new(255, 7).unwrap();
        let z = zc_sequence(&cfg).unwrap();
        let rx: Vec<Complex64> = (0..255).map(|n| 0.5 * z[(n + 255 - 3) % 255]).collect();
        let cir = extract_cir(&rx, &cfg).unwrap();
        for (i, t) in cir.taps.iter().enumerate() {
            let want = if i == 3 { 0.5 } else { 0.0 };
            assert!((t - c(want, 0.0)).norm() < 1e-9);
        }
        assert!(extract_cir(&rx[..100], &cfg).is_err());
    }

    #[test]
    fn two_tap_against_direct_convolution() {
        let cfg = ZcConfig::new(255, 1).unwrap();
        let z = zc_sequence(&cfg).unwrap();
        let h1 = Complex64::from_polar(0.3, std::f64::consts::FRAC_PI_4);
        let mut rx = vec![c(0.0, 0.0); 255];
        for n in 0..255 {
            rx[n] = z[n] + h1 * z[(n + 255 - 5) % 255];
        }
        let true_cir = Cir::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), h1], 50e-9).unwrap();
        let sim = simulate_link(&true_cir, &cfg, f64::INFINITY, 0).unwrap();
        for (a, b) in sim.iter().zip(&rx) {
            assert!((a - b).norm() < 1e-12);
        }
        let cir = extract_cir(&sim, &cfg).unwrap();
        assert!((cir.taps[0] - c(1.0, 0.0)).norm() < 1e-9);
        assert!((cir.taps[5] - h1).norm() < 1e-9);
        assert!(cir.taps.iter().enumerate().filter(|(i, _)| *i != 0 && *i != 5).all(|(_, t)| t.norm() < 1e-9));
    }

    #[test]
    fn noiseless_identity_is_exact() {
        let cfg = ZcConfig::new(63, 1).unwrap();
        let rx = simulate_link(&Cir::new(vec![c(1.0, 0.0)], 50e-9).unwrap(), &cfg, f64::INFINITY, 1).unwrap();
        assert_eq!(rx, zc_sequence(&cfg).unwrap());
    }

    #[test]
    fn dense_cir_uses_transform_path() {
        let cfg = ZcConfig::new(255, 2).unwrap();
        let taps: Vec<Complex64> = (0..200).map(|i| Complex64::from_polar((-(i as f64) / 30.0).exp(), i as f64)).collect();
        let true_cir = Cir::new(taps.clone(), 50e-9).unwrap();
        let cir = extract_cir(&simulate_link(&true_cir, &cfg, f64::INFINITY, 0).unwrap(), &cfg).unwrap();
        for (a, b) in cir.taps.iter().zip(&taps) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn noise_power_and_replay() {
        let cfg = ZcConfig::new(65535, 1).unwrap();
        let zero = Cir::new(vec![c(0.0, 0.0)], 50e-9).unwrap();
        let rx = simulate_link(&zero, &cfg, 10.0, 42).unwrap();
        let p = rx.iter().map(|r| r.norm_sqr()).sum::<f64>() / rx.len() as f64;
        assert!((p / 0.1 - 1.0).abs() < 0.03);
        assert_eq!(rx, simulate_link(&zero, &cfg, 10.0, 42).unwrap());
        assert_ne!(rx, simulate_link(&zero, &cfg, 10.0, 43).unwrap());
    }

    #[test]
    fn end_to_end_exponential_channel() {
        let cfg = ZcConfig::default();
        let truth = synth_exp_pdp(24e-9, 50e-9, 5, None, 0).unwrap();
        let cir = Cir::from_pdp(&truth, 50e-9).unwrap();
        for seed in 0..3 {
            let rx = simulate_link(&cir, &cfg, 30.0, seed).unwrap();
            let est = pdp_from_cir(&extract_cir(&rx, &cfg).unwrap());
            for (a, b) in est.powers.iter().zip(&truth.powers) {
                assert!((10.0 * (a / b).log10()).abs() < 0.5);
            }
            let head = PdpRecord::new(est.delays[..5].to_vec(), est.powers[..5].to_vec()).unwrap();
            let fit = fit_exp_pdp(&head).unwrap();
            assert!((fit.gamma / 24e-9 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn pdp_conversion() {
        let p = pdp_from_cir(&Cir::new(vec![c(1.0, 0.0)], 50e-9).unwrap());
        assert_eq!(p.powers, vec![1.0]);
        let taps = vec![c(0.6, 0.8), c(0.0, 0.0), c(-0.3, 0.1)];
        let cir = Cir::new(taps.clone(), 50e-9).unwrap();
        let p = pdp_from_cir(&cir);
        let energy: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        assert!((p.total_power() - energy).abs() < 1e-15);
        assert_eq!(p.delays, vec![0.0, 50e-9, 100e-9]);
        assert_eq!(coarsen_pdp(&p, 50e-9).unwrap(), p);
    }

    #[test]
    fn iq_round_trip() {
        let samples = vec![c(1.5, -2.0), c(f64::MIN_POSITIVE, 1e300), c(0.0, -0.0)];
        let mut buf = Vec::new();
        write_iq(&mut buf, &samples).unwrap();
        assert_eq!(&buf[..5], b"MCIQ1");
        assert_eq!(buf.len(), 13 + 48);
        assert_eq!(read_iq(&buf[..]).unwrap(), samples);
        assert!(read_iq(&buf[..buf.len() - 1]).is_err());
        assert!(read_iq(&b"MCIQ2\0\0\0\0\0\0\0\0"[..]).is_err());
    }
}

//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mariner_chan::geometry::{thresholds, LinkGeometry};
use mariner_chan::numeric::{median, pearson};
use mariner_chan::pathloss::{
    dual_ci_mtr_path_loss, mtr_factors, mtr_loss_from_factors, shadow_fading, two_ray_simplified,
    DualSlopeParams, MtrOptions, SeaState,
};
use mariner_chan::plfit::{fit_dual_ci_mtr, FittedModel, PathLossSample};
use mariner_chan::smallscale::{fit_mle, pdf, rician_k_db, sample, EnvelopeSamples, FadingModel, FitOptions};
use mariner_chan::sounder::{extract_cir, pdp_from_cir, simulate_link, zc_sequence, Cir, ZcConfig};
use mariner_chan::sparsity::{
    estimate_noise_floor, gini, mpc_extract, rician_k_from_pdp, split_equal, split_random, to_db, PdpRecord,
};
use mariner_chan::swift::{simulate_swift, SwiftScenario};
use mariner_chan::temporal::{delay_stats, fit_exp_pdp};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    if elapsed > limit {
        pass = false;
        detail.push_str("; runtime limit exceeded");
    }
    println!(
        "{} [{id:>2}] {name} ({:.2} s, limit {} s): {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn reference_link(distance: f64) -> LinkGeometry {
    LinkGeometry::new(5.8e9, 25.0, 4.0, distance).unwrap()
}

fn c1_thresholds() -> Outcome {
    let t = thresholds(&reference_link(10_000.0));
    check(
        (t.d_break - 7738.7).abs() <= 1.0 && (t.d_los_vision - 24987.0).abs() <= 5.0 && (t.d_06f - 12630.0).abs() <= 20.0,
        format!("d_break={:.1} m, d_LoS={:.1} m, d_0.6F={:.1} m", t.d_break, t.d_los_vision, t.d_06f),
    )
}

fn c2_two_ray_consistency() -> Outcome {
    let g = reference_link(1000.0);
    let lambda = 299_792_458.0 / 5.8e9;
    let d_break = 4.0 * 25.0 * 4.0 / lambda;
    let sea = SeaState::new(7.7).unwrap().with_gamma(Complex64::new(-1.0, 0.0)).unwrap();
    let mtr_lossless = |d: f64| {
        let at = g.with_distance(d).unwrap();
        let f = mtr_factors(&at, &sea, 25.0, 4.0, MtrOptions::default()).unwrap().without_losses();
        mtr_loss_from_factors(&at, &f, sea.gamma)
    };
    // nulls of the two-ray pattern sit at d_break / (2k)
    let near_null = |d: f64| (1..200).any(|k| (d / (d_break / (2.0 * k as f64)) - 1.0).abs() <= 0.02);
    let mut worst = 0.0f64;
    let mut n = 0;
    let mut d = 1000.0;
    while d <= d_break {
        if !near_null(d) {
            let gap = (mtr_lossless(d) - two_ray_simplified(&g.with_distance(d).unwrap())).abs();
            worst = worst.max(gap);
            n += 1;
        }
        d += 1.0;
    }
    let expected = 20.0 * (4.0 * PI * d_break / lambda).log10() - 20.0 * 2f64.log10();
    let at_break_mtr = mtr_lossless(d_break);
    let at_break_two_ray = two_ray_simplified(&g.with_distance(d_break).unwrap());
    check(
        worst <= 0.5
            && (at_break_mtr - 119.47).abs() <= 0.05
            && (at_break_two_ray - 119.47).abs() <= 0.05
            && (expected - 119.47).abs() <= 0.05,
        format!(
            "max gap {worst:.4} dB over {n} points; at d_break MTR={at_break_mtr:.3} dB, two-ray={at_break_two_ray:.3} dB, FSPL-6.02={expected:.3} dB"
        ),
    )
}

fn c3_fit_recovery() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (day, wind, n1, n2) in [("day 1", 7.7, 2.02, 3.27), ("day 2", 5.6, 2.10, 6.03)] {
        let geom = reference_link(10_000.0);
        let sea = SeaState::new(wind).unwrap();
        let d_break = 4.0 * 25.0 * 4.0 * 5.8e9 / 299_792_458.0;
        let truth = DualSlopeParams::new(n1, n2, d_break);
        let grid: Vec<f64> = (0..=1590).map(|i| 2000.0 + 20.0 * i as f64).collect();
        let mean: Vec<f64> =
            grid.iter().map(|&d| dual_ci_mtr_path_loss(&truth, &geom, &sea, MtrOptions::default(), d).unwrap()).collect();
        let (mut n1s, mut n2s, mut sigmas) = (Vec::new(), Vec::new(), Vec::new());
        for seed in 0..20 {
            let sf = shadow_fading(grid.len(), 4.0, 1000 + seed).unwrap();
            let samples: Vec<PathLossSample> = grid
                .iter()
                .zip(&mean)
                .zip(&sf)
                .filter(|((_, m), _)| m.is_finite())
                .map(|((&d, m), x)| PathLossSample { d, pl_db: m + x })
                .collect();
            let r = fit_dual_ci_mtr(&samples, &geom, &sea, MtrOptions::default()).unwrap();
            let FittedModel::DualCiMtr(p) = r.params else { unreachable!() };
            n1s.push(p.n1);
            n2s.push(p.n2);
            sigmas.push(r.rmse_db);
        }
        let (m1, m2, ms) = (median(&n1s), median(&n2s), median(&sigmas));
        ok &= (m1 - n1).abs() <= 0.15 && (m2 - n2).abs() <= 0.15 && (ms - 4.0).abs() <= 0.3;
        lines.push(format!("{day}: n1={m1:.3} ({n1}), n2={m2:.3} ({n2}), sigma={ms:.3} dB (4)"));
    }
    check(ok, lines.join("; "))
}

fn random_pdp(rng: &mut ChaCha8Rng) -> PdpRecord {
    let n = rng.random_range(1..=50);
    let mut powers: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * rng.random::<f64>()).collect();
    let i = rng.random_range(0..n);
    powers[i] += 1e-6;
    PdpRecord::new((0..n).map(|k| k as f64 * 50e-9).collect(), powers).unwrap()
}

fn c4_lemmas() -> Outcome {
    let (mut equal_bad, mut random_bad) = (0, 0);
    let mut max_gap = 0.0f64;
    for draw in 0..10_000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let p = random_pdp(&mut rng);
        let m = rng.random_range(1..=8);
        let g = gini(&p).unwrap();
        let ge = gini(&split_equal(&p, m).unwrap()).unwrap();
        let gr = gini(&split_random(&p, m, draw.wrapping_mul(31)).unwrap()).unwrap();
        max_gap = max_gap.max((ge - g).abs());
        equal_bad += usize::from((ge - g).abs() >= 1e-12);
        random_bad += usize::from(gr < ge - 1e-12);
    }
    check(
        equal_bad == 0 && random_bad == 0,
        format!("10000 draws: {equal_bad} equal-split and {random_bad} random-split violations, max |dG| {max_gap:.1e}"),
    )
}

/// `I0(z) e^{-z}` by its power series; adequate for the moderate arguments used here.
fn i0e_series(z: f64) -> f64 {
    let q = z * z / 4.0;
    let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
    loop {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum * (-z).exp()
}

fn rician_oracle(x: f64, s: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    x / s2 * (-(x - s) * (x - s) / (2.0 * s2)).exp() * i0e_series(x * s / s2)
}

/// Composite Simpson over `[a, b]` split at `breaks`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], n: usize) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| {
            let h = (w[1] - w[0]) / n as f64;
            let mut acc = f(w[0]) + f(w[1]);
            for i in 1..n {
                acc += f(w[0] + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        })
        .sum()
}

fn table_grid() -> Vec<FadingModel> {
    let k = |db: f64| 10f64.powf(db / 10.0);
    vec![
        FadingModel::Rician { s: 0.994, sigma: 0.081 },
        FadingModel::Rician { s: 0.992, sigma: 0.087 },
        FadingModel::Rician { s: 0.992, sigma: 0.092 },
        FadingModel::Rician { s: 0.993, sigma: 0.085 },
        FadingModel::Rician { s: 0.993, sigma: 0.083 },
        FadingModel::Twdp { k: k(18.804), delta: 0.004, sigma: 0.081 },
        FadingModel::Twdp { k: k(18.817), delta: 0.008, sigma: 0.081 },
        FadingModel::Twdp { k: k(18.154), delta: 0.001, sigma: 0.087 },
        FadingModel::Twdp { k: k(23.076), delta: 0.222, sigma: 0.049 },
        FadingModel::Twdp { k: k(18.324), delta: 0.001, sigma: 0.085 },
        FadingModel::Twdp { k: k(18.552), delta: 0.001, sigma: 0.083 },
        FadingModel::Nakagami { mu: 32.031, omega: 1.015 },
        FadingModel::Nakagami { mu: 38.219, omega: 1.015 },
        FadingModel::Nakagami { mu: 32.891, omega: 1.017 },
        FadingModel::Nakagami { mu: 29.319, omega: 1.018 },
        FadingModel::Nakagami { mu: 34.245, omega: 1.016 },
        FadingModel::Nakagami { mu: 35.909, omega: 1.016 },
        FadingModel::Lognormal { mu: -0.007, sigma: 0.083 },
        FadingModel::Lognormal { mu: -0.007, sigma: 0.082 },
        FadingModel::Lognormal { mu: -0.008, sigma: 0.089 },
        FadingModel::Lognormal { mu: -0.009, sigma: 0.094 },
        FadingModel::Lognormal { mu: -0.007, sigma: 0.087 },
        FadingModel::Lognormal { mu: -0.007, sigma: 0.085 },
        FadingModel::Laplace { mu: 1.011, b: 0.065 },
        FadingModel::Laplace { mu: 1.007, b: 0.062 },
        FadingModel::Laplace { mu: 1.009, b: 0.069 },
        FadingModel::Laplace { mu: 1.007, b: 0.076 },
        FadingModel::Laplace { mu: 1.005, b: 0.067 },
        FadingModel::Laplace { mu: 1.009, b: 0.065 },
        FadingModel::AsymLaplace { mu: 1.033, b1: 0.045, b2: 0.081 },
        FadingModel::AsymLaplace { mu: 1.018, b1: 0.051, b2: 0.072 },
        FadingModel::AsymLaplace { mu: 1.027, b1: 0.052, b2: 0.082 },
        FadingModel::AsymLaplace { mu: 1.026, b1: 0.060, b2: 0.090 },
        FadingModel::AsymLaplace { mu: 1.018, b1: 0.056, b2: 0.077 },
        FadingModel::AsymLaplace { mu: 1.023, b1: 0.051, b2: 0.077 },
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c5_distributions() -> Outcome {
    let mut problems = Vec::new();

    let mut worst_mass = 0.0f64;
    for m in table_grid() {
        let (lo, hi, breaks) = match m {
            FadingModel::Laplace { mu, b } => (mu - 60.0 * b, mu + 60.0 * b, vec![mu]),
            FadingModel::AsymLaplace { mu, b1, b2 } => (mu - 60.0 * b1, mu + 60.0 * b2, vec![mu]),
            _ => (1e-9, 3.0, vec![]),
        };
        let mass = simpson(|x| pdf(&m, x).unwrap(), lo, hi, &breaks, 20_000);
        worst_mass = worst_mass.max((mass - 1.0).abs());
        if (mass - 1.0).abs() > 1e-6 {
            problems.push(format!("{m:?} integrates to {mass}"));
        }
    }

    let mut sup = 0.0f64;
    let mut sup_oracle = 0.0f64;
    for (k, sigma) in [(75.9, 0.081), (203.0, 0.049), (1.0, 0.5), (10.0, 0.2)] {
        let twdp = FadingModel::Twdp { k, delta: 0.0, sigma };
        let s = sigma * (2.0 * k).sqrt();
        let rician = FadingModel::Rician { s, sigma };
        for i in 1..4000 {
            let x = i as f64 * (s + 8.0 * sigma) / 4000.0;
            let t = pdf(&twdp, x).unwrap();
            sup = sup.max((t - pdf(&rician, x).unwrap()).abs());
            sup_oracle = sup_oracle.max((t - rician_oracle(x, s, sigma)).abs());
        }
    }
    if sup >= 1e-6 || sup_oracle >= 1e-6 {
        problems.push(format!("TWDP(delta=0) vs Rician sup gap {sup:.2e} (series oracle {sup_oracle:.2e})"));
    }

    let n = 100_000;
    let opts = FitOptions::default();
    let mut recov = Vec::new();
    let cases = [
        FadingModel::Rician { s: 0.992, sigma: 0.092 },
        FadingModel::Twdp { k: 10f64.powf(2.3076), delta: 0.222, sigma: 0.049 },
        FadingModel::Nakagami { mu: 29.319, omega: 1.018 },
        FadingModel::Lognormal { mu: -0.009, sigma: 0.094 },
        FadingModel::Laplace { mu: 1.007, b: 0.076 },
        FadingModel::AsymLaplace { mu: 1.026, b1: 0.060, b2: 0.090 },
    ];
    for (i, truth) in cases.iter().enumerate() {
        let xs = sample(truth, n, 500 + i as u64).unwrap();
        let fit = fit_mle(truth.family(), &EnvelopeSamples::raw(xs).unwrap(), &opts).unwrap();
        let (ok, note) = match (*truth, fit.model) {
            (FadingModel::Rician { s, sigma }, FadingModel::Rician { s: fs, sigma: fsig }) => {
                let dk = rician_k_db(fs, fsig).unwrap() - rician_k_db(s, sigma).unwrap();
                (rel(fs, s) <= 0.05 && rel(fsig, sigma) <= 0.05 && dk.abs() <= 0.3, format!("rician dK={dk:+.3} dB"))
            }
            (FadingModel::Twdp { k, delta, sigma }, FadingModel::Twdp { k: fk, delta: fd, sigma: fs }) => (
                rel(fk, k) <= 0.05 && rel(fs, sigma) <= 0.05 && (fd - delta).abs() <= 0.05,
                format!("twdp K {:+.1}% delta {fd:.3} sigma {:+.1}%", 100.0 * (fk / k - 1.0), 100.0 * (fs / sigma - 1.0)),
            ),
            (FadingModel::Nakagami { mu, omega }, FadingModel::Nakagami { mu: fm, omega: fo }) => (
                rel(fm, mu) <= 0.05 && rel(fo, omega) <= 0.05,
                format!("nakagami m {:+.1}% omega {:+.2}%", 100.0 * (fm / mu - 1.0), 100.0 * (fo / omega - 1.0)),
            ),
            (FadingModel::Lognormal { mu, sigma }, FadingModel::Lognormal { mu: fm, sigma: fs }) => (
                rel(fs, sigma) <= 0.05 && (fm - mu).abs() <= 0.05 * sigma,
                format!("lognormal sigma {:+.2}%", 100.0 * (fs / sigma - 1.0)),
            ),
            (FadingModel::Laplace { mu, b }, FadingModel::Laplace { mu: fm, b: fb }) => (
                rel(fb, b) <= 0.05 && (fm - mu).abs() <= 0.05 * b,
                format!("laplace b {:+.2}%", 100.0 * (fb / b - 1.0)),
            ),
            (FadingModel::AsymLaplace { mu, b1, b2 }, FadingModel::AsymLaplace { mu: fm, b1: f1, b2: f2 }) => (
                rel(f1, b1) <= 0.05 && rel(f2, b2) <= 0.05 && (fm - mu).abs() <= 0.05 * b1.min(b2),
                format!("asym-laplace b1 {:+.2}% b2 {:+.2}%", 100.0 * (f1 / b1 - 1.0), 100.0 * (f2 / b2 - 1.0)),
            ),
            (t, f) => (false, format!("family mismatch {t:?} vs {f:?}")),
        };
        if !ok {
            problems.push(format!("recovery failed: {note} ({:?})", fit.model));
        }
        recov.push(note);
    }

    let anchor = rician_k_db(0.994, 0.081).unwrap();
    if (anchor - 18.806).abs() > 0.1 {
        problems.push(format!("rician_k_db(0.994, 0.081) = {anchor}"));
    }
    let summary = format!(
        "36 pdfs max |mass-1| {worst_mass:.1e}; TWDP/Rician sup gap {sup:.1e}; {}; K(0.994,0.081)={anchor:.3} dB",
        recov.join(", ")
    );
    if problems.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", problems.join("; ")))
    }
}

fn paired_std(distance: f64, a: (f64, f64), b: (f64, f64)) -> (usize, f64) {
    let std = |(wind, h_rx): (f64, f64), seed: u64| {
        let geom = LinkGeometry::new(5.8e9, 25.0, h_rx, distance).unwrap();
        let sc = SwiftScenario::seeded(geom, SeaState::new(wind).unwrap(), 5, seed).unwrap();
        simulate_swift(&sc).unwrap().std_db()
    };
    let effects: Vec<f64> = (0..50).map(|seed| std(a, seed) - std(b, seed)).collect();
    (effects.iter().filter(|&&e| e > 0.0).count(), median(&effects))
}

fn c6_swift() -> Outcome {
    let d = 3000.0;
    let (wind_wins, wind_eff) = paired_std(d, (7.7, 4.0), (5.6, 4.0));
    let (height_wins, height_eff) = paired_std(d, (5.6, 4.0), (5.6, 1.0));
    check(
        wind_wins >= 45 && wind_eff > 0.0 && height_wins >= 45 && height_eff > 0.0,
        format!(
            "d=3 km: wind 7.7>5.6 in {wind_wins}/50 pairs (median {wind_eff:+.3} dB); h_r 4>1 m in {height_wins}/50 pairs (median {height_eff:+.3} dB)"
        ),
    )
}

fn c7_sounder() -> Outcome {
    let cfg = ZcConfig::default();
    let gamma = 24e-9;
    let raw: Vec<f64> = (0..5).map(|i| (-(i as f64) * 50e-9 / gamma).exp()).collect();
    let total: f64 = raw.iter().sum();
    let truth: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let cir = Cir::new(truth.iter().map(|p| Complex64::new(p.sqrt(), 0.0)).collect(), 50e-9).unwrap();
    let mut worst_db = 0.0f64;
    let mut gammas = Vec::new();
    let mut counts = Vec::new();
    for seed in 0..5 {
        let rx = simulate_link(&cir, &cfg, 30.0, seed).unwrap();
        let full = pdp_from_cir(&extract_cir(&rx, &cfg).unwrap());
        for (est, want) in full.powers.iter().zip(&truth) {
            worst_db = worst_db.max((10.0 * (est / want).log10()).abs());
        }
        let mpcs = mpc_extract(&full.powers, 50e-9, estimate_noise_floor(&full.powers), 20.0).unwrap();
        counts.push(mpcs.len());
        gammas.push(fit_exp_pdp(&mpcs).unwrap().gamma);
    }
    let worst_gamma = gammas.iter().map(|g| rel(*g, gamma)).fold(0.0, f64::max);

    let small = ZcConfig::new(255, 1).unwrap();
    let z = zc_sequence(&small).unwrap();
    let mut off_peak = 0.0f64;
    for lag in 1..255 {
        let r: Complex64 = (0..255).map(|n| z[n] * z[(n + lag) % 255].conj()).sum();
        off_peak = off_peak.max(r.norm());
    }
    check(
        worst_db <= 0.5 && worst_gamma <= 0.1 && counts.iter().all(|&c| c == 5) && off_peak < 1e-9 * 255.0,
        format!(
            "worst tap error {worst_db:.3} dB; gamma {:.2}..{:.2} ns; MPC counts {counts:?}; L=255 off-peak |R| {off_peak:.1e}",
            gammas.iter().copied().fold(f64::INFINITY, f64::min) * 1e9,
            gammas.iter().copied().fold(0.0, f64::max) * 1e9
        ),
    )
}

fn c8_temporal() -> Outcome {
    let two = PdpRecord::new(vec![0.0, 100e-9], vec![1.0, 1.0]).unwrap();
    let s2 = delay_stats(&two).unwrap().rms_delay_spread;
    let gamma = 24e-9;
    let delays: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.1e-9).collect();
    let powers = delays.iter().map(|t| (-t / gamma).exp()).collect();
    let dense = delay_stats(&PdpRecord::new(delays, powers).unwrap()).unwrap().rms_delay_spread;
    check(
        s2 == 50e-9 && rel(dense, gamma) <= 0.02,
        format!("two-tap spread {} ns; dense exponential spread {:.3} ns (gamma 24 ns)", s2 * 1e9, dense * 1e9),
    )
}

fn c9_sparsity() -> Outcome {
    let equal = PdpRecord::new((0..16).map(|i| i as f64 * 50e-9).collect(), vec![0.25; 16]).unwrap();
    let one_hot = PdpRecord::new(vec![0.0, 50e-9, 100e-9, 150e-9], vec![0.0, 1.0, 0.0, 0.0]).unwrap();
    let g_equal = gini(&equal).unwrap();
    let g_one = gini(&one_hot).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut gs, mut ks) = (Vec::new(), Vec::new());
    for _ in 0..2000 {
        let gamma_ns = rng.random_range(20.0..80.0);
        let n = 50;
        let mut powers = vec![0.0];
        powers.extend((1..n).map(|i| (-(i as f64) * 50.0 / gamma_ns).exp() * rng.sample::<f64, _>(Exp1) + 1e-6));
        let tail: f64 = powers.iter().sum();
        powers[0] = tail * 10f64.powf(rng.random_range(0.5..2.5));
        let p = PdpRecord::new((0..n).map(|i| i as f64 * 50e-9).collect(), powers).unwrap();
        gs.push(gini(&p).unwrap());
        ks.push(to_db(rician_k_from_pdp(&p).unwrap()));
    }
    let r = pearson(&ks, &gs);
    let med = median(&gs);
    let in_band = gs.iter().filter(|g| (0.965..=0.985).contains(*g)).count();
    check(
        g_equal == 0.0 && g_one == 0.75 && r > 0.5 && med > 0.9 && in_band > 0,
        format!(
            "equal {g_equal}, one-hot {g_one}; ensemble median G {med:.4}, Pearson(K,G) {r:.3}, {in_band}/2000 in [0.965, 0.985]"
        ),
    )
}

fn c10_replay() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_mariner-chan"))
            .current_dir(dir.path())
            .env_remove("MARINER_CHAN_THREADS")
            .args(args)
            .output()
            .unwrap()
    };
    let jobs: [(&[&str], &[&str]); 4] = [
        (&["swift", "sim", "--seed", "9", "--distance", "3000", "--replicates", "2"], &["swift_0000.csv", "swift_0001.csv"]),
        (&["pathloss", "eval", "--model", "dual-ci-mtr"], &["pathloss.csv"]),
        (&["smallscale", "sample", "--family", "asym-laplace", "--params", "1.018,0.051,0.072", "--seed", "4"], &["samples.csv"]),
        (&["sounder", "sim", "--seed", "2"], &["rx.mciq", "true_pdp.csv"]),
    ];
    let mut compared = 0;
    for (i, (args, files)) in jobs.iter().enumerate() {
        let a = format!("a{i}");
        let b = format!("b{i}");
        let mut first = args.to_vec();
        first.extend(["--out", &a]);
        if !run(&first).status.success() {
            return Err(format!("{args:?} failed"));
        }
        let manifest = format!("{a}/manifest.json");
        if !run(&["replay", "--manifest", &manifest, "--out", &b]).status.success() {
            return Err(format!("replay of {args:?} failed"));
        }
        for f in *files {
            let read = |d: &str| std::fs::read(dir.path().join(d).join(f)).unwrap();
            if read(&a) != read(&b) {
                return Err(format!("{f} differs after replay of {args:?}"));
            }
            compared += 1;
        }
    }
    assert!(Path::new(env!("CARGO_BIN_EXE_mariner-chan")).exists());
    Ok(format!("{compared} output files byte-identical after replay"))
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "threshold distances", s(1), c1_thresholds),
        criterion(2, "two-ray / MTR consistency", s(5), c2_two_ray_consistency),
        criterion(3, "dual-slope CI-MTR fit recovery", s(30), c3_fit_recovery),
        criterion(4, "splitting identities", s(30), c4_lemmas),
        criterion(5, "distribution suite", s(120), c5_distributions),
        criterion(6, "SWIFT monotonicity", s(60), c6_swift),
        criterion(7, "sounding loop", s(60), c7_sounder),
        criterion(8, "temporal identities", s(5), c8_temporal),
        criterion(9, "sparsity anchors", s(30), c9_sparsity),
        criterion(10, "manifest replay", s(60), c10_replay),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

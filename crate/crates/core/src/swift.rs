//! Sea-wave induced fixed-point (SWIFT) fading: the received level of a
//! stationary vessel as waves displace the reflection plane and the Rx
//! antenna rolls, pitches and yaws.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LinkGeometry;
use crate::pathloss::{mtr_path_loss_at_heights, MtrOptions, SeaState};
use crate::seastate::{build_harmonics, peak_frequency, surface_height, HarmonicSet, WaveSpectrumConfig};

/// Sinusoidal roll/pitch/yaw of the Rx antenna.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    pub roll_amplitude: f64,
    pub pitch_amplitude: f64,
    pub yaw_amplitude: f64,
    pub roll_rate: f64,
    pub pitch_rate: f64,
    pub yaw_rate: f64,
    pub roll_phase: f64,
    pub pitch_phase: f64,
    pub yaw_phase: f64,
}

impl MotionConfig {
    pub fn still() -> Self {
        MotionConfig {
            roll_amplitude: 0.0,
            pitch_amplitude: 0.0,
            yaw_amplitude: 0.0,
            roll_rate: 0.0,
            pitch_rate: 0.0,
            yaw_rate: 0.0,
            roll_phase: 0.0,
            pitch_phase: 0.0,
            yaw_phase: 0.0,
        }
    }

    /// Default sway: 5° roll and pitch, 2° yaw, rates within ±20% of the
    /// wave peak frequency and uniform phases, all drawn from `seed`.
    pub fn default_for(wind_speed: f64, seed: u64) -> Self {
        let wp = peak_frequency(wind_speed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rate = || wp * (0.8 + 0.4 * rng.random::<f64>());
        let (roll_rate, pitch_rate, yaw_rate) = (rate(), rate(), rate());
        let mut phase = || rng.random::<f64>() * 2.0 * PI;
        let (roll_phase, pitch_phase, yaw_phase) = (phase(), phase(), phase());
        MotionConfig {
            roll_amplitude: 5f64.to_radians(),
            pitch_amplitude: 5f64.to_radians(),
            yaw_amplitude: 2f64.to_radians(),
            roll_rate,
            pitch_rate,
            yaw_rate,
            roll_phase,
            pitch_phase,
            yaw_phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in [self.roll_amplitude, self.pitch_amplitude, self.yaw_amplitude] {
            if !(0.0..PI / 2.0).contains(&a) {
                return Err(Error::domain(format!("rotation amplitude must lie in [0, pi/2), got {a}")));
            }
        }
        for w in [self.roll_rate, self.pitch_rate, self.yaw_rate] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::domain(format!("rotation rate must be >= 0, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationState {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

pub type Matrix3 = [[f64; 3]; 3];

pub fn rotation_angles(m: &MotionConfig, t: f64) -> RotationState {
    RotationState {
        phi: m.roll_amplitude * (m.roll_rate * t + m.roll_phase).sin(),
        theta: m.pitch_amplitude * (m.pitch_rate * t + m.pitch_phase).sin(),
        psi: m.yaw_amplitude * (m.yaw_rate * t + m.yaw_phase).sin(),
    }
}

fn matmul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Matrix3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// `R_z(ψ) R_y(θ) R_x(φ)`.
pub fn rotation_matrix(s: &RotationState) -> Matrix3 {
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    let (sy, cy) = s.psi.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
    let ry = [[ct, 0.0, st], [0.0, 1.0, 0.0], [-st, 0.0, ct]];
    let rz = [[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]];
    matmul(&rz, &matmul(&ry, &rx))
}

/// Elevation of the Tx as seen from the Rx over a flat plane.
pub fn los_elevation(geom: &LinkGeometry) -> f64 {
    ((geom.h_tx - geom.h_rx) / geom.distance).atan()
}

/// Unit LoS vector `[cos α0, 0, sin α0]`.
pub fn los_direction(geom: &LinkGeometry) -> [f64; 3] {
    let (s, c) = los_elevation(geom).sin_cos();
    [c, 0.0, s]
}

/// Vertical component of the rotated LoS vector, in closed form.
pub fn rotated_los_z(s: &RotationState, alpha0: f64) -> f64 {
    -s.theta.sin() * alpha0.cos() + s.theta.cos() * s.phi.cos() * alpha0.sin()
}

/// Elevation amplitude pattern of the Rx antenna.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AntennaPattern {
    /// `F(e) = cos(e - boresight)`, clipped at zero.
    Cosine { boresight: f64 },
    /// Linear interpolation over `(elevation rad, gain)` points, clamped at
    /// the table ends.
    Table { elevation: Vec<f64>, gain: Vec<f64> },
}

impl Default for AntennaPattern {
    fn default() -> Self {
        AntennaPattern::Cosine { boresight: 0.0 }
    }
}

impl AntennaPattern {
    /// Build a table pattern normalized so that `F(0) = 1`.
    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        let elevation: Vec<f64> = points.iter().map(|p| p.0).collect();
        let gain: Vec<f64> = points.iter().map(|p| p.1).collect();
        let raw = AntennaPattern::Table { elevation, gain };
        raw.validate()?;
        let g0 = raw.gain(0.0);
        if !(g0 > 0.0) {
            return Err(Error::domain("pattern gain at zero elevation must be positive"));
        }
        let AntennaPattern::Table { elevation, gain } = raw else { unreachable!() };
        Ok(AntennaPattern::Table {
            elevation,
            gain: gain.into_iter().map(|g| g / g0).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AntennaPattern::Cosine { boresight } => {
                if !boresight.is_finite() {
                    return Err(Error::domain("pattern boresight must be finite"));
                }
            }
            AntennaPattern::Table { elevation, gain } => {
                if elevation.is_empty() || elevation.len() != gain.len() {
                    return Err(Error::domain("pattern table needs matching, non-empty columns"));
                }
                if elevation.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::domain("pattern elevations must be strictly increasing"));
                }
                if gain.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                    return Err(Error::domain("pattern gains must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Amplitude gain at elevation `e` (rad).
    pub fn gain(&self, e: f64) -> f64 {
        match self {
            AntennaPattern::Cosine { boresight } => (e - boresight).cos().max(0.0),
            AntennaPattern::Table { elevation, gain } => {
                let n = elevation.len();
                if e <= elevation[0] {
                    return gain[0];
                }
                if e >= elevation[n - 1] {
                    return gain[n - 1];
                }
                let i = elevation.partition_point(|&x| x <= e);
                let (x0, x1) = (elevation[i - 1], elevation[i]);
                let w = (e - x0) / (x1 - x0);
                gain[i - 1] + w * (gain[i] - gain[i - 1])
            }
        }
    }
}

fn loss_db(amplitude: f64) -> f64 {
    if amplitude <= 0.0 {
        f64::INFINITY
    } else {
        -20.0 * amplitude.log10()
    }
}

/// Gain loss from tilting the Rx pattern away from the LoS elevation;
/// `+∞` where the pattern has a zero.
pub fn pattern_loss(s: &RotationState, geom: &LinkGeometry, p: &AntennaPattern) -> f64 {
    let uz = rotated_los_z(s, los_elevation(geom)).clamp(-1.0, 1.0);
    loss_db(p.gain(uz.asin()))
}

/// Polarization mismatch `-20 log10 |cos θ cos φ|`.
pub fn polarization_loss(s: &RotationState) -> f64 {
    loss_db((s.theta.cos() * s.phi.cos()).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Calm,
    Bracketed,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveHeights {
    pub h_t_eff: f64,
    pub h_r_eff: f64,
    pub d1: f64,
    pub method: SolveMethod,
}

const FIXED_POINT_STEPS: usize = 50;
const FIXED_POINT_TOL: f64 = 1e-3;

struct HeightSystem<'a> {
    h_t: f64,
    h_r: f64,
    d: f64,
    sea: &'a HarmonicSet,
    t: f64,
    hs_rx: f64,
}

impl HeightSystem<'_> {
    fn heights(&self, d1: f64) -> (f64, f64) {
        let hs1 = surface_height(self.sea, self.t, d1);
        (self.h_t - hs1, self.h_r + self.hs_rx - hs1)
    }

    /// `d1 h_r_eff - (d - d1) h_t_eff`; negative near the Tx, positive near the Rx.
    fn residual(&self, d1: f64) -> f64 {
        let (ht, hr) = self.heights(d1);
        d1 * hr - (self.d - d1) * ht
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        let mut r_lo = self.residual(lo);
        let tol = 1e-9 * self.d;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = self.residual(mid);
            if r.abs() < tol || hi - lo < 1e-12 * self.d {
                return mid;
            }
            if (r < 0.0) == (r_lo < 0.0) {
                lo = mid;
                r_lo = r;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn finish(&self, d1: f64, method: SolveMethod) -> Result<EffectiveHeights> {
        let (h_t_eff, h_r_eff) = self.heights(d1);
        if !(h_t_eff > 0.0 && h_r_eff > 0.0) {
            return Err(Error::NoConvergence(format!(
                "reflection point d1={d1} gives non-positive effective heights ({h_t_eff}, {h_r_eff})"
            )));
        }
        Ok(EffectiveHeights { h_t_eff, h_r_eff, d1, method })
    }
}

/// Solve for the reflection point on the displaced sea surface.
///
/// Substitution iteration is tried first from the calm-sea point. Its map is
/// usually expansive at km ranges, so the answer is then taken as the root
/// of the reflection-ratio residual nearest the iterate, bracketed by an
/// outward scan in steps of a fraction of the shortest sea wavelength.
/// A bisection over the whole path is the last resort.
pub fn effective_heights(geom: &LinkGeometry, sea: &HarmonicSet, t: f64) -> Result<EffectiveHeights> {
    let (h_t, h_r, d) = (geom.h_tx, geom.h_rx, geom.distance);
    let calm = d * h_t / (h_t + h_r);
    if sea.is_calm() {
        return Ok(EffectiveHeights { h_t_eff: h_t, h_r_eff: h_r, d1: calm, method: SolveMethod::Calm });
    }
    let sys = HeightSystem { h_t, h_r, d, sea, t, hs_rx: surface_height(sea, t, d) };
    let eps = 1e-9 * d;

    let mut d1 = calm;
    for _ in 0..FIXED_POINT_STEPS {
        let (ht, hr) = sys.heights(d1);
        let next = d * ht / (ht + hr);
        if !(next > eps && next < d - eps) {
            d1 = calm;
            break;
        }
        let step = (next - d1).abs();
        d1 = next;
        if step < FIXED_POINT_TOL {
            break;
        }
    }

    let r0 = sys.residual(d1);
    if r0 == 0.0 {
        return sys.finish(d1, SolveMethod::Bracketed);
    }
    let step = sea.shortest_wavelength().unwrap_or(d) / 16.0;
    let mut k = 1.0;
    while k * step < d {
        for x in [d1 - k * step, d1 + k * step] {
            if !(x > eps && x < d - eps) {
                continue;
            }
            let r = sys.residual(x);
            if (r < 0.0) != (r0 < 0.0) {
                let (lo, hi) = if x < d1 { (x, d1) } else { (d1, x) };
                let root = sys.bisect(lo, hi);
                if let Ok(sol) = sys.finish(root, SolveMethod::Bracketed) {
                    return Ok(sol);
                }
            }
        }
        k += 1.0;
    }

    let (lo, hi) = (eps, d - eps);
    if (sys.residual(lo) < 0.0) == (sys.residual(hi) < 0.0) {
        return Err(Error::NoConvergence(format!(
            "no sign change of the reflection residual on (0, {d}) at t={t}"
        )));
    }
    sys.finish(sys.bisect(lo, hi), SolveMethod::Bisection)
}

fn default_dt() -> f64 {
    0.1
}

fn default_duration() -> f64 {
    93.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwiftSettings {
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub mtr: MtrOptions,
}

impl Default for SwiftSettings {
    fn default() -> Self {
        SwiftSettings { duration: default_duration(), dt: default_dt(), mtr: MtrOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwiftMeta {
    pub seed: u64,
    pub geometry: LinkGeometry,
    pub sea: SeaState,
    pub significant_wave_height: f64,
    pub n_steps: usize,
    pub n_flagged: usize,
}

/// De-meaned received-level deviations. Steps where the reflection could
/// not be solved or a loss term is infinite are left out of `t` and
/// `fading_db` and listed in `flagged`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwiftSeries {
    pub t: Vec<f64>,
    pub fading_db: Vec<f64>,
    pub flagged: Vec<f64>,
    pub meta: SwiftMeta,
}

impl SwiftSeries {
    pub fn std_db(&self) -> f64 {
        crate::numeric::std_dev(&self.fading_db)
    }
}

/// Everything needed for one SWIFT run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwiftScenario {
    pub geometry: LinkGeometry,
    pub sea: SeaState,
    pub waves: HarmonicSet,
    pub motion: MotionConfig,
    #[serde(default)]
    pub pattern: AntennaPattern,
    #[serde(default)]
    pub settings: SwiftSettings,
    #[serde(default)]
    pub seed: u64,
}

impl SwiftScenario {
    /// Waves from the P-M spectrum at the sea-state wind speed and default
    /// vessel sway, both derived from `seed`.
    pub fn seeded(geometry: LinkGeometry, sea: SeaState, n_harmonics: usize, seed: u64) -> Result<Self> {
        let spectrum = WaveSpectrumConfig { n_harmonics, ..WaveSpectrumConfig::new(sea.wind_speed, seed) };
        Ok(SwiftScenario {
            geometry,
            sea,
            waves: build_harmonics(&spectrum)?,
            motion: MotionConfig::default_for(sea.wind_speed, seed ^ 0x9e37_79b9_7f4a_7c15),
            pattern: AntennaPattern::default(),
            settings: SwiftSettings::default(),
            seed,
        })
    }
}

pub fn simulate_swift(sc: &SwiftScenario) -> Result<SwiftSeries> {
    let SwiftSettings { duration, dt, mtr } = sc.settings;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    if !(duration >= dt && duration.is_finite()) {
        return Err(Error::domain(format!("duration {duration} shorter than the time step {dt}")));
    }
    sc.geometry.validate()?;
    sc.sea.validate()?;
    sc.motion.validate()?;
    sc.pattern.validate()?;

    let n_steps = (duration / dt + 1e-9).floor() as usize + 1;
    let mut t_out = Vec::with_capacity(n_steps);
    let mut level = Vec::with_capacity(n_steps);
    let mut flagged = Vec::new();
    for i in 0..n_steps {
        let t = i as f64 * dt;
        let Ok(eff) = effective_heights(&sc.geometry, &sc.waves, t) else {
            flagged.push(t);
            continue;
        };
        let pl = mtr_path_loss_at_heights(&sc.geometry, &sc.sea, eff.h_t_eff, eff.h_r_eff, mtr)?;
        let rot = rotation_angles(&sc.motion, t);
        let loss = pl + pattern_loss(&rot, &sc.geometry, &sc.pattern) + polarization_loss(&rot);
        if !loss.is_finite() {
            flagged.push(t);
            continue;
        }
        t_out.push(t);
        level.push(-loss);
    }
    if level.is_empty() {
        return Err(Error::Empty("every SWIFT step was flagged".into()));
    }
    let mut fading = level;
    for _ in 0..2 {
        let m = crate::numeric::mean(&fading);
        fading.iter_mut().for_each(|x| *x -= m);
    }
    Ok(SwiftSeries {
        t: t_out,
        fading_db: fading,
        meta: SwiftMeta {
            seed: sc.seed,
            geometry: sc.geometry,
            sea: sc.sea,
            significant_wave_height: crate::seastate::significant_wave_height(&sc.waves),
            n_steps,
            n_flagged: flagged.len(),
        },
        flagged,
    })
}

/// Normalized histogram with bins centered on multiples of `bin_width`.
/// Returns `(bin_center, density)` for every bin between the extremes.
pub fn empirical_pdf(values: &[f64], bin_width: f64) -> Result<Vec<(f64, f64)>> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::domain(format!("bin width must be positive, got {bin_width}")));
    }
    if values.len() < 2 {
        return Err(Error::Degenerate("histogram needs at least two samples".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram input must be finite"));
    }
    let index = |v: f64| (v / bin_width).round() as i64;
    let lo = values.iter().map(|&v| index(v)).min().unwrap();
    let hi = values.iter().map(|&v| index(v)).max().unwrap();
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &v in values {
        counts[(index(v) - lo) as usize] += 1;
    }
    let norm = values.len() as f64 * bin_width;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((lo + i as i64) as f64 * bin_width, c as f64 / norm))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleDecomposition {
    /// Per-group level in dB relative to the mean over groups.
    pub swift_db: Vec<f64>,
    /// Every sample divided by its group mean, in group order.
    pub small_scale: Vec<f64>,
}

/// Split grouped envelope amplitudes into slow (between-group, dB) and fast
/// (within-group, linear ratio) parts.
pub fn decompose_scales(groups: &[Vec<f64>]) -> Result<ScaleDecomposition> {
    if groups.is_empty() {
        return Err(Error::Empty("no groups".into()));
    }
    let mut means = Vec::with_capacity(groups.len());
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::Empty(format!("group {i} is empty")));
        }
        let m = crate::numeric::mean(g);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Degenerate(format!("group {i} has non-positive mean amplitude {m}")));
        }
        means.push(m);
    }
    let db: Vec<f64> = means.iter().map(|m| 20.0 * m.log10()).collect();
    let center = crate::numeric::mean(&db);
    let small_scale = groups
        .iter()
        .zip(&means)
        .flat_map(|(g, m)| g.iter().map(move |x| x / m))
        .collect();
    Ok(ScaleDecomposition { swift_db: db.into_iter().map(|x| x - center).collect(), small_scale })
}

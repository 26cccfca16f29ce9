//! Batch command-line front end.
//!
//! Every run resolves a JSON configuration (file values overridden by
//! flags), writes its outputs to the output directory together with a
//! `manifest.json`, and can be re-run from that manifest with `replay`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{break_distance, thresholds, LinkGeometry, EARTH_RADIUS};
use crate::pathloss::{
    ci_path_loss, dual_ci_mtr_path_loss, dual_ci_path_loss, fspl, mtr_path_loss, two_ray_simplified, CiParams,
    DualSlopeParams, MtrOptions, SeaState,
};
use crate::plfit::{fit_ci, fit_dual_ci, fit_dual_ci_mtr, PathLossSample};
use crate::seastate::{build_harmonics, HarmonicSet, WaveSpectrumConfig};
use crate::smallscale::{
    fit_mle, ks_statistic, log_likelihood, pdf_rmse, sample, EnvelopeSamples, Family, FadingModel, FitOptions,
};
use crate::sounder::{extract_cir_with, pdp_from_cir, read_iq, simulate_link, write_iq, Cir, ZcConfig};
use crate::sparsity::{
    estimate_noise_floor, gini, mpc_extract, sparsity_metrics, split_equal, split_random, PdpRecord,
    DEFAULT_RESOLUTION, DEFAULT_THRESHOLD_DB,
};
use crate::swift::{decompose_scales, empirical_pdf, simulate_swift, AntennaPattern, MotionConfig, SwiftScenario, SwiftSettings};
use crate::temporal::{delay_stats, fit_exp_pdp, synth_exp_pdp};

pub const THREADS_ENV: &str = "MARINER_CHAN_THREADS";
pub const MANIFEST_FILE: &str = "manifest.json";
const MOTION_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeaConfig {
    pub wind_speed: f64,
    pub gamma: Complex64,
    pub n_harmonics: usize,
    pub omega_lo: Option<f64>,
    pub omega_hi: Option<f64>,
}

impl Default for SeaConfig {
    fn default() -> Self {
        SeaConfig { wind_speed: 7.7, gamma: Complex64::new(-1.0, 0.0), n_harmonics: 5, omega_lo: None, omega_hi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossConfig {
    pub n: f64,
    pub n1: f64,
    pub n2: f64,
    pub d0: f64,
    /// Break distance override; the geometric break distance otherwise.
    pub d_break: Option<f64>,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig { n: 2.0, n1: 2.02, n2: 3.27, d0: 1.0, d_break: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SounderConfig {
    pub length: usize,
    pub root: u64,
    pub delta_tau: f64,
    pub snr_db: f64,
    /// Decay constant of the synthetic exponential channel (s).
    pub gamma: f64,
    pub n_taps: usize,
    pub threshold_db: f64,
}

impl Default for SounderConfig {
    fn default() -> Self {
        SounderConfig {
            length: crate::sounder::DEFAULT_LENGTH,
            root: 1,
            delta_tau: crate::sounder::DEFAULT_DELTA_TAU,
            snr_db: 30.0,
            gamma: 24e-9,
            n_taps: 5,
            threshold_db: DEFAULT_THRESHOLD_DB,
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: LinkGeometry,
    pub sea: SeaConfig,
    /// Vessel sway; drawn from the seed when absent.
    pub motion: Option<MotionConfig>,
    pub pattern: AntennaPattern,
    pub swift: SwiftSettings,
    pub mtr: MtrOptions,
    pub pathloss: PathLossConfig,
    pub fit: FitOptions,
    pub sounder: SounderConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: LinkGeometry {
                freq_hz: 5.8e9,
                h_tx: 25.0,
                h_rx: 4.0,
                distance: 10_000.0,
                earth_radius: EARTH_RADIUS,
                k_eff: 1.0,
            },
            sea: SeaConfig::default(),
            motion: None,
            pattern: AntennaPattern::default(),
            swift: SwiftSettings::default(),
            mtr: MtrOptions::default(),
            pathloss: PathLossConfig::default(),
            fit: FitOptions::default(),
            sounder: SounderConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.sea_state()?;
        if self.sea.wind_speed > 0.0 {
            self.spectrum().validate()?;
        }
        if let Some(m) = &self.motion {
            m.validate()?;
        }
        self.pattern.validate()?;
        ZcConfig::new(self.sounder.length, self.sounder.root)?;
        if !(self.sounder.delta_tau > 0.0 && self.sounder.gamma > 0.0 && self.sounder.n_taps > 0) {
            return Err(Error::domain("sounder delta_tau, gamma and n_taps must be positive"));
        }
        if !(self.pathloss.d0 > 0.0) {
            return Err(Error::domain("reference distance must be positive"));
        }
        Ok(())
    }

    pub fn sea_state(&self) -> Result<SeaState> {
        SeaState::new(self.sea.wind_speed)?.with_gamma(self.sea.gamma)
    }

    fn spectrum(&self) -> WaveSpectrumConfig {
        WaveSpectrumConfig {
            wind_speed: self.sea.wind_speed,
            n_harmonics: self.sea.n_harmonics,
            omega_lo: self.sea.omega_lo,
            omega_hi: self.sea.omega_hi,
            seed: self.seed,
        }
    }

    fn zc(&self) -> Result<ZcConfig> {
        ZcConfig::new(self.sounder.length, self.sounder.root)
    }

    fn d_break(&self) -> f64 {
        self.pathloss.d_break.unwrap_or_else(|| break_distance(&self.geometry))
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    fn scenario(&self, seed: u64) -> Result<SwiftScenario> {
        let sea = self.sea_state()?;
        let calm = self.sea.wind_speed == 0.0;
        let waves = if calm {
            HarmonicSet::calm()
        } else {
            build_harmonics(&WaveSpectrumConfig { seed, ..self.spectrum() })?
        };
        let motion = match self.motion {
            Some(m) => m,
            None if calm => MotionConfig::still(),
            None => MotionConfig::default_for(self.sea.wind_speed, seed ^ MOTION_SEED_MIX),
        };
        Ok(SwiftScenario {
            geometry: self.geometry,
            sea,
            waves,
            motion,
            pattern: self.pattern.clone(),
            settings: self.swift,
            seed,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "mariner-chan", version, about = "Maritime radio channel modeling toolkit")]
pub struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    freq_hz: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    h_tx: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    h_rx: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    distance: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    wind_speed: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Break, 0.6-Fresnel and line-of-sight distances.
    Geometry,
    /// Evaluate or fit large-scale path-loss models.
    Pathloss {
        #[command(subcommand)]
        op: PathlossOp,
    },
    /// Sea-wave-induced fading time series.
    Swift {
        #[command(subcommand)]
        op: SwiftOp,
    },
    /// Envelope distribution fits, sampling and goodness of fit.
    Smallscale {
        #[command(subcommand)]
        op: SmallscaleOp,
    },
    /// Gini index and K factor of a PDP.
    #[command(args_conflicts_with_subcommands = true)]
    Sparsity {
        #[command(subcommand)]
        op: Option<SparsityOp>,
        #[command(flatten)]
        args: SparsityArgs,
    },
    /// Delay spread and exponential-decay fit of a PDP.
    Temporal {
        #[arg(long)]
        pdp: PathBuf,
    },
    /// Zadoff-Chu channel sounding simulation and CIR extraction.
    Sounder {
        #[command(subcommand)]
        op: SounderOp,
    },
    /// Split grouped envelopes into slow (dB) and fast (linear) parts.
    Decompose {
        #[arg(long)]
        data: PathBuf,
    },
    /// Re-run a recorded manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlModel {
    Fspl,
    TwoRay,
    Mtr,
    Ci,
    DualCi,
    DualCiMtr,
}

#[derive(Debug, Subcommand)]
enum PathlossOp {
    /// Evaluate a model on a distance grid.
    Eval {
        #[arg(long, value_enum, default_value = "dual-ci-mtr")]
        model: PlModel,
        #[arg(long, default_value_t = 2000.0, allow_negative_numbers = true)]
        dmin: f64,
        #[arg(long, default_value_t = 33800.0)]
        dmax: f64,
        #[arg(long, default_value_t = 20.0)]
        step: f64,
        #[arg(long, allow_negative_numbers = true)]
        n: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        n1: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        n2: Option<f64>,
    },
    /// Fit a model to `d_m,pl_db` samples.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "dual-ci-mtr")]
        model: PlModel,
    },
}

#[derive(Debug, Subcommand)]
enum SwiftOp {
    /// Simulate the sea-wave induced fading series.
    Sim {
        #[arg(long, default_value_t = 1)]
        replicates: u64,
    },
    /// Histogram of a fading series (simulated when no series is given).
    Pdf {
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        bin_width: f64,
    },
}

#[derive(Debug, Subcommand)]
enum SmallscaleOp {
    /// Maximum-likelihood fits of one or all families.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Family name, or `all`.
        #[arg(long, default_value = "all")]
        family: String,
        /// Scale amplitudes to unit mean first.
        #[arg(long)]
        normalize: bool,
    },
    /// Draw envelope samples.
    Sample {
        #[arg(long)]
        family: Family,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Goodness of fit of given parameters.
    Gof {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        family: Family,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Vec<f64>,
        #[arg(long)]
        normalize: bool,
    },
}

#[derive(Debug, Args)]
struct SparsityArgs {
    #[arg(long)]
    pdp: Option<PathBuf>,
    /// Keep only taps this far above the noise floor.
    #[arg(long, allow_negative_numbers = true)]
    threshold_db: Option<f64>,
    /// Linear noise floor; estimated from the data when absent.
    #[arg(long)]
    noise_floor: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum SparsityOp {
    /// Check the splitting identities on random PDPs.
    LemmaCheck {
        #[arg(long, default_value_t = 10_000)]
        draws: u64,
        #[arg(long, default_value_t = 50)]
        max_taps: usize,
        #[arg(long, default_value_t = 8)]
        max_split: usize,
    },
}

#[derive(Debug, Subcommand)]
enum SounderOp {
    /// Sound a synthetic (or given) channel and store the received samples.
    Sim {
        /// Channel PDP (`delay_ns,power_linear`); exponential when absent.
        #[arg(long)]
        pdp: Option<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: Option<f64>,
    },
    /// Correlate received samples and emit the PDP.
    Extract {
        #[arg(long)]
        rx: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        threshold_db: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
}

/// Parse `argv` (program name first), execute, and return the exit code:
/// 0 on success, 2 on invalid input, 1 on runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli, args) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Parse(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn execute(cli: Cli, args: Vec<String>) -> Result<bool> {
    thread_cap()?;
    if let Command::Replay { manifest } = &cli.command {
        return replay(manifest, cli.common.out.as_deref());
    }
    let mut config = match &cli.common.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut config, &cli);
    config.validate()?;
    dispatch(&cli, config, args)
}

fn replay(path: &Path, out: Option<&Path>) -> Result<bool> {
    let m: Manifest = load_json(path)?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: manifest written by version {}, running {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    if m.config.hash() != m.config_hash {
        return Err(Error::Parse("manifest config does not match its recorded hash".into()));
    }
    for input in &m.inputs {
        if sha256_file(&input.path)? != input.sha256 {
            return Err(Error::Parse(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let argv = std::iter::once("mariner-chan".to_string()).chain(m.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Parse(format!("recorded arguments: {e}")))?;
    if matches!(cli.command, Command::Replay { .. }) {
        return Err(Error::Parse("a manifest cannot record a replay".into()));
    }
    let mut config = m.config;
    if let Some(o) = out {
        config.output_dir = o.to_path_buf();
    }
    config.validate()?;
    dispatch(&cli, config, m.args)
}

fn apply_overrides(c: &mut RunConfig, cli: &Cli) {
    let o = &cli.common;
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = &o.out {
        c.output_dir = v.clone();
    }
    let g = &mut c.geometry;
    for (dst, src) in [
        (&mut g.freq_hz, o.freq_hz),
        (&mut g.h_tx, o.h_tx),
        (&mut g.h_rx, o.h_rx),
        (&mut g.distance, o.distance),
        (&mut c.sea.wind_speed, o.wind_speed),
    ] {
        if let Some(v) = src {
            *dst = v;
        }
    }
    match &cli.command {
        Command::Pathloss { op: PathlossOp::Eval { n, n1, n2, .. } } => {
            for (dst, src) in [(&mut c.pathloss.n, n), (&mut c.pathloss.n1, n1), (&mut c.pathloss.n2, n2)] {
                if let Some(v) = src {
                    *dst = *v;
                }
            }
        }
        Command::Sounder { op: SounderOp::Sim { snr_db: Some(v), .. } } => c.sounder.snr_db = *v,
        Command::Sounder { op: SounderOp::Extract { threshold_db: Some(v), .. } } => c.sounder.threshold_db = *v,
        _ => {}
    }
}

fn command_inputs(cmd: &Command) -> Vec<&Path> {
    match cmd {
        Command::Pathloss { op: PathlossOp::Fit { data, .. } }
        | Command::Smallscale { op: SmallscaleOp::Fit { data, .. } }
        | Command::Smallscale { op: SmallscaleOp::Gof { data, .. } }
        | Command::Decompose { data } => vec![data],
        Command::Swift { op: SwiftOp::Pdf { series: Some(p), .. } }
        | Command::Sparsity { args: SparsityArgs { pdp: Some(p), .. }, .. }
        | Command::Temporal { pdp: p }
        | Command::Sounder { op: SounderOp::Sim { pdp: Some(p), .. } }
        | Command::Sounder { op: SounderOp::Extract { rx: p, .. } } => vec![p],
        _ => vec![],
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut w, v)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn print_json(v: &impl Serialize) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn dispatch(cli: &Cli, config: RunConfig, args: Vec<String>) -> Result<bool> {
    let inputs = command_inputs(&cli.command)
        .into_iter()
        .map(|p| {
            Ok(InputRecord { path: std::path::absolute(p)?, sha256: sha256_file(p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let mut out = Output { dir: config.output_dir.clone(), files: Vec::new() };
    let ok = match &cli.command {
        Command::Geometry => {
            let t = thresholds(&config.geometry);
            out.json("geometry.json", &t)?;
            print_json(&t)?;
            true
        }
        Command::Pathloss { op: PathlossOp::Eval { model, dmin, dmax, step, .. } } => {
            pathloss_eval(&config, *model, *dmin, *dmax, *step, &mut out)?
        }
        Command::Pathloss { op: PathlossOp::Fit { data, model } } => pathloss_fit(&config, data, *model, &mut out)?,
        Command::Swift { op: SwiftOp::Sim { replicates } } => swift_sim(&config, *replicates, &mut out)?,
        Command::Swift { op: SwiftOp::Pdf { series, bin_width } } => {
            let values = match series {
                Some(p) => read_f64_column(p, &["t_s", "fading_db"], 1)?,
                None => simulate_swift(&config.scenario(config.seed)?)?.fading_db,
            };
            let pdf = empirical_pdf(&values, *bin_width)?;
            out.csv("swift_pdf.csv", &["bin_center_db", "density"], pdf.iter().map(|(c, d)| vec![num(*c), num(*d)]))?;
            true
        }
        Command::Smallscale { op } => smallscale(&config, op, &mut out)?,
        Command::Sparsity { op: Some(SparsityOp::LemmaCheck { draws, max_taps, max_split }), .. } => {
            lemma_check(config.seed, *draws, *max_taps, *max_split, &mut out)?
        }
        Command::Sparsity { op: None, args } => sparsity(args, &mut out)?,
        Command::Temporal { pdp } => {
            let p = read_pdp(pdp)?;
            let report = json!({
                "delay_stats": delay_stats(&p)?,
                "exp_fit": fit_exp_pdp(&p).ok(),
                "n_taps": p.len(),
            });
            out.json("temporal.json", &report)?;
            print_json(&report)?;
            true
        }
        Command::Sounder { op: SounderOp::Sim { pdp, .. } } => sounder_sim(&config, pdp.as_deref(), &mut out)?,
        Command::Sounder { op: SounderOp::Extract { rx, .. } } => sounder_extract(&config, rx, &mut out)?,
        Command::Decompose { data } => decompose(data, &mut out)?,
        Command::Replay { .. } => unreachable!("handled before dispatch"),
    };
    let manifest = Manifest {
        tool: "mariner-chan".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        args,
        config_hash: config.hash(),
        seed: config.seed,
        inputs,
        outputs: out.files.clone(),
        config,
    };
    out.json(MANIFEST_FILE, &manifest)?;
    Ok(ok)
}

fn distance_grid(dmin: f64, dmax: f64, step: f64) -> Result<Vec<f64>> {
    if !(dmin > 0.0 && dmax >= dmin && step > 0.0 && dmax.is_finite()) {
        return Err(Error::domain(format!("invalid distance grid {dmin}..{dmax} step {step}")));
    }
    let n = ((dmax - dmin) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| dmin + i as f64 * step).collect())
}

fn pathloss_eval(c: &RunConfig, model: PlModel, dmin: f64, dmax: f64, step: f64, out: &mut Output) -> Result<bool> {
    let sea = c.sea_state()?;
    let f = c.geometry.freq_hz;
    let pl = &c.pathloss;
    let dual = DualSlopeParams { n1: pl.n1, n2: pl.n2, d_break: c.d_break(), d0: pl.d0, sigma_sf: 0.0 };
    let ci = CiParams { n: pl.n, d0: pl.d0, sigma_sf: 0.0 };
    let rows = distance_grid(dmin, dmax, step)?
        .into_iter()
        .map(|d| {
            let v = match model {
                PlModel::Fspl => fspl(f, d),
                PlModel::TwoRay => two_ray_simplified(&c.geometry.with_distance(d)?),
                PlModel::Mtr => mtr_path_loss(&c.geometry.with_distance(d)?, &sea, c.mtr)?,
                PlModel::Ci => ci_path_loss(&ci, f, d)?,
                PlModel::DualCi => dual_ci_path_loss(&dual, f, d),
                PlModel::DualCiMtr => dual_ci_mtr_path_loss(&dual, &c.geometry, &sea, c.mtr, d)?,
            };
            Ok(vec![num(d), num(v)])
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv("pathloss.csv", &["d_m", "pl_db"], rows)?;
    Ok(true)
}

fn pathloss_fit(c: &RunConfig, data: &Path, model: PlModel, out: &mut Output) -> Result<bool> {
    let samples: Vec<PathLossSample> = read_rows(data, &["d_m", "pl_db"])?
        .into_iter()
        .map(|r| PathLossSample { d: r[0], pl_db: r[1] })
        .collect();
    let f = c.geometry.freq_hz;
    let report = match model {
        PlModel::Ci => fit_ci(&samples, f, c.pathloss.d0)?,
        PlModel::DualCi => fit_dual_ci(&samples, f, c.d_break(), c.pathloss.d0)?,
        PlModel::DualCiMtr => fit_dual_ci_mtr(&samples, &c.geometry, &c.sea_state()?, c.mtr)?,
        other => return Err(Error::domain(format!("{other:?} has no free parameters to fit"))),
    };
    let summary = json!({
        "params": report.params,
        "rmse_db": report.rmse_db,
        "n_samples": report.n_samples,
        "excluded_nulls": report.excluded_nulls,
        "warnings": report.warnings,
    });
    out.json("pathloss_fit.json", &report)?;
    print_json(&summary)?;
    Ok(true)
}

fn swift_sim(c: &RunConfig, replicates: u64, out: &mut Output) -> Result<bool> {
    if replicates == 0 {
        return Err(Error::domain("need at least one replicate"));
    }
    let seeds: Vec<u64> = if replicates == 1 { vec![c.seed] } else { (0..replicates).map(|i| c.seed ^ i).collect() };
    let pool = thread_pool()?;
    let runs = pool.install(|| {
        seeds.par_iter().map(|&s| c.scenario(s).and_then(|sc| simulate_swift(&sc))).collect::<Vec<_>>()
    });
    let mut summary = Vec::new();
    for (i, r) in runs.into_iter().enumerate() {
        let series = r?;
        let name = if replicates == 1 { "swift.csv".to_string() } else { format!("swift_{i:04}.csv") };
        out.csv(
            &name,
            &["t_s", "fading_db"],
            series.t.iter().zip(&series.fading_db).map(|(t, f)| vec![num(*t), num(*f)]),
        )?;
        summary.push(json!({
            "file": name,
            "std_db": series.std_db(),
            "flagged": series.flagged,
            "meta": series.meta,
        }));
    }
    out.json("swift_meta.json", &summary)?;
    Ok(true)
}

fn model_from(family: Family, p: &[f64]) -> Result<FadingModel> {
    let need = match family {
        Family::Twdp | Family::AsymLaplace => 3,
        _ => 2,
    };
    if p.len() != need {
        return Err(Error::domain(format!("{family} takes {need} parameters, got {}", p.len())));
    }
    let m = match family {
        Family::Rician => FadingModel::Rician { s: p[0], sigma: p[1] },
        Family::Twdp => FadingModel::Twdp { k: p[0], delta: p[1], sigma: p[2] },
        Family::Nakagami => FadingModel::Nakagami { mu: p[0], omega: p[1] },
        Family::Lognormal => FadingModel::Lognormal { mu: p[0], sigma: p[1] },
        Family::Laplace => FadingModel::Laplace { mu: p[0], b: p[1] },
        Family::AsymLaplace => FadingModel::AsymLaplace { mu: p[0], b1: p[1], b2: p[2] },
    };
    m.validate()?;
    Ok(m)
}

fn envelope(data: &Path, normalize: bool) -> Result<EnvelopeSamples> {
    let v = read_f64_column(data, &["amplitude"], 0)?;
    if normalize {
        EnvelopeSamples::normalized(v)
    } else {
        EnvelopeSamples::raw(v)
    }
}

fn smallscale(c: &RunConfig, op: &SmallscaleOp, out: &mut Output) -> Result<bool> {
    match op {
        SmallscaleOp::Fit { data, family, normalize } => {
            let env = envelope(data, *normalize)?;
            let families: Vec<Family> =
                if family == "all" { Family::ALL.to_vec() } else { vec![family.parse()?] };
            let single = families.len() == 1;
            let mut reports = Vec::new();
            for f in families {
                match fit_mle(f, &env, &c.fit) {
                    Ok(r) => reports.push(json!({ "family": f, "k_db": r.k_db(), "report": r })),
                    Err(e) if single => return Err(e),
                    Err(e) => reports.push(json!({ "family": f, "error": e.to_string() })),
                }
            }
            out.json("smallscale_fit.json", &reports)?;
            print_json(&reports)?;
        }
        SmallscaleOp::Sample { family, params, n } => {
            let m = model_from(*family, params)?;
            let xs = sample(&m, *n, c.seed)?;
            out.csv("samples.csv", &["amplitude"], xs.iter().map(|x| vec![num(*x)]))?;
        }
        SmallscaleOp::Gof { data, family, params, normalize } => {
            let env = envelope(data, *normalize)?;
            let m = model_from(*family, params)?;
            let report = json!({
                "model": m,
                "n_samples": env.len(),
                "ks": ks_statistic(&env, &m)?,
                "pdf_rmse": pdf_rmse(&env, &m, c.fit.bins)?,
                "loglik": log_likelihood(&env, &m)?,
            });
            out.json("smallscale_gof.json", &report)?;
            print_json(&report)?;
        }
    }
    Ok(true)
}

fn sparsity(args: &SparsityArgs, out: &mut Output) -> Result<bool> {
    let path = args.pdp.as_ref().ok_or_else(|| Error::Parse("sparsity needs --pdp".into()))?;
    let mut p = read_pdp(path)?;
    if let Some(thr) = args.threshold_db {
        let floor = args.noise_floor.unwrap_or_else(|| estimate_noise_floor(&p.powers));
        // unit spacing makes each kept delay the index of its source tap
        let kept = mpc_extract(&p.powers, 1.0, floor, thr)?;
        p = PdpRecord {
            delays: kept.delays.iter().map(|&i| p.delays[i as usize]).collect(),
            powers: kept.powers,
            noise_floor: floor,
        };
    }
    let m = sparsity_metrics(&p)?;
    out.json("sparsity.json", &m)?;
    print_json(&m)?;
    Ok(true)
}

fn random_pdp(rng: &mut ChaCha8Rng, max_taps: usize) -> Result<PdpRecord> {
    let n = rng.random_range(1..=max_taps);
    let mut powers: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
    let i = rng.random_range(0..n);
    powers[i] += 1e-3;
    PdpRecord::new((0..n).map(|i| i as f64 * DEFAULT_RESOLUTION).collect(), powers)
}

fn lemma_check(seed: u64, draws: u64, max_taps: usize, max_split: usize, out: &mut Output) -> Result<bool> {
    if draws == 0 || max_taps == 0 || max_split == 0 {
        return Err(Error::domain("draws, max-taps and max-split must be positive"));
    }
    let pool = thread_pool()?;
    let results = pool.install(|| {
        (0..draws)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let s = seed ^ i;
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let p = random_pdp(&mut rng, max_taps)?;
                let m = rng.random_range(1..=max_split);
                let g = gini(&p)?;
                let ge = gini(&split_equal(&p, m)?)?;
                let gr = gini(&split_random(&p, m, s)?)?;
                Ok(((ge - g).abs(), ge - gr))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let equal_violations = results.iter().filter(|r| r.0 >= 1e-12).count();
    let random_violations = results.iter().filter(|r| r.1 > 1e-12).count();
    let report = json!({
        "draws": draws,
        "max_taps": max_taps,
        "max_split": max_split,
        "equal_split_violations": equal_violations,
        "random_split_violations": random_violations,
        "max_equal_split_gap": results.iter().map(|r| r.0).fold(0.0, f64::max),
    });
    out.json("lemma_check.json", &report)?;
    print_json(&report)?;
    Ok(equal_violations == 0 && random_violations == 0)
}

fn pdp_rows(p: &PdpRecord) -> impl Iterator<Item = Vec<String>> + '_ {
    p.delays.iter().zip(&p.powers).map(|(d, w)| vec![num(d * 1e9), num(*w)])
}

fn sounder_sim(c: &RunConfig, pdp: Option<&Path>, out: &mut Output) -> Result<bool> {
    let s = &c.sounder;
    let truth = match pdp {
        Some(p) => read_pdp(p)?,
        None => synth_exp_pdp(s.gamma, s.delta_tau, s.n_taps, None, c.seed)?,
    };
    let cir = Cir::from_pdp(&truth, s.delta_tau)?;
    let rx = simulate_link(&cir, &c.zc()?, s.snr_db, c.seed)?;
    write_iq(BufWriter::new(File::create(out.path("rx.mciq"))?), &rx)?;
    out.csv("true_pdp.csv", &["delay_ns", "power_linear"], pdp_rows(&pdp_from_cir(&cir)))?;
    Ok(true)
}

fn sounder_extract(c: &RunConfig, rx: &Path, out: &mut Output) -> Result<bool> {
    let samples = read_iq(BufReader::new(File::open(rx)?))?;
    let cir = extract_cir_with(&samples, &c.zc()?, c.sounder.delta_tau)?;
    let full = pdp_from_cir(&cir);
    out.csv("pdp.csv", &["delay_ns", "power_linear"], pdp_rows(&full))?;
    let floor = estimate_noise_floor(&full.powers);
    let mpcs = mpc_extract(&full.powers, c.sounder.delta_tau, floor, c.sounder.threshold_db)?;
    out.csv("mpc.csv", &["delay_ns", "power_linear"], pdp_rows(&mpcs))?;
    let report = json!({
        "noise_floor": floor,
        "threshold_db": c.sounder.threshold_db,
        "sparsity": sparsity_metrics(&mpcs)?,
        "delay_stats": delay_stats(&mpcs)?,
        "exp_fit": fit_exp_pdp(&mpcs).ok(),
    });
    out.json("sounder.json", &report)?;
    print_json(&report)?;
    Ok(true)
}

fn decompose(data: &Path, out: &mut Output) -> Result<bool> {
    let mut rdr = open_csv(data, &["group", "amplitude"])?;
    let mut names: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let a = parse_f64(&rec[1], data, line)?;
        match names.iter().position(|n| n == &rec[0]) {
            Some(i) => groups[i].push(a),
            None => {
                names.push(rec[0].to_string());
                groups.push(vec![a]);
            }
        }
    }
    let d = decompose_scales(&groups)?;
    out.csv("swift_levels.csv", &["group", "swift_db"], names.iter().zip(&d.swift_db).map(|(n, v)| vec![n.clone(), num(*v)]))?;
    out.csv("small_scale.csv", &["amplitude"], d.small_scale.iter().map(|v| vec![num(*v)]))?;
    Ok(true)
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn sha256_file(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    std::io::copy(&mut File::open(path)?, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Parse(format!("{}: expected header {}, got {}", path.display(), header.join(","), got.join(","))));
    }
    Ok(rdr)
}

fn parse_f64(s: &str, path: &Path, line: usize) -> Result<f64> {
    s.parse().map_err(|_| Error::Parse(format!("{} row {}: not a number: {s:?}", path.display(), line + 1)))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = open_csv(path, header)?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(rec.iter().map(|s| parse_f64(s, path, line)).collect::<Result<Vec<_>>>()?);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{} has no data rows", path.display())));
    }
    Ok(rows)
}

fn read_f64_column(path: &Path, header: &[&str], col: usize) -> Result<Vec<f64>> {
    Ok(read_rows(path, header)?.into_iter().map(|r| r[col]).collect())
}

/// `delay_ns,power_linear` file as a PDP record.
pub fn read_pdp(path: &Path) -> Result<PdpRecord> {
    let rows = read_rows(path, &["delay_ns", "power_linear"])?;
    PdpRecord::new(rows.iter().map(|r| r[0] * 1e-9).collect(), rows.iter().map(|r| r[1]).collect())
}

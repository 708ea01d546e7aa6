//! Command-line front end.
//!
//! Every subcommand renders its output fully in memory and writes it in one
//! go; a failed write removes the partial file. Machine-readable output only
//! goes to files, diagnostics go to stderr.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::classifier::{
    calibrate, classify, labeled_pairs, read_curve_csv, sweep_thresholds, threshold_profile,
    write_curve_csv, write_reports_csv, CalibrationCurve, ClassifierError,
};
use crate::dutycycle::{simulate, write_encounters, DutyCycleConfig, DutyCycleError, PhasePolicy, SimDevice};
use crate::privacy::{
    analyze_scan, PrivacyError, DEFAULT_AVG_NEIGHBORS, DEFAULT_DICTIONARY_SIZE,
    DEFAULT_GUESSES_PER_SECOND,
};
use crate::scanmodel::{parse_scan_log, write_scan_log, LogError, ScanLog};
use crate::synth::{
    gen_distance_experiment, PathLossModel, Point, SynthError, SynthScenario, DEFAULT_FIELD_APS,
    DEFAULT_FIELD_SIDE_M,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        #[source]
        source: LogError,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    DutyCycle(#[from] DutyCycleError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "wifi-coloc", version, about = "WiFi colocation proximity inference toolkit")]
pub struct Cli {
    /// Seed for every random draw (synth, simulate).
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory that relative output paths are resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average reference-vs-distance features per distance into a curve CSV.
    Calibrate {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "curve.csv")]
        out: PathBuf,
    },
    /// Evaluate the classifier over a list of distance thresholds.
    Sweep {
        #[arg(long)]
        log: PathBuf,
        /// Curve CSV from `calibrate`; calibrated from the log when omitted.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Thresholds in feet, e.g. `1..25` or `3,6,10`.
        #[arg(long, default_value = "1..25")]
        ks: String,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Write per-pair predictions at one threshold.
    Classify {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Simulate the hotspot duty cycle between devices on a line.
    Simulate(SimulateArgs),
    /// Generate a synthetic distance-experiment scan log.
    Synth(SynthArgs),
    /// Entropy and brute-force cost of each scan's MAC-address record.
    Privacy {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DICTIONARY_SIZE)]
        dictionary_size: u64,
        #[arg(long, default_value_t = DEFAULT_AVG_NEIGHBORS)]
        avg_neighbors: u64,
        #[arg(long, default_value_t = DEFAULT_GUESSES_PER_SECOND)]
        guess_rate: f64,
        #[arg(long, default_value = "privacy.json")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RadioArgs {
    #[arg(long)]
    pub rssi0: Option<f64>,
    #[arg(long)]
    pub d0: Option<f64>,
    #[arg(long)]
    pub exponent: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub sensitivity: Option<f64>,
    /// Shadowing length scale in meters; 0 for independent per-scan noise.
    #[arg(long)]
    pub decorrelation: Option<f64>,
    /// Share of shadowing variance redrawn on every scan, in [0, 1].
    #[arg(long)]
    pub temporal_fraction: Option<f64>,
    /// Chance that a synthetic scan misses an audible AP, in [0, 1).
    #[arg(long)]
    pub miss_probability: Option<f64>,
}

impl RadioArgs {
    pub fn apply(&self, base: PathLossModel) -> PathLossModel {
        PathLossModel {
            rssi0_dbm: self.rssi0.unwrap_or(base.rssi0_dbm),
            d0_m: self.d0.unwrap_or(base.d0_m),
            exponent_n: self.exponent.unwrap_or(base.exponent_n),
            noise_sigma_db: self.sigma.unwrap_or(base.noise_sigma_db),
            sensitivity_dbm: self.sensitivity.unwrap_or(base.sensitivity_dbm),
            shadowing_decorrelation_m: self.decorrelation.unwrap_or(base.shadowing_decorrelation_m),
            temporal_variance_fraction: self
                .temporal_fraction
                .unwrap_or(base.temporal_variance_fraction),
            scan_miss_probability: self.miss_probability.unwrap_or(base.scan_miss_probability),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Random,
    Fixed,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    pub devices: usize,
    /// Distance between neighbouring devices, meters.
    #[arg(long, default_value_t = 2.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 60.0)]
    pub period: f64,
    #[arg(long, default_value_t = 0.25)]
    pub hotspot_fraction: f64,
    /// Scan window length; defaults to the whole non-hotspot part.
    #[arg(long)]
    pub scan_duration: Option<f64>,
    #[arg(long, value_enum, default_value_t = PhaseArg::Random)]
    pub phase: PhaseArg,
    /// Per-device phase offsets in seconds for `--phase fixed`; defaults to
    /// evenly staggered offsets.
    #[arg(long, value_delimiter = ',')]
    pub offsets: Vec<f64>,
    #[arg(long, default_value_t = 3600.0)]
    pub duration: f64,
    #[command(flatten)]
    pub radio: RadioArgs,
    #[arg(long, default_value = "encounters.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scenario JSON; a uniform field is generated when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub subjects: usize,
    #[arg(long, default_value_t = 25)]
    pub max_ft: u32,
    #[arg(long, default_value_t = 1)]
    pub step_ft: u32,
    #[arg(long, default_value_t = DEFAULT_FIELD_APS)]
    pub aps: usize,
    /// Side of the square AP field, meters.
    #[arg(long, default_value_t = DEFAULT_FIELD_SIDE_M)]
    pub side: f64,
    #[command(flatten)]
    pub radio: RadioArgs,
    #[arg(long, default_value = "scans.jsonl")]
    pub out: PathBuf,
    /// Also write the scenario used.
    #[arg(long)]
    pub scenario_out: Option<PathBuf>,
}

/// Parses threshold lists such as `1..25`, `1..=25`, `2.5,5,10` or
/// `1..5,10`. Ranges are inclusive and step by one foot.
pub fn parse_thresholds(spec: &str) -> Result<Vec<f64>, String> {
    let mut ks = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u32 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let hi: u32 = b.trim().parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if lo > hi {
                return Err(format!("empty range {part:?}"));
            }
            ks.extend((lo..=hi).map(f64::from));
        } else {
            let k: f64 = part.parse().map_err(|_| format!("bad threshold {part:?}"))?;
            if !k.is_finite() {
                return Err(format!("bad threshold {part:?}"));
            }
            ks.push(k);
        }
    }
    if ks.is_empty() {
        return Err(format!("no thresholds in {spec:?}"));
    }
    Ok(ks)
}

fn read_log(path: &Path) -> Result<ScanLog, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    parse_scan_log(BufReader::new(file), &path.display().to_string())
        .map_err(|source| CliError::Log { path: path.into(), source })
}

fn read_curve(path: &Path) -> Result<CalibrationCurve, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    read_curve_csv(file).map_err(|source| CliError::Csv { path: path.into(), source })
}

fn curve_for(log: &ScanLog, path: Option<&Path>) -> Result<CalibrationCurve, CliError> {
    match path {
        Some(p) => read_curve(p),
        None => Ok(calibrate(log)?),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.into(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::write(path, bytes).map_err(|e| {
        let _ = fs::remove_file(path);
        io_err(e)
    })
}

fn csv_bytes(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|source| CliError::Csv { path: path.into(), source })?;
    Ok(buf)
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    device_id: &'a str,
    distance_ft: f64,
    jaccard: f64,
    pearson: f64,
    das: f64,
    predicted: bool,
    actual: bool,
}

/// Runs a parsed command line and returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
            pool.install(|| dispatch(&cli))
        }
        None => dispatch(&cli),
    }
}

fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let out = |p: &Path| cli.out_dir.join(p);
    match &cli.command {
        Command::Calibrate { log, out: o } => {
            let curve = calibrate(&read_log(log)?)?;
            let path = out(o);
            let bytes = csv_bytes(&path, |b| write_curve_csv(&curve, b))?;
            write_output(&path, &bytes)?;
            Ok(vec![path])
        }
        Command::Sweep { log, curve, ks, out: o } => {
            let ks = parse_thresholds(ks).map_err(CliError::Usage)?;
            let log = read_log(log)?;
            let curve = curve_for(&log, curve.as_deref())?;
            let reports = sweep_thresholds(&log, &curve, &ks)?;
            let path = out(o);
            let bytes = csv_bytes(&path, |b| write_reports_csv(&reports, b))?;
            write_output(&path, &bytes)?;
            Ok(vec![path])
        }
        Command::Classify { log, curve, k, out: o } => {
            let log = read_log(log)?;
            let curve = curve_for(&log, curve.as_deref())?;
            let profile = threshold_profile(&curve, *k)?;
            let pairs = labeled_pairs(&log)?;
            let path = out(o);
            let bytes = csv_bytes(&path, |b| {
                let mut w = csv::Writer::from_writer(b);
                for p in &pairs {
                    w.serialize(PredictionRow {
                        device_id: &p.device_id,
                        distance_ft: p.distance_ft,
                        jaccard: p.features.jaccard,
                        pearson: p.features.pearson,
                        das: p.features.das,
                        predicted: classify(&p.features, &profile),
                        actual: p.distance_ft <= profile.k_ft,
                    })?;
                }
                w.flush()?;
                Ok(())
            })?;
            write_output(&path, &bytes)?;
            Ok(vec![path])
        }
        Command::Simulate(args) => {
            let devices = sim_devices(args)?;
            let radio = args.radio.apply(PathLossModel::default());
            let encounters = simulate(&devices, &radio, args.duration, cli.seed)?;
            let path = out(&args.out);
            let mut buf = Vec::new();
            write_encounters(&encounters, &mut buf).map_err(|source| CliError::Io { path: path.clone(), source })?;
            write_output(&path, &buf)?;
            log::info!("{} encounters written to {}", encounters.len(), path.display());
            Ok(vec![path])
        }
        Command::Synth(args) => {
            let scenario = match &args.scenario {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
                    let mut sc: SynthScenario = serde_json::from_str(&text)
                        .map_err(|source| CliError::Json { path: p.clone(), source })?;
                    sc.path_loss = args.radio.apply(sc.path_loss);
                    sc
                }
                None => SynthScenario::uniform_field(
                    cli.seed,
                    args.aps,
                    args.side,
                    args.radio.apply(PathLossModel::default()),
                ),
            };
            let log = gen_distance_experiment(&scenario, args.subjects, args.max_ft, args.step_ft)?;
            let path = out(&args.out);
            let mut buf = Vec::new();
            write_scan_log(&log, &mut buf).map_err(|source| CliError::Io { path: path.clone(), source })?;
            let mut written = Vec::new();
            if let Some(sc_out) = &args.scenario_out {
                let sc_path = out(sc_out);
                let json = serde_json::to_vec_pretty(&scenario)
                    .map_err(|source| CliError::Json { path: sc_path.clone(), source })?;
                write_output(&sc_path, &json)?;
                written.push(sc_path);
            }
            write_output(&path, &buf)?;
            written.push(path);
            Ok(written)
        }
        Command::Privacy { log, dictionary_size, avg_neighbors, guess_rate, out: o } => {
            let log = read_log(log)?;
            let reports = log
                .scans()
                .iter()
                .map(|s| analyze_scan(s, *dictionary_size, *avg_neighbors, *guess_rate))
                .collect::<Result<Vec<_>, _>>()?;
            let path = out(o);
            let mut json = serde_json::to_vec_pretty(&reports)
                .map_err(|source| CliError::Json { path: path.clone(), source })?;
            json.push(b'\n');
            write_output(&path, &json)?;
            for (i, r) in reports.iter().enumerate() {
                println!("scan {i}\n{r}\n");
            }
            Ok(vec![path])
        }
    }
}

fn sim_devices(args: &SimulateArgs) -> Result<Vec<SimDevice>, CliError> {
    if args.devices < 2 {
        return Err(DutyCycleError::TooFewDevices(args.devices).into());
    }
    let scan = args
        .scan_duration
        .unwrap_or(args.period * (1.0 - args.hotspot_fraction));
    let n = args.devices;
    if args.phase == PhaseArg::Fixed && !args.offsets.is_empty() && args.offsets.len() != n {
        return Err(CliError::Usage(format!(
            "--offsets lists {} values for {n} devices",
            args.offsets.len()
        )));
    }
    (0..n)
        .map(|i| {
            let policy = match args.phase {
                PhaseArg::Random => PhasePolicy::Randomized,
                PhaseArg::Fixed => PhasePolicy::Fixed {
                    offset_s: args
                        .offsets
                        .get(i)
                        .copied()
                        .unwrap_or(i as f64 * args.period / n as f64),
                },
            };
            let config = DutyCycleConfig::new(args.period, args.hotspot_fraction, policy, scan)?;
            Ok(SimDevice {
                device_id: format!("dev-{:0w$}", i + 1, w = n.to_string().len()),
                position: Point::new(i as f64 * args.spacing, 0.0),
                config,
                rng_seed: i as u64,
            })
        })
        .collect()
}

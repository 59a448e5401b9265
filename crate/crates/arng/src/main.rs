//! Command-line pipelines: simulate tag streams, extract bits, run the
//! predictability and validity analyses, calibrate magnitudes, drive the
//! eraser Monte Carlo, and export NIST-format bitstreams.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use arng::bits::{self, BitScheme, BitStream};
use arng::calibration;
use arng::eraser;
use arng::mi;
use arng::stream::{cross_channel_deadtime_filter, simulate, ScenarioConfig, TagStream};
use arng::tagfile;
use arng::validity::{self, ArmObservation, DetectorObservation};
use arng::ArngError;

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "arng", version, about = "Astronomical RNG simulator and analysis pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a photon tag stream from a scenario config
    Simulate(SimulateArgs),
    /// Extract a bitstream from a tag stream and report its imbalance
    Extract(ExtractArgs),
    /// Mutual-information and surrogate-null analysis of an extracted bitstream
    AnalyzeMi(AnalyzeMiArgs),
    /// Validity budget (corruption probabilities, valid fraction q) for a scenario
    Validity(ValidityArgs),
    /// Fit the magnitude-to-count-rate law over an observation catalog
    Calibrate(CalibrateArgs),
    /// Quantum-eraser Monte Carlo with basis choices drawn from a bitstream
    Eraser(EraserArgs),
    /// Export bits as ASCII '0'/'1' text (NIST statistical suite input)
    ExportNist(ExportNistArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config (TOML with [rates], [crosstalk], [detector], [run], [scintillation])
    #[arg(long)]
    config: PathBuf,
    /// Output tag-stream file; a JSON manifest is written next to it
    #[arg(long)]
    out: PathBuf,
    /// Also write a plain-text dump alongside the binary stream
    #[arg(long)]
    text: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Color,
    TimeParity,
}

/// Flags shared by every subcommand that reads a stream and extracts bits.
#[derive(Args)]
struct ExtractionOpts {
    /// Input tag-stream file
    #[arg(long)]
    stream: PathBuf,
    /// Bit extraction scheme
    #[arg(long, value_enum, default_value = "color")]
    scheme: SchemeArg,
    /// Timestamp digit period in seconds (time-parity scheme)
    #[arg(long, default_value_t = 1e-6)]
    digit_period_s: f64,
    /// Drop events closer than this to the previous event on either channel
    #[arg(long)]
    filter_window_ns: Option<f64>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    opts: ExtractionOpts,
    /// Imbalance window size in bits
    #[arg(long, default_value_t = bits::DEFAULT_IMBALANCE_WINDOW)]
    window: usize,
    /// JSON report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeMiArgs {
    #[command(flatten)]
    opts: ExtractionOpts,
    /// Largest history depth m to analyze
    #[arg(long, default_value_t = mi::DEFAULT_MAX_LOOKBACK)]
    max_lookback: u32,
    /// Number of surrogate streams per depth
    #[arg(long, default_value_t = mi::DEFAULT_SURROGATE_COUNT)]
    surrogates: usize,
    /// Master seed for the surrogate generator
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bin width for the Poisson variance check, in seconds
    #[arg(long, default_value_t = 0.1)]
    fano_bin_s: f64,
    /// JSON report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidityArgs {
    /// Scenario config describing source rates, noise, and crosstalk
    #[arg(long)]
    config: PathBuf,
    /// JSON report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Observation catalog (bundled quasar catalog when omitted)
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Optionally predict the count rate at this V magnitude
    #[arg(long)]
    predict: Option<f64>,
    /// JSON report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EraserArgs {
    #[command(flatten)]
    opts: ExtractionOpts,
    /// Number of evenly spaced phase points over one period
    #[arg(long, default_value_t = 16)]
    phases: usize,
    /// Trials per phase point
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Seed for the outcome sampler (basis choices come from the bitstream)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportNistArgs {
    #[command(flatten)]
    opts: ExtractionOpts,
    /// Output text file of '0'/'1' characters, wrapped at 80 per line
    #[arg(long)]
    out: PathBuf,
}

/// Provenance block embedded in every output.
#[derive(Debug, Clone, Serialize)]
struct RunManifest {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    subcommand: String,
    seed: Option<u64>,
    /// Digest of the canonical re-serialization of the parsed config, so
    /// formatting-only edits do not change it.
    config_digest: Option<String>,
    input_digests: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "arng",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed: None,
            config_digest: None,
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn with_input(mut self, path: &Path, bytes: &[u8]) -> Self {
        self.input_digests
            .insert(path.display().to_string(), sha256_hex(bytes));
        self
    }

    fn with_output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }
}

#[derive(Serialize)]
struct Report<T: Serialize> {
    schema_version: u32,
    manifest: RunManifest,
    report: T,
}

enum CliError {
    Config(String),
    Data(String),
}

impl From<ArngError> for CliError {
    fn from(e: ArngError) -> Self {
        match e {
            ArngError::Config { .. } | ArngError::InvalidInput(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Extract(a) => cmd_extract(a),
        Command::AnalyzeMi(a) => cmd_analyze_mi(a),
        Command::Validity(a) => cmd_validity(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Eraser(a) => cmd_eraser(a),
        Command::ExportNist(a) => cmd_export_nist(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("data error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_config(path: &Path) -> Result<(ScenarioConfig, String), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: ScenarioConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    config.validate()?;
    // canonical re-serialization keeps the digest independent of input
    // formatting and key order
    let canonical = serde_json::to_string(&config).expect("config serializes");
    Ok((config, sha256_hex(canonical.as_bytes())))
}

fn load_stream(opts: &ExtractionOpts) -> Result<(TagStream, RunManifest), CliError> {
    let bytes = fs::read(&opts.stream)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", opts.stream.display())))?;
    let mut stream = tagfile::decode(&bytes)?;
    if let Some(window_ns) = opts.filter_window_ns {
        if window_ns < 0.0 {
            return Err(CliError::Config("filter window must be >= 0".into()));
        }
        stream = cross_channel_deadtime_filter(&stream, window_ns * 1e-9);
    }
    let manifest = RunManifest::new("").with_input(&opts.stream, &bytes);
    Ok((stream, manifest))
}

fn extract_bits(stream: &TagStream, opts: &ExtractionOpts) -> Result<BitStream, CliError> {
    Ok(match opts.scheme {
        SchemeArg::Color => bits::bits_from_color(stream),
        SchemeArg::TimeParity => bits::bits_from_time_parity(stream, opts.digit_period_s)?,
    })
}

fn emit<T: Serialize>(out: Option<&Path>, report: Report<T>) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    match out {
        Some(path) => fs::write(path, json)?,
        None => print!("{json}"),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (config, digest) = load_config(&args.config)?;
    let stream = simulate(&config)?;
    tagfile::write_stream(&args.out, &stream)?;
    let mut manifest = RunManifest::new("simulate").with_output(&args.out);
    manifest.seed = Some(config.run.seed);
    manifest.config_digest = Some(digest);
    if let Some(text_path) = &args.text {
        tagfile::write_text(text_path, &stream)?;
        manifest = manifest.with_output(text_path);
    }
    #[derive(Serialize)]
    struct SimSummary {
        events: usize,
        blue: usize,
        red: usize,
        duration_s: f64,
        clock_tick_fs: u64,
    }
    let summary = SimSummary {
        events: stream.events.len(),
        blue: stream.channel_count(arng::stream::Channel::Blue),
        red: stream.channel_count(arng::stream::Channel::Red),
        duration_s: config.run.duration_s,
        clock_tick_fs: stream.clock_tick_fs,
    };
    // binary output cannot embed the manifest, so it rides sidecar
    let manifest_path = sidecar_manifest_path(&args.out);
    emit(
        Some(&manifest_path),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report: summary,
        },
    )
}

fn sidecar_manifest_path(stream_path: &Path) -> PathBuf {
    let mut name = stream_path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    stream_path.with_file_name(name)
}

fn cmd_extract(args: ExtractArgs) -> Result<(), CliError> {
    let (stream, mut manifest) = load_stream(&args.opts)?;
    manifest.subcommand = "extract".into();
    let bits = extract_bits(&stream, &args.opts)?;
    let imbalance = bits::imbalance_report(&bits, args.window)?;
    #[derive(Serialize)]
    struct ExtractReport {
        scheme: BitScheme,
        metadata: String,
        bits: usize,
        imbalance: bits::ImbalanceReport,
    }
    if let Some(out) = &args.out {
        manifest = manifest.with_output(out);
    }
    emit(
        args.out.as_deref(),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report: ExtractReport {
                scheme: bits.scheme,
                metadata: bits.metadata.clone(),
                bits: bits.len(),
                imbalance,
            },
        },
    )
}

fn cmd_analyze_mi(args: AnalyzeMiArgs) -> Result<(), CliError> {
    let (stream, mut manifest) = load_stream(&args.opts)?;
    manifest.subcommand = "analyze-mi".into();
    manifest.seed = Some(args.seed);
    let bits = extract_bits(&stream, &args.opts)?;
    let mi_report = mi::mi_report(&bits, args.max_lookback, args.surrogates, args.seed)?;
    let poisson = mi::poisson_variance_check(&stream, args.fano_bin_s).ok();
    #[derive(Serialize)]
    struct AnalyzeReport {
        scheme: BitScheme,
        bits: usize,
        ones_fraction: f64,
        mi: mi::MiReport,
        poisson: Option<mi::PoissonCheck>,
    }
    if let Some(out) = &args.out {
        manifest = manifest.with_output(out);
    }
    emit(
        args.out.as_deref(),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report: AnalyzeReport {
                scheme: bits.scheme,
                bits: bits.len(),
                ones_fraction: bits.ones_fraction(),
                mi: mi_report,
                poisson,
            },
        },
    )
}

fn cmd_validity(args: ValidityArgs) -> Result<(), CliError> {
    let (config, digest) = load_config(&args.config)?;
    let noise_blue = config.rates.skyglow_blue + config.rates.dark_blue;
    let noise_red = config.rates.skyglow_red + config.rates.dark_red;
    let (r_blue, r_red) = validity::mix_rates(
        config.rates.s_blue,
        config.rates.s_red,
        noise_blue,
        noise_red,
        config.crosstalk,
    );
    let det = DetectorObservation {
        blue: ArmObservation::new(r_blue, noise_blue)?,
        red: ArmObservation::new(r_red, noise_red)?,
        crosstalk: config.crosstalk,
    };
    let budget = validity::detector_budget(&det)?;
    // two identical stations bound the symmetric experiment
    let bell = validity::bell_budget(budget.q_detector, budget.q_detector)?;
    let mut manifest = RunManifest::new("validity");
    manifest.config_digest = Some(digest);
    #[derive(Serialize)]
    struct ValidityReport {
        observed_blue: f64,
        observed_red: f64,
        budget: validity::ValidityBudget,
        bell: validity::BellBudget,
        q_threshold: f64,
    }
    if let Some(out) = &args.out {
        manifest = manifest.with_output(out);
    }
    emit(
        args.out.as_deref(),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report: ValidityReport {
                observed_blue: r_blue,
                observed_red: r_red,
                budget,
                bell,
                q_threshold: validity::q_threshold(),
            },
        },
    )
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("calibrate");
    let observations = match &args.catalog {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            manifest = manifest.with_input(path, text.as_bytes());
            calibration::parse_catalog(&text)?
        }
        None => calibration::bundled_quasar_catalog(),
    };
    let fit = calibration::fit_magnitude_rate(&observations)?;
    #[derive(Serialize)]
    struct CalibrateReport {
        fit: calibration::RateFit,
        sources: usize,
        predicted_rate: Option<f64>,
        predicted_at_magnitude: Option<f64>,
    }
    let report = CalibrateReport {
        fit,
        sources: observations.len(),
        predicted_rate: args.predict.map(|m| calibration::predict_rate(&fit, m)),
        predicted_at_magnitude: args.predict,
    };
    if let Some(out) = &args.out {
        manifest = manifest.with_output(out);
    }
    emit(
        args.out.as_deref(),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report,
        },
    )
}

fn cmd_eraser(args: EraserArgs) -> Result<(), CliError> {
    let (stream, mut manifest) = load_stream(&args.opts)?;
    manifest.subcommand = "eraser".into();
    manifest.seed = Some(args.seed);
    let bits = extract_bits(&stream, &args.opts)?;
    if args.phases == 0 {
        return Err(CliError::Config("need at least one phase point".into()));
    }
    let phases: Vec<f64> = (0..args.phases)
        .map(|i| i as f64 * std::f64::consts::TAU / args.phases as f64)
        .collect();
    let report = eraser::simulate_eraser(&bits, &phases, args.trials, args.seed)?;
    if let Some(out) = &args.out {
        manifest = manifest.with_output(out);
    }
    emit(
        args.out.as_deref(),
        Report {
            schema_version: SCHEMA_VERSION,
            manifest,
            report,
        },
    )
}

fn cmd_export_nist(args: ExportNistArgs) -> Result<(), CliError> {
    let (stream, _) = load_stream(&args.opts)?;
    let bits = extract_bits(&stream, &args.opts)?;
    let mut text = String::with_capacity(bits.len() + bits.len() / 80 + 1);
    for (i, &b) in bits.bits.iter().enumerate() {
        text.push(if b == 0 { '0' } else { '1' });
        if (i + 1) % 80 == 0 {
            text.push('\n');
        }
    }
    if !text.ends_with('\n') && !text.is_empty() {
        text.push('\n');
    }
    fs::write(&args.out, text)?;
    Ok(())
}

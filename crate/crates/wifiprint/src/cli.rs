//! Command-line surface tying the pipeline together.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O), 2 usage or format
//! error. Every command is deterministic given its inputs and flags.
//! The env var `WIFIPRINT_CONFIG` may point to a JSON file whose values
//! fill in flags that were not given explicitly.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::evaluator::{self, EvalError, EvaluationConfig, EvaluationReport, ReferenceDatabase};
use crate::features::{extract_samples, ParameterKind};
use crate::ingest::{self, IngestError, IngestOptions};
use crate::matcher::{self, Threshold};
use crate::signature::BinningScheme;
use crate::synthgen::Scenario;
use crate::trace::{parse_canonical, write_canonical, CanonicalTrace};

/// Passive 802.11 device fingerprinting toolkit.
#[derive(Parser)]
#[command(name = "wifiprint", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a pcap capture (radiotap or Prism) into a canonical trace.
    Convert {
        pcap: PathBuf,
        out: PathBuf,
        /// Keep frames that failed the FCS check.
        #[arg(long)]
        keep_bad_fcs: bool,
    },
    /// Build a reference signature database from a trace.
    Learn {
        trace: PathBuf,
        db_out: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Match every device per detection window against a database.
    Match {
        trace: PathBuf,
        db: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
        /// Rejection threshold for printing `unknown`.
        #[arg(long)]
        threshold: Option<f64>,
        /// Also print the full similarity vectors.
        #[arg(long)]
        verbose: bool,
    },
    /// Split, learn and sweep thresholds over one trace; write report CSV.
    Evaluate {
        trace: PathBuf,
        report_out: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Generate a synthetic trace from a scenario file.
    Synth {
        scenario: PathBuf,
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Dump per-frame parameter samples as CSV (device,ftype,kind,value).
    Dump {
        trace: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Network parameter to fingerprint with.
    #[arg(long, value_parser = parse_param)]
    param: Option<ParameterKind>,
    /// Minimum observations per signature.
    #[arg(long)]
    min_obs: Option<u64>,
    /// Reference (learning) duration, seconds.
    #[arg(long)]
    ref_duration: Option<u64>,
    /// Detection window, seconds.
    #[arg(long)]
    window: Option<u64>,
    /// Number of evenly spaced thresholds to sweep.
    #[arg(long)]
    sweep: Option<usize>,
    /// File with custom bin edges (one number per line, `#` comments).
    #[arg(long)]
    bins: Option<PathBuf>,
}

fn parse_param(s: &str) -> Result<ParameterKind, String> {
    s.parse().map_err(|e| format!("{e}"))
}

/// Optional JSON config merged under explicit flags.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    param: Option<ParameterKind>,
    min_obs: Option<u64>,
    ref_duration_s: Option<u64>,
    window_s: Option<u64>,
    sweep: Option<usize>,
    keep_bad_fcs: Option<bool>,
    bins: Option<PathBuf>,
}

/// Fully resolved settings: flag > config file > default.
struct Settings {
    param: ParameterKind,
    min_obs: u64,
    ref_duration_us: u64,
    window_us: u64,
    sweep: usize,
    bins: Option<PathBuf>,
}

impl Settings {
    fn resolve(opts: &CommonOpts, file: &FileConfig) -> Settings {
        Settings {
            param: opts
                .param
                .or(file.param)
                .unwrap_or(ParameterKind::InterArrivalTime),
            min_obs: opts.min_obs.or(file.min_obs).unwrap_or(50),
            ref_duration_us: opts
                .ref_duration
                .or(file.ref_duration_s)
                .unwrap_or(3600)
                .saturating_mul(1_000_000),
            window_us: opts
                .window
                .or(file.window_s)
                .unwrap_or(300)
                .saturating_mul(1_000_000),
            sweep: opts.sweep.or(file.sweep).unwrap_or(1001),
            bins: opts.bins.clone().or_else(|| file.bins.clone()),
        }
    }

    fn scheme(&self) -> Result<BinningScheme, CliError> {
        match &self.bins {
            None => Ok(BinningScheme::default_for(self.param)),
            Some(path) => {
                let edges = read_edges_file(path)?;
                BinningScheme::new(self.param, edges)
                    .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
            }
        }
    }

    fn sweep_values(&self) -> Vec<f64> {
        match self.sweep {
            0 | 1 => vec![0.5],
            n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
        }
    }

    fn eval_config(&self) -> EvaluationConfig {
        EvaluationConfig {
            ref_duration_us: self.ref_duration_us,
            window_us: self.window_us,
            min_obs: self.min_obs,
            sweep: self.sweep_values(),
        }
    }
}

fn read_edges_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::usage(format!(
                "{}:{}: not a number: {line:?}",
                path.display(),
                i + 1
            ))
        })?;
        edges.push(v);
    }
    Ok(edges)
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::usage(e.to_string())
    }
}

/// Entry point for the thin binary.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wifiprint: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = load_file_config()?;
    match cli.command {
        Command::Convert {
            pcap,
            out,
            keep_bad_fcs,
        } => cmd_convert(
            &pcap,
            &out,
            keep_bad_fcs || file_config.keep_bad_fcs.unwrap_or(false),
        ),
        Command::Learn {
            trace,
            db_out,
            opts,
        } => cmd_learn(&trace, &db_out, &Settings::resolve(&opts, &file_config)),
        Command::Match {
            trace,
            db,
            opts,
            threshold,
            verbose,
        } => cmd_match(
            &trace,
            &db,
            &Settings::resolve(&opts, &file_config),
            threshold.unwrap_or(0.0),
            verbose,
            &opts,
        ),
        Command::Evaluate {
            trace,
            report_out,
            opts,
        } => cmd_evaluate(&trace, &report_out, &Settings::resolve(&opts, &file_config)),
        Command::Synth {
            scenario,
            out,
            seed,
        } => cmd_synth(&scenario, &out, seed),
        Command::Dump { trace, opts } => cmd_dump(&trace, &Settings::resolve(&opts, &file_config)),
    }
}

fn load_file_config() -> Result<FileConfig, CliError> {
    let Some(path) = std::env::var_os("WIFIPRINT_CONFIG") else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::runtime(format!(
            "WIFIPRINT_CONFIG {}: {e}",
            Path::new(&path).display()
        ))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::usage(format!(
            "WIFIPRINT_CONFIG {}: {e}",
            Path::new(&path).display()
        ))
    })
}

fn load_trace(path: &Path) -> Result<CanonicalTrace, CliError> {
    let file =
        fs::File::open(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    parse_canonical(BufReader::new(file))
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn save_trace(trace: &CanonicalTrace, path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    write_canonical(trace, &mut writer)
        .and_then(|()| writer.flush())
        .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn cmd_convert(pcap_path: &Path, out_path: &Path, keep_bad_fcs: bool) -> Result<(), CliError> {
    let file = fs::File::open(pcap_path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", pcap_path.display())))?;
    let options = IngestOptions { keep_bad_fcs };
    let decode = ingest::read_pcap(BufReader::new(file), &options).map_err(|e| match e {
        IngestError::Io(io) => CliError::runtime(format!("{}: {io}", pcap_path.display())),
        other => CliError::usage(format!("{}: {other}", pcap_path.display())),
    })?;
    save_trace(&decode.trace, out_path)?;
    let c = decode.counters;
    println!(
        "decoded={} skipped_bad_fcs={} skipped_truncated={} skipped_out_of_order={} short_mac_headers={}",
        c.decoded, c.skipped_bad_fcs, c.skipped_truncated, c.skipped_out_of_order, c.short_mac_headers
    );
    Ok(())
}

fn cmd_learn(trace_path: &Path, db_out: &Path, settings: &Settings) -> Result<(), CliError> {
    let trace = load_trace(trace_path)?;
    let scheme = settings.scheme()?;
    let db = ReferenceDatabase::build(&trace, &scheme, settings.min_obs)?;
    if db.is_empty() {
        eprintln!(
            "warning: no device reached {} observations; database is empty",
            settings.min_obs
        );
    }
    fs::write(db_out, db.to_json())
        .map_err(|e| CliError::runtime(format!("{}: {e}", db_out.display())))?;
    println!("devices: {}", db.len());
    Ok(())
}

fn cmd_match(
    trace_path: &Path,
    db_path: &Path,
    settings: &Settings,
    threshold: f64,
    verbose: bool,
    explicit: &CommonOpts,
) -> Result<(), CliError> {
    let db_text = fs::read_to_string(db_path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", db_path.display())))?;
    let db = ReferenceDatabase::from_json(&db_text)
        .map_err(|e| CliError::usage(format!("{}: {e}", db_path.display())))?;
    if db.is_empty() {
        return Err(CliError::usage(format!(
            "{}: reference database is empty",
            db_path.display()
        )));
    }
    // candidates are always binned with the database's scheme; explicit
    // conflicting flags are an error rather than silently ignored
    if let Some(param) = explicit.param {
        if param != db.kind() {
            return Err(CliError::usage(format!(
                "signatures not comparable: database holds {} but --param asks for {param}",
                db.kind()
            )));
        }
    }
    if explicit.bins.is_some() {
        let requested = settings.scheme()?;
        if requested.scheme_id() != db.scheme().scheme_id() {
            return Err(CliError::usage(
                "signatures not comparable: --bins scheme differs from the database's".to_string(),
            ));
        }
    }
    let threshold = Threshold::new(threshold).map_err(|e| CliError::usage(e.to_string()))?;

    let trace = load_trace(trace_path)?;
    let windows = evaluator::partition_windows(&trace, settings.window_us)?;
    let candidates = evaluator::window_candidates(&windows, &db, settings.min_obs)?;

    to_stdout(|out| {
        writeln!(out, "window,candidate_mac,best_ref_mac,best_sim")?;
        for cand in &candidates {
            let best = matcher::identify(&cand.sims, threshold);
            let best_sim = cand
                .sims
                .entries
                .iter()
                .map(|(_, s)| *s)
                .fold(0.0f64, f64::max);
            writeln!(
                out,
                "{},{},{},{}",
                cand.window,
                cand.device,
                best.map_or_else(|| "unknown".to_string(), |id| id.to_string()),
                best_sim
            )?;
            if verbose {
                for (ref_id, sim) in &cand.sims.entries {
                    writeln!(
                        out,
                        "#sim,{},{},{},{}",
                        cand.window, cand.device, ref_id, sim
                    )?;
                }
            }
        }
        Ok(())
    })
}

/// Streams command output, treating a closed stdout (piping into `head`)
/// as a normal early exit rather than an error.
fn to_stdout(write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match write(&mut out).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::runtime(e.to_string())),
    }
}

fn cmd_evaluate(trace_path: &Path, report_out: &Path, settings: &Settings) -> Result<(), CliError> {
    let trace = load_trace(trace_path)?;
    let scheme = settings.scheme()?;
    let report = evaluator::evaluate(&trace, &settings.eval_config(), &scheme)?;
    fs::write(report_out, evaluator::report_csv(&report))
        .map_err(|e| CliError::runtime(format!("{}: {e}", report_out.display())))?;
    print_report_summary(&report);
    Ok(())
}

fn print_report_summary(report: &EvaluationReport) {
    println!("AUC: {}", report.auc);
    for target in [0.01, 0.1] {
        if let Some(p) = report.point_nearest_id_fpr(target) {
            println!(
                "near id_fpr {target}: T={} id_ratio={} id_fpr={}",
                p.threshold, p.id_ratio, p.id_fpr
            );
        }
    }
    println!(
        "windows={} candidates={} known={}",
        report.windows, report.candidates, report.known_candidates
    );
}

fn cmd_synth(scenario_path: &Path, out_path: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| CliError::runtime(format!("{}: {e}", scenario_path.display())))?;
    let mut scenario = Scenario::from_json(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", scenario_path.display())))?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let trace = scenario.generate();
    save_trace(&trace, out_path)?;
    println!(
        "frames: {} span_us: {}",
        trace.len(),
        trace.end_us().unwrap_or(0)
    );
    Ok(())
}

fn cmd_dump(trace_path: &Path, settings: &Settings) -> Result<(), CliError> {
    let trace = load_trace(trace_path)?;
    let extraction = extract_samples(&trace, settings.param);
    to_stdout(|out| {
        writeln!(out, "device,ftype,kind,value")?;
        for ((device, ftype), set) in &extraction.sets {
            for v in &set.values {
                writeln!(out, "{},{},{},{}", device, ftype, extraction.kind, v)?;
            }
        }
        Ok(())
    })
}

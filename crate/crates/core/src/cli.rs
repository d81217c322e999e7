//! Command-line front end: configuration, campaign dispatch and result files.
//!
//! Exit codes: 0 success, 1 configuration error (bad flag, file or key),
//! 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amc::BackoffTable;
use crate::channel::{sample_conditional, sample_estimate, ChannelMatrix, CsitModel};
use crate::modem::QamAlphabet;
use crate::polar::{Crc, PolarCode, SATURATION};
use crate::precoder::{PrecoderMatrix, RateAllocation};
use crate::sim::{
    calibrate_backoff, run_campaign, shannon_bounds, BoundPoint, CalibrationOptions, CampaignConfig,
    CampaignResult, Execution,
};
use crate::transceiver::{
    propagate_noiseless, receive_sic, transmit, BlockPlan, CodeCache, LinkParams, SplitMessage,
};
use crate::{Error, Result, Scheme, StreamId};

/// Overrides the built-in default seed; config files and `--seed` take precedence.
pub const SEED_ENV: &str = "RSMA_SEED";

#[derive(Debug, Parser)]
#[command(name = "rsma-lls", version, about = "Link-level simulator for two-user MISO rate splitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full campaign: throughput, per-stream throughput, BLER and ESR bound.
    Run(RunArgs),
    /// Generate a back-off table.
    Calibrate(CalibrateArgs),
    /// Ergodic sum-rate curves only (no codec).
    Bounds(RunArgs),
    /// Quick invariant checks, including noiseless round-trips for every scheme.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Campaign settings shared by all campaign subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CampaignArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated schemes (rsma, sdma, noma).
    #[arg(long, value_delimiter = ',')]
    pub scheme: Option<Vec<String>>,
    /// SNR grid in dB as start:step:stop, or a single value.
    #[arg(long)]
    pub snr: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-user QoS rate in bps/Hz.
    #[arg(long)]
    pub qos: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub saa_samples: Option<usize>,
    /// Back-off table (CSV).
    #[arg(long)]
    pub backoff: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; standard output if omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Where to write the back-off table (CSV).
    #[arg(long, short)]
    pub output: PathBuf,
    /// BLER target per stream.
    #[arg(long, default_value_t = 0.1)]
    pub target: f64,
    /// Candidate back-offs in dB as start:step:stop.
    #[arg(long, default_value = "0:0.5:10")]
    pub grid: String,
}

/// Fully resolved campaign invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub config: CampaignConfig,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub verbosity: u8,
    pub threads: Option<usize>,
}

impl RunSpec {
    pub fn execution(&self) -> Execution {
        match self.threads {
            Some(1) => Execution::Sequential,
            _ => Execution::Parallel,
        }
    }
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses `start:step:stop` (inclusive) or a single number.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| -> Result<f64> {
        p.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| config_error(format!("`snr`: `{p}` is not a number")))
    };
    match parts.as_slice() {
        [one] => Ok(vec![num(one)?]),
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if !(step > 0.0) || stop < start {
                return Err(config_error(format!("`snr`: `{s}` needs step > 0 and stop ≥ start")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // round away accumulation noise so 5:5:35 gives exact grid values
            Ok((0..n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect())
        }
        _ => Err(config_error(format!("`snr`: expected start:step:stop, got `{s}`"))),
    }
}

pub fn parse_schemes(list: &[String]) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for s in list {
        let scheme: Scheme = s.parse()?;
        if !out.contains(&scheme) {
            out.push(scheme);
        }
    }
    Ok(out)
}

/// Loads a TOML config; unknown keys and type errors name the offending key.
pub fn load_config(path: &Path) -> Result<CampaignConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read `{}`: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<CampaignConfig> {
    toml::from_str(text).map_err(|e| config_error(e.to_string().trim_end().to_string()))
}

/// Resolves defaults, seed environment, config file and flags (later wins).
pub fn resolve_config(args: &CampaignArgs, seed_env: Option<&str>) -> Result<CampaignConfig> {
    let mut cfg = CampaignConfig::default();
    if let Some(v) = seed_env {
        cfg.seed = v.trim().parse().map_err(|_| config_error(format!("`{SEED_ENV}`: `{v}` is not a seed")))?;
    }
    if let Some(path) = &args.config {
        let env_seed = cfg.seed;
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read `{}`: {e}", path.display())))?;
        cfg = parse_config_str(&text)?;
        if !text_sets_key(&text, "seed") {
            cfg.seed = env_seed;
        }
    }
    if let Some(list) = &args.scheme {
        cfg.schemes = parse_schemes(list)?;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_db = parse_snr_range(snr)?;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(q) = args.qos {
        cfg.qos_rate = q;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.saa_samples {
        cfg.saa_samples = m;
    }
    if let Some(b) = &args.backoff {
        cfg.backoff_table = Some(b.clone());
    }
    if args.threads == Some(0) {
        return Err(config_error("`threads`: must be at least 1"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn text_sets_key(text: &str, key: &str) -> bool {
    toml::from_str::<toml::Table>(text).is_ok_and(|t| t.contains_key(key))
}

pub fn parse_run_spec(args: &RunArgs, seed_env: Option<&str>) -> Result<RunSpec> {
    Ok(RunSpec {
        config: resolve_config(&args.campaign, seed_env)?,
        output: args.output.clone(),
        format: args.format,
        verbosity: args.campaign.verbose,
        threads: args.campaign.threads,
    })
}

fn load_backoff(cfg: &CampaignConfig) -> Result<BackoffTable> {
    match &cfg.backoff_table {
        Some(path) => BackoffTable::load(path)
            .map_err(|e| config_error(format!("back-off table `{}`: {e}", path.display()))),
        None => Ok(BackoffTable::new()),
    }
}

/// One output row per (scheme, SNR point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub throughput_bps_hz: f64,
    pub esr_bound: f64,
    pub tp_common: f64,
    pub tp_private1: f64,
    pub tp_private2: f64,
    pub bler_common: Option<f64>,
    pub bler_p1: Option<f64>,
    pub bler_p2: Option<f64>,
    pub infeasible_count: usize,
}

pub fn result_rows(result: &CampaignResult) -> Vec<ResultRow> {
    result
        .points
        .iter()
        .map(|p| {
            let tp = p.stream_throughput();
            ResultRow {
                scheme: p.scheme,
                snr_db: p.snr_db,
                throughput_bps_hz: p.throughput(),
                esr_bound: p.esr(),
                tp_common: tp[0],
                tp_private1: tp[1],
                tp_private2: tp[2],
                bler_common: p.bler(StreamId::Common),
                bler_p1: p.bler(StreamId::Private1),
                bler_p2: p.bler(StreamId::Private2),
                infeasible_count: p.infeasible_count(),
            }
        })
        .collect()
}

/// Row of the `bounds` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub esr_bound: f64,
    pub esr_se: f64,
    pub infeasible_count: usize,
}

impl From<&BoundPoint> for BoundRow {
    fn from(b: &BoundPoint) -> Self {
        Self { scheme: b.scheme, snr_db: b.snr_db, esr_bound: b.esr, esr_se: b.se, infeasible_count: b.infeasible_count }
    }
}

/// Serializes rows as CSV (header + one line per row) or a JSON array.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], format: Format, mut w: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    Ok(())
}

fn emit<T: Serialize>(rows: &[T], format: Format, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| Error::Domain(format!("cannot write `{}`: {e}", path.display())))?;
            write_rows(rows, format, std::io::BufWriter::new(file))
        }
        None => write_rows(rows, format, std::io::stdout().lock()),
    }
}

fn configure_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads.filter(|&n| n > 1) {
        // a second initialization in the same process is harmless to ignore
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

pub fn cmd_run(spec: &RunSpec) -> Result<CampaignResult> {
    let table = load_backoff(&spec.config)?;
    log::info!(
        "running {} trial(s) at {} SNR point(s) for {:?}",
        spec.config.trials,
        spec.config.snr_db.len(),
        spec.config.schemes
    );
    let result = run_campaign(&spec.config, &table, spec.execution())?;
    emit(&result_rows(&result), spec.format, spec.output.as_deref())?;
    Ok(result)
}

pub fn cmd_bounds(spec: &RunSpec) -> Result<Vec<BoundPoint>> {
    let bounds = shannon_bounds(&spec.config, spec.execution())?;
    let rows: Vec<BoundRow> = bounds.iter().map(BoundRow::from).collect();
    emit(&rows, spec.format, spec.output.as_deref())?;
    Ok(bounds)
}

pub fn cmd_calibrate(args: &CalibrateArgs, seed_env: Option<&str>) -> Result<BackoffTable> {
    let cfg = resolve_config(&args.campaign, seed_env)?;
    if !(args.target > 0.0 && args.target <= 1.0) {
        return Err(config_error("`target`: must lie in (0, 1]"));
    }
    let grid = parse_snr_range(&args.grid).map_err(|_| config_error(format!("`grid`: cannot parse `{}`", args.grid)))?;
    if grid.iter().any(|&g| g < 0.0) {
        return Err(config_error("`grid`: back-offs must be non-negative"));
    }
    let opts = CalibrationOptions { grid, target_bler: args.target, ..CalibrationOptions::default() };
    let exec = if args.campaign.threads == Some(1) { Execution::Sequential } else { Execution::Parallel };
    let cal = calibrate_backoff(&cfg, &opts, exec)?;
    for e in &cal.entries {
        let flag = if e.flagged.is_empty() { String::new() } else { format!("  (target missed: {:?})", e.flagged) };
        log::info!(
            "{} {:>5.1} dB: common {:.1} dB, private {:.1} dB, throughput {:.3}{flag}",
            e.scheme,
            e.snr_db,
            e.backoff.common_db,
            e.backoff.private_db,
            e.throughput
        );
    }
    cal.table
        .save(&args.output)
        .map_err(|e| Error::Domain(format!("cannot write `{}`: {e}", args.output.display())))?;
    Ok(cal.table)
}

/// Outcome of one self-test check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

fn noiseless_round_trip(scheme: Scheme, alphabet: QamAlphabet, cache: &CodeCache) -> Result<bool> {
    let c = |re: f64| Complex64::new(re, 0.0);
    let h = ChannelMatrix::from_columns(&[vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]])?;
    // common stream far above both private streams so SIC is exact without noise
    let p = PrecoderMatrix::new(vec![c(3e3), c(3e3)], vec![c(1e2), c(0.0)], vec![c(0.0), c(1e2)]);
    let r = alphabet.bits_per_symbol() as f64 * 0.9;
    let rates = match scheme {
        Scheme::Rsma => RateAllocation { common_rates: [r; 2], private_rates: [r; 2], common_shares: [r / 2.0; 2] },
        Scheme::Sdma => RateAllocation { common_rates: [0.0; 2], private_rates: [r; 2], common_shares: [0.0; 2] },
        Scheme::Noma => RateAllocation { common_rates: [r; 2], private_rates: [r, 0.0], common_shares: [0.0, r] },
    };
    let plan = BlockPlan::new(&p, &rates, &LinkParams::default(), [1, 2, 3], cache)?;
    let mut rng = ChaCha8Rng::seed_from_u64(alphabet.order() as u64);
    let msg = SplitMessage::random(&plan, &mut rng);
    let block = transmit(&msg, &plan)?;
    for k in 0..2 {
        let y = propagate_noiseless(&block, h.column(k));
        let out = receive_sic(&y, h.column(k), k, &plan)?;
        let common_ok = plan.stream(StreamId::Common).is_none()
            || out.common.as_ref().is_some_and(|d| d.crc_ok && d.info == msg.common_payload());
        let private_ok = plan.stream(StreamId::private(k)).is_none()
            || out.private.as_ref().is_some_and(|d| d.crc_ok && d.info == msg.private[k]);
        if !(common_ok && private_ok) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fast invariant suite behind the `selftest` subcommand.
pub fn selftest() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut check = |name: String, passed: bool| checks.push(Check { name, passed });

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let est = sample_estimate(2, 2, &mut rng);
    let set = sample_conditional(&est, CsitModel::new(100.0, 0.6)?, &mut rng);
    check("channel reconstruction identity".into(), set.reconstruction_residual() < 1e-12);

    let crc = Crc::CRC11;
    let bits: Vec<u8> = (0..40).map(|i| (i * 7 % 3 == 0) as u8).collect();
    let framed = crc.attach(&bits);
    let mut flipped = framed.clone();
    flipped[5] ^= 1;
    check("crc detects a flipped bit".into(), crc.check(&framed) && !crc.check(&flipped));

    let code = PolarCode::new(200, 100, crc, 2.0)?;
    let payload: Vec<u8> = (0..code.payload_len()).map(|i| (i % 5 == 1) as u8).collect();
    let llrs: Vec<f64> = code.encode(&payload)?.iter().map(|&b| if b == 0 { SATURATION } else { -SATURATION }).collect();
    let d = code.decode(&llrs, 8)?;
    check("shortened polar round-trip".into(), d.crc_ok && d.info == payload);

    let cache = CodeCache::new();
    for scheme in Scheme::ALL {
        for alphabet in QamAlphabet::ALL {
            let ok = noiseless_round_trip(scheme, alphabet, &cache)?;
            check(format!("noiseless round-trip {scheme} {alphabet}"), ok);
        }
    }
    Ok(checks)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

/// Parses `args` and runs the chosen subcommand.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let seed_env = std::env::var(SEED_ENV).ok();
    let outcome = match &cli.command {
        Command::Run(args) => parse_run_spec(args, seed_env.as_deref()).and_then(|spec| {
            init_logging(spec.verbosity);
            configure_threads(spec.threads);
            cmd_run(&spec).map(|_| ())
        }),
        Command::Bounds(args) => parse_run_spec(args, seed_env.as_deref()).and_then(|spec| {
            init_logging(spec.verbosity);
            configure_threads(spec.threads);
            cmd_bounds(&spec).map(|_| ())
        }),
        Command::Calibrate(args) => {
            init_logging(args.campaign.verbose);
            configure_threads(args.campaign.threads);
            cmd_calibrate(args, seed_env.as_deref()).map(|_| ())
        }
        Command::Selftest => selftest().and_then(|checks| {
            let mut failed = 0;
            for c in &checks {
                println!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name);
                failed += !c.passed as usize;
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{failed} self-test check(s) failed")))
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

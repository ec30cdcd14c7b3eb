use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use servesim_core::live::{serve_with, ServeOptions};
use servesim_core::metrics::{aggregate, export_dynamics, read_outcomes, SimReport};
use servesim_core::oracle::{policy_vs_oracle, IlpInstance};
use servesim_core::policy::PolicyKind;
use servesim_core::profile::{
    load_catalog, memory_footprint, Catalog, MemorySpec, DEFAULT_BUCKET_COUNT,
};
use servesim_core::sim::{parse_faults, run, SimConfig};
use servesim_core::sweep::{rows_to_csv, run_sweep, SweepSpec};
use servesim_core::tracegen::{generate, Trace, TraceSpec, DEFAULT_SLO_US};

/// Exit status for a diverged run under `--strict`.
const EXIT_DIVERGED: u8 = 3;
/// Exit status for bad input: flags, config files, traces, profiles.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "servesim",
    version,
    about = "SLO-aware serving scheduler simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded arrival trace as JSON lines.
    GenTrace(GenTraceArgs),
    /// Run a trace through the discrete-event simulator.
    Simulate(RunArgs),
    /// Replay a trace in real time against threaded mock workers.
    Serve(ServeArgs),
    /// Compare a policy with the exact optimum on a tiny instance.
    Oracle(OracleArgs),
    /// Run a grid of traces, policies and seeds from a TOML spec.
    Sweep(SweepArgs),
    /// Supernet memory footprint from a TOML spec.
    Memory(MemoryArgs),
    /// Recompute aggregates from an outcomes file.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Bursty,
    #[value(alias = "time_varying")]
    TimeVarying,
    Spikes,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Base rate (bursty, spikes), queries/s.
    #[arg(long, default_value_t = 0.0)]
    lambda_b: f64,
    /// Variant rate (bursty), queries/s.
    #[arg(long, default_value_t = 0.0)]
    lambda_v: f64,
    /// Squared coefficient of variation of inter-arrival gaps.
    #[arg(long, default_value_t = 1.0)]
    cv2: f64,
    /// Start rate (time-varying), queries/s.
    #[arg(long, default_value_t = 0.0)]
    lambda1: f64,
    /// End rate (time-varying), queries/s.
    #[arg(long, default_value_t = 0.0)]
    lambda2: f64,
    /// Acceleration (time-varying), queries/s².
    #[arg(long, default_value_t = f64::INFINITY)]
    tau: f64,
    /// Rate during spikes, queries/s.
    #[arg(long, default_value_t = 0.0)]
    spike_height: f64,
    /// Seconds between spike starts.
    #[arg(long, default_value_t = 15.0)]
    spike_period: f64,
    /// Trace length in seconds.
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = DEFAULT_SLO_US as f64 / 1000.0)]
    slo_ms: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Default)]
struct RunArgs {
    /// `key = value` file with any of the flags below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Profile CSV; the synthetic six-subnet profile when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    actuation_ms: Option<f64>,
    #[arg(long)]
    bucket_count: Option<usize>,
    #[arg(long)]
    dispatch_overhead_us: Option<u64>,
    /// Fault schedule, e.g. `12s:w0,24s:w1`.
    #[arg(long)]
    fault: Option<String>,
    /// report.json path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the 100 ms dynamics timeseries as CSV.
    #[arg(long)]
    dynamics: Option<PathBuf>,
    /// Write per-query outcomes as JSON lines.
    #[arg(long)]
    outcomes: Option<PathBuf>,
    /// Exit with status 3 when the run diverged.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Client lag beyond which the run is flagged invalid.
    #[arg(long, default_value_t = 10.0)]
    max_lag_ms: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "slackfit")]
    policy: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when any cell diverged.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct MemoryArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    outcomes: PathBuf,
    /// Pull every deadline this many microseconds earlier first.
    #[arg(long, default_value_t = 0)]
    tighten_us: u64,
}

/// Keys accepted in a `--config` file for simulate and serve.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunFile {
    trace: Option<PathBuf>,
    profile: Option<PathBuf>,
    policy: Option<String>,
    workers: Option<usize>,
    actuation_ms: Option<f64>,
    bucket_count: Option<usize>,
    dispatch_overhead_us: Option<u64>,
    fault: Option<String>,
    out: Option<PathBuf>,
    dynamics: Option<PathBuf>,
    outcomes: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn catalog(profile: Option<&Path>) -> Result<Catalog> {
    Ok(match profile {
        Some(p) => load_catalog(p)?,
        None => Catalog::synthetic_default(),
    })
}

fn ms_to_us(ms: f64, what: &str) -> Result<u64> {
    if !(ms.is_finite() && ms >= 0.0) {
        bail!("{what} must be a non-negative number of milliseconds");
    }
    Ok((ms * 1000.0).round() as u64)
}

fn gen_trace(a: GenTraceArgs) -> Result<()> {
    let spec = match a.kind {
        Kind::Bursty => TraceSpec::bursty(a.lambda_b, a.lambda_v, a.cv2, a.duration, a.seed),
        Kind::TimeVarying => {
            TraceSpec::time_varying(a.lambda1, a.lambda2, a.tau, a.cv2, a.duration, a.seed)
        }
        Kind::Spikes => TraceSpec::spikes(
            a.lambda_b,
            a.spike_height,
            a.spike_period,
            a.cv2,
            a.duration,
            a.seed,
        ),
    }
    .with_slo_us(ms_to_us(a.slo_ms, "--slo-ms")?);
    let trace = generate(&spec)?;
    emit(a.out.as_deref(), &trace.to_jsonl_string())
}

struct Resolved {
    trace: Trace,
    config: SimConfig,
    out: Option<PathBuf>,
    dynamics: Option<PathBuf>,
    outcomes: Option<PathBuf>,
    strict: bool,
}

/// Merges the config file (if any) under the flags and loads the inputs.
fn resolve(a: RunArgs) -> Result<Resolved> {
    let file: RunFile = match &a.config {
        Some(p) => toml::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => RunFile::default(),
    };
    let trace_path = a
        .trace
        .or(file.trace)
        .context("--trace is required (flag or config key `trace`)")?;
    let trace = Trace::load(&trace_path)?;
    let catalog = catalog(a.profile.or(file.profile).as_deref())?;
    let policy: PolicyKind = a
        .policy
        .or(file.policy)
        .unwrap_or_else(|| "slackfit".into())
        .parse()?;
    let mut config = SimConfig::new(catalog, policy, a.workers.or(file.workers).unwrap_or(8))
        .with_actuation_delay_us(ms_to_us(
            a.actuation_ms.or(file.actuation_ms).unwrap_or(0.0),
            "--actuation-ms",
        )?)
        .with_faults(parse_faults(&a.fault.or(file.fault).unwrap_or_default())?);
    config.bucket_count = a
        .bucket_count
        .or(file.bucket_count)
        .unwrap_or(DEFAULT_BUCKET_COUNT);
    config.dispatch_overhead_us = a
        .dispatch_overhead_us
        .or(file.dispatch_overhead_us)
        .unwrap_or(0);
    config.validate()?;
    Ok(Resolved {
        trace,
        config,
        out: a.out.or(file.out),
        dynamics: a.dynamics.or(file.dynamics),
        outcomes: a.outcomes.or(file.outcomes),
        strict: a.strict,
    })
}

fn finish(r: &Resolved, report: &SimReport) -> Result<u8> {
    emit(r.out.as_deref(), &(report.report_json() + "\n"))?;
    if let Some(p) = &r.dynamics {
        export_dynamics(report, p)?;
    }
    if let Some(p) = &r.outcomes {
        report.write_outcomes(p)?;
    }
    if report.summary.diverged {
        eprintln!(
            "warning: run diverged (backlog reached {} queries)",
            report.summary.max_backlog
        );
        if r.strict {
            return Ok(EXIT_DIVERGED);
        }
    }
    Ok(0)
}

fn simulate(a: RunArgs) -> Result<u8> {
    let r = resolve(a)?;
    let report = run(&r.trace, &r.config)?;
    finish(&r, &report)
}

fn serve(a: ServeArgs) -> Result<u8> {
    let options = ServeOptions {
        max_pacing_lag_us: ms_to_us(a.max_lag_ms, "--max-lag-ms")?,
    };
    let r = resolve(a.run)?;
    let report = serve_with(&r.trace, &r.config, options)?;
    if !report.summary.valid {
        eprintln!(
            "warning: client fell behind the trace clock (p99 lag {} us); run is invalid",
            report.summary.p99_pacing_lag_us
        );
    }
    finish(&r, &report)
}

fn oracle(a: OracleArgs) -> Result<u8> {
    let inst = IlpInstance::parse(&read(&a.instance)?)?;
    let kind: PolicyKind = a.policy.parse()?;
    let cmp = policy_vs_oracle(&inst, &kind)?;
    emit(None, &(serde_json::to_string_pretty(&cmp)? + "\n"))?;
    Ok(0)
}

fn sweep(a: SweepArgs) -> Result<u8> {
    let spec = SweepSpec::parse(&read(&a.spec)?)?;
    // Profile paths in the spec are relative to the spec file.
    let profile = spec.profile.as_ref().map(|p| {
        let p = Path::new(p);
        match a.spec.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    });
    let rows = run_sweep(&spec, &catalog(profile.as_deref())?)?;
    emit(a.out.as_deref(), &rows_to_csv(&rows))?;
    let diverged = rows.iter().filter(|r| r.diverged).count();
    if diverged > 0 {
        eprintln!("warning: {diverged} of {} cells diverged", rows.len());
        if a.strict {
            return Ok(EXIT_DIVERGED);
        }
    }
    Ok(0)
}

fn memory(a: MemoryArgs) -> Result<u8> {
    let spec = MemorySpec::parse(&read(&a.config)?)?;
    emit(
        None,
        &(serde_json::to_string_pretty(&memory_footprint(&spec))? + "\n"),
    )?;
    Ok(0)
}

fn report(a: ReportArgs) -> Result<u8> {
    let records: Vec<_> = read_outcomes(&a.outcomes)?
        .iter()
        .map(|r| r.tightened(a.tighten_us))
        .collect();
    emit(
        None,
        &(serde_json::to_string_pretty(&aggregate(&records))? + "\n"),
    )?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenTrace(a) => gen_trace(a).map(|()| 0),
        Command::Simulate(a) => simulate(a),
        Command::Serve(a) => serve(a),
        Command::Oracle(a) => oracle(a),
        Command::Sweep(a) => sweep(a),
        Command::Memory(a) => memory(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

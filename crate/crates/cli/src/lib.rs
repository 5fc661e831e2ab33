//! Command-line front end for the `mjp-core` sampler.
//!
//! [`run`] parses arguments, executes one subcommand and returns the
//! process exit code: 0 on success, 1 for usage or validation errors and
//! 2 for failures while running.

pub mod io;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mjp_core::diagnostics::{estimate_drift, estimate_tv_decay, trace_summary, SeriesSummary};
use mjp_core::oracle::exact_posterior_marginals;
use mjp_core::raoteh::{run_chain, ChainHooks};
use mjp_core::simulate::{generate_observations, gillespie_simulate, uniformized_simulate};
use mjp_core::{rng_stream, Evidence, InitStrategy, MjpError, SamplerConfig, Trajectory};
use serde_json::json;

use crate::io::{IoError, Model};

#[derive(Debug, Parser)]
#[command(name = "mjp", version, about = "Posterior sampling for hidden Markov jump processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a trajectory from the prior and noisy observations of it.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and write a trace CSV.
    Sample(SampleArgs),
    /// Exact posterior marginals at probe times (small state spaces).
    Oracle(OracleArgs),
    /// Drift, TV-decay or trace diagnostics as CSV.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// RNG seed. Falls back to MJP_SEED, then 0.
    #[arg(long, env = "MJP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for replicate-parallel diagnostics.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Gillespie,
    Uniformized,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Emission matrix JSON, required with --obs-times.
    #[arg(long)]
    pub emission: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub obs_times: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t_min: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub t_max: f64,
    #[arg(long, value_enum, default_value_t = Method::Gillespie)]
    pub method: Method,
    /// Uniformization rate as a multiple of the largest leaving rate.
    #[arg(long, default_value_t = 2.0)]
    pub lambda_factor: f64,
    #[arg(long)]
    pub out_prefix: String,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Window {
    /// Overrides the window stored in the evidence file.
    #[arg(long, allow_negative_numbers = true)]
    pub t_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    /// Recorded sweeps after burn-in.
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lambda_factor: f64,
    #[arg(long, value_delimiter = ',')]
    pub probes: Vec<f64>,
    #[arg(long, default_value = "prior-rejection")]
    pub init: InitStrategy,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub window: Window,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub probes: Vec<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub window: Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Drift,
    Tv,
    Trace,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long, required_unless_present = "trace")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub evidence: Option<PathBuf>,
    /// Trace CSV written by `sample` (trace mode).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Initial jump counts (drift mode).
    #[arg(long, value_delimiter = ',', default_values_t = [25usize, 50, 100, 200, 400])]
    pub ns: Vec<usize>,
    /// Sweep counts (tv mode).
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8, 16, 32])]
    pub ms: Vec<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Probe time (tv mode).
    #[arg(long)]
    pub probe: Option<f64>,
    /// Starting trajectory JSON (tv mode).
    #[arg(long)]
    pub x0: Option<PathBuf>,
    /// Sweeps to discard from the trace (trace mode).
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 2.0)]
    pub lambda_factor: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub window: Window,
    #[command(flatten)]
    pub common: Common,
}

/// A failure with its exit code.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        invalid(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Sample(a) => sample(a),
        Command::Oracle(a) => oracle(a),
        Command::Diagnose(a) => diagnose(a),
    }
}

fn echo_config(config: serde_json::Value) {
    eprintln!("{config}");
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => io::write(path, text).map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_threads(threads: usize) -> CliResult {
    if threads == 0 {
        return Err(invalid("--threads must be at least 1"));
    }
    Ok(())
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(runtime)?;
    Ok(pool.install(f))
}

fn load_evidence(path: Option<&Path>, model: &Model) -> CliResult<(Evidence, Option<(f64, f64)>)> {
    match path {
        Some(p) => {
            let data = io::load_evidence(p, model.space.size())?;
            Ok((data.evidence, data.window))
        }
        None => Ok((Evidence::empty(), None)),
    }
}

fn resolve_window(flags: &Window, stored: Option<(f64, f64)>, ev: &Evidence) -> CliResult<(f64, f64)> {
    let (t_min, t_max) = match (flags.t_min.or(stored.map(|w| w.0)), flags.t_max.or(stored.map(|w| w.1))) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(invalid(
                "observation window unknown: pass --t-min and --t-max or store t_min/t_max in the evidence file",
            ))
        }
    };
    if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
        return Err(invalid(format!("--t-max ({t_max}) must exceed --t-min ({t_min})")));
    }
    ev.check_window(t_min, t_max).map_err(invalid)?;
    Ok((t_min, t_max))
}

fn check_probes(probes: &[f64], t_min: f64, t_max: f64) -> CliResult {
    for (k, &t) in probes.iter().enumerate() {
        if !(t >= t_min && t <= t_max) {
            return Err(invalid(format!("--probes[{k}] = {t} lies outside [{t_min}, {t_max}]")));
        }
    }
    Ok(())
}

fn sampler_config(lambda_factor: f64, n_sweeps: usize, burn_in: usize, seed: u64, init: InitStrategy) -> CliResult<SamplerConfig> {
    let cfg = SamplerConfig {
        lambda_factor,
        n_sweeps,
        burn_in,
        seed,
        init_strategy: init,
    };
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let model = io::load_model(&a.model)?;
    if !(a.t_min.is_finite() && a.t_max.is_finite() && a.t_min < a.t_max) {
        return Err(invalid(format!("--t-max ({}) must exceed --t-min ({})", a.t_max, a.t_min)));
    }
    if !(a.lambda_factor > 1.0 && a.lambda_factor.is_finite()) {
        return Err(invalid("--lambda-factor must be a finite number above 1"));
    }
    if let Some(k) = a.obs_times.iter().position(|&t| !(t >= a.t_min && t <= a.t_max)) {
        return Err(invalid(format!("--obs-times[{k}] lies outside [{}, {}]", a.t_min, a.t_max)));
    }
    if a.obs_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("--obs-times must be nondecreasing"));
    }
    let emission = match &a.emission {
        Some(p) => Some(io::load_emission(p, model.space.size())?),
        None if a.obs_times.is_empty() => None,
        None => return Err(invalid("--emission is required when --obs-times is given")),
    };
    let lambda = a.lambda_factor * model.q.q_max();
    echo_config(json!({
        "command": "simulate",
        "model": a.model,
        "emission": a.emission,
        "obs_times": a.obs_times,
        "t_min": a.t_min,
        "t_max": a.t_max,
        "method": format!("{:?}", a.method).to_lowercase(),
        "lambda_factor": a.lambda_factor,
        "seed": a.common.seed,
        "out_prefix": a.out_prefix,
    }));

    let mut rng = rng_stream(a.common.seed, 0);
    let x = match a.method {
        Method::Gillespie => gillespie_simulate(&model.nu, &model.q, a.t_min, a.t_max, &mut rng),
        Method::Uniformized => uniformized_simulate(&model.nu, &model.q, lambda, a.t_min, a.t_max, &mut rng),
    }
    .map_err(runtime)?;
    let ev = match &emission {
        Some(em) => generate_observations(&x, &a.obs_times, em, &mut rng).map_err(runtime)?,
        None => Evidence::empty(),
    };
    io::save_trajectory(Path::new(&format!("{}.trajectory.json", a.out_prefix)), &x).map_err(runtime)?;
    io::save_evidence(
        Path::new(&format!("{}.evidence.json", a.out_prefix)),
        &ev,
        Some((a.t_min, a.t_max)),
    )
    .map_err(runtime)?;
    Ok(())
}

fn sample(a: SampleArgs) -> CliResult {
    let model = io::load_model(&a.model)?;
    let (ev, stored) = load_evidence(a.evidence.as_deref(), &model)?;
    let (t_min, t_max) = resolve_window(&a.window, stored, &ev)?;
    check_probes(&a.probes, t_min, t_max)?;
    let cfg = sampler_config(a.lambda_factor, a.sweeps, a.burn_in, a.common.seed, a.init)?;
    echo_config(json!({
        "command": "sample",
        "model": a.model,
        "evidence": a.evidence,
        "t_min": t_min,
        "t_max": t_max,
        "sweeps": cfg.n_sweeps,
        "burn_in": cfg.burn_in,
        "lambda_factor": cfg.lambda_factor,
        "lambda": cfg.lambda(&model.q),
        "probes": a.probes,
        "init": cfg.init_strategy.to_string(),
        "seed": cfg.seed,
        "out": a.out,
    }));

    let mut rng = rng_stream(cfg.seed, 0);
    let trace = run_chain(
        &model.nu,
        &model.q,
        &ev,
        &cfg,
        t_min,
        t_max,
        &mut rng,
        &ChainHooks::probes(&a.probes),
    )
    .map_err(runtime)?;
    io::write(&a.out, &io::trace_to_csv(&trace)).map_err(runtime)
}

fn oracle(a: OracleArgs) -> CliResult {
    let model = io::load_model(&a.model)?;
    let (ev, stored) = load_evidence(a.evidence.as_deref(), &model)?;
    let (t_min, t_max) = resolve_window(&a.window, stored, &ev)?;
    check_probes(&a.probes, t_min, t_max)?;
    echo_config(json!({
        "command": "oracle",
        "model": a.model,
        "evidence": a.evidence,
        "t_min": t_min,
        "t_max": t_max,
        "probes": a.probes,
        "out": a.out,
    }));

    let marginals =
        exact_posterior_marginals(&model.nu, &model.q, &ev, &a.probes, t_min, t_max).map_err(runtime)?;
    let probes: Vec<_> = a
        .probes
        .iter()
        .zip(&marginals)
        .map(|(t, m)| json!({ "t": t, "marginal": m }))
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({ "probes": probes })).map_err(runtime)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)
}

fn diagnose(a: DiagnoseArgs) -> CliResult {
    check_threads(a.common.threads)?;
    match a.mode {
        Mode::Drift => diagnose_drift(a),
        Mode::Tv => diagnose_tv(a),
        Mode::Trace => diagnose_trace(a),
    }
}

fn require_model(a: &DiagnoseArgs) -> CliResult<Model> {
    let path = a
        .model
        .as_deref()
        .ok_or_else(|| invalid("--model is required for this mode"))?;
    Ok(io::load_model(path)?)
}

fn diagnose_drift(a: DiagnoseArgs) -> CliResult {
    let model = require_model(&a)?;
    let (ev, stored) = load_evidence(a.evidence.as_deref(), &model)?;
    let (t_min, t_max) = resolve_window(&a.window, stored, &ev)?;
    let replicates = a.replicates.unwrap_or(mjp_core::diagnostics::MIN_DRIFT_REPLICATES);
    let cfg = sampler_config(a.lambda_factor, 1, 0, a.common.seed, InitStrategy::default())?;
    echo_config(json!({
        "command": "diagnose",
        "mode": "drift",
        "model": a.model,
        "evidence": a.evidence,
        "t_min": t_min,
        "t_max": t_max,
        "ns": a.ns,
        "replicates": replicates,
        "lambda_factor": cfg.lambda_factor,
        "seed": cfg.seed,
        "threads": a.common.threads,
        "out": a.out,
    }));

    let est = with_pool(a.common.threads, || {
        estimate_drift(&model.nu, &model.q, &ev, &cfg, &a.ns, replicates, t_min, t_max, cfg.seed)
    })?
    .map_err(|e| match e {
        MjpError::InvalidConfig(_) | MjpError::SeedTrajectoryInfeasible { .. } => invalid(e),
        _ => runtime(e),
    })?;
    eprintln!(
        "{}",
        json!({
            "q_hat": est.q_hat,
            "c_hat": est.c_hat,
            "ci_slope": [est.ci_slope.0, est.ci_slope.1],
        })
    );
    let mut csv = String::from("n,mean_j,se\n");
    for p in &est.points {
        csv.push_str(&format!("{},{},{}\n", p.n, p.mean, p.std_error));
    }
    emit(a.out.as_deref(), &csv)
}

fn diagnose_tv(a: DiagnoseArgs) -> CliResult {
    let model = require_model(&a)?;
    let (ev, stored) = load_evidence(a.evidence.as_deref(), &model)?;
    let (t_min, t_max) = resolve_window(&a.window, stored, &ev)?;
    let probe = a.probe.ok_or_else(|| invalid("--probe is required in tv mode"))?;
    check_probes(&[probe], t_min, t_max)?;
    let replicates = a.replicates.unwrap_or(mjp_core::diagnostics::MIN_TV_REPLICATES);
    let cfg = sampler_config(a.lambda_factor, 1, 0, a.common.seed, InitStrategy::default())?;
    let x0 = match &a.x0 {
        Some(p) => {
            let x = io::load_trajectory(p, model.space.size())?;
            if x.t_min() != t_min || x.t_max() != t_max {
                return Err(invalid(format!(
                    "{}: trajectory window [{}, {}] differs from [{t_min}, {t_max}]",
                    p.display(),
                    x.t_min(),
                    x.t_max()
                )));
            }
            x
        }
        None => least_likely_start(&model, &ev, probe, t_min, t_max)?,
    };
    echo_config(json!({
        "command": "diagnose",
        "mode": "tv",
        "model": a.model,
        "evidence": a.evidence,
        "t_min": t_min,
        "t_max": t_max,
        "ms": a.ms,
        "replicates": replicates,
        "probe": probe,
        "x0": io::trajectory_to_file(&x0),
        "lambda_factor": cfg.lambda_factor,
        "seed": cfg.seed,
        "threads": a.common.threads,
        "out": a.out,
    }));

    let curve = with_pool(a.common.threads, || {
        estimate_tv_decay(&model.nu, &model.q, &ev, &cfg, &x0, &a.ms, replicates, probe, cfg.seed)
    })?
    .map_err(|e| match e {
        MjpError::InvalidConfig(_) => invalid(e),
        _ => runtime(e),
    })?;
    let mut csv = String::from("m,tv,se\n");
    for ((m, tv), se) in curve.ms.iter().zip(&curve.tv).zip(&curve.std_error) {
        csv.push_str(&format!("{m},{tv},{se}\n"));
    }
    emit(a.out.as_deref(), &csv)
}

/// A constant path in the state with the smallest positive posterior mass
/// at `probe` that still explains the evidence.
fn least_likely_start(model: &Model, ev: &Evidence, probe: f64, t_min: f64, t_max: f64) -> CliResult<Trajectory> {
    let marginal = exact_posterior_marginals(&model.nu, &model.q, ev, &[probe], t_min, t_max)
        .map_err(runtime)?
        .remove(0);
    let mut order: Vec<usize> = (0..marginal.len()).collect();
    order.sort_by(|&i, &j| marginal[i].total_cmp(&marginal[j]));
    for s in order {
        let x = Trajectory::constant(t_min, t_max, s).map_err(runtime)?;
        if ev.likelihood(&x) > 0.0 {
            return Ok(x);
        }
    }
    Err(invalid("no constant trajectory explains the evidence; pass --x0"))
}

fn summary_row(name: &str, s: &SeriesSummary) -> String {
    let tau = s.tau.map_or(String::new(), |t| t.to_string());
    format!("{name},{},{},{tau},{},{}\n", s.mean, s.variance, s.ess, s.degenerate)
}

fn diagnose_trace(a: DiagnoseArgs) -> CliResult {
    let path = a
        .trace
        .as_deref()
        .ok_or_else(|| invalid("--trace is required in trace mode"))?;
    let n_states = match &a.model {
        Some(p) => Some(io::load_model(p)?.space.size()),
        None => None,
    };
    let trace = io::load_trace_csv(path, n_states)?;
    echo_config(json!({
        "command": "diagnose",
        "mode": "trace",
        "trace": a.trace,
        "model": a.model,
        "burn_in": a.burn_in,
        "out": a.out,
    }));

    let summary = trace_summary(&trace, a.burn_in).map_err(invalid)?;
    let mut csv = String::from("series,mean,variance,tau,ess,degenerate\n");
    csv.push_str(&summary_row("n_jumps", &summary.n_jumps));
    csv.push_str(&summary_row("log_evidence", &summary.log_evidence));
    for (k, p) in summary.probes.iter().enumerate() {
        csv.push_str(&summary_row(&format!("probe_{k}"), &p.series));
    }
    for (k, p) in summary.probes.iter().enumerate() {
        for (s, f) in p.frequencies.iter().enumerate() {
            csv.push_str(&format!("probe_{k}_freq_{s},{f},,,,\n"));
        }
    }
    emit(a.out.as_deref(), &csv)
}

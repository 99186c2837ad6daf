//! Command-line front end: the phase-correction demo and the two Monte
//! Carlo experiments, with CSV/JSON output, config-file support, and a
//! reproducibility manifest next to every result file.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use ripsim::montecarlo::SINGLE_CHANNEL_DISTANCE_M;
use ripsim::report::{self, DemoRow, RunManifest};
use ripsim::{
    estimate_channel_profile, los_phase, predict_phase_error, run_phase_sweep, run_qrange_cdf,
    sample_scenario, synthesize_observation, wrap_to_pi, ChannelId, Error, EstimatorConfig,
    ExperimentConfig, ParamDistribution, ScenarioKind, Sender, SweepParam,
};

#[derive(Parser)]
#[command(
    name = "ripsim",
    version,
    about = "Multipath-corrected radio-interferometric ranging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-channel correction showcase: per-step phase error before and
    /// after subtracting the estimated multipath distortion
    DemoCorrect(DemoArgs),
    /// Phase-RMSE sweep over a multipath parameter (free/distorted/corrected)
    Sweep(SweepArgs),
    /// Q-range absolute-error distribution over random quad scenarios
    QrangeCdf(CdfArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Base RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Signal-to-noise ratio in dB [default: 30]
    #[arg(long)]
    snr_db: Option<f64>,
    /// Write results here instead of stdout (adds a <out>.manifest.json)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// TOML or JSON file whose fields mirror the experiment config (a run
    /// manifest works too); explicit flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reflection amplitude ratio of the demo path [default: 0.3]
    #[arg(long)]
    alpha: Option<f64>,
    /// Reflection delay in seconds [default: 2e-8]
    #[arg(long)]
    tau: Option<f64>,
    /// Reflection phase in radians [default: pi/4]
    #[arg(long)]
    theta: Option<f64>,
    /// Disable receiver noise
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parameter swept across the points
    #[arg(long, value_enum)]
    param: SweepParamArg,
    /// Sweep points as lo:hi:step, endpoints inclusive, in the parameter's
    /// unit [defaults: alpha 0.05:1.0:0.05, tau 5e-9:50e-9:5e-9]
    #[arg(long)]
    points: Option<String>,
    /// Trials per sweep point [default: 10000]
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepParamArg {
    Alpha,
    Tau,
}

#[derive(Args)]
struct CdfArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target q-range in meters [default: 75]
    #[arg(long)]
    dq: Option<f64>,
    /// Number of trials [default: 10000]
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 for argument/config problems, 3 for I/O, 4 for estimation failures.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 3,
        Error::InvalidConfig(_) | Error::InvalidParameter(_) => 2,
        _ => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = match &cli.command {
        Command::DemoCorrect(a) => a.common.threads,
        Command::Sweep(a) => a.common.threads,
        Command::QrangeCdf(a) => a.common.threads,
    };
    // 0 lets the pool size itself to the machine; results are identical
    // either way because all reductions run in trial-index order.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::DemoCorrect(args) => run_demo(args),
        Command::Sweep(args) => run_sweep(args),
        Command::QrangeCdf(args) => run_cdf(args),
    })
}

/// Config-file mirror of [`ExperimentConfig`]: every field optional, unknown
/// fields rejected so typos fail loudly.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    grid: Option<PartialGrid>,
    snr_db: Option<f64>,
    trials: Option<usize>,
    seed: Option<u64>,
    alpha_dist: Option<ParamDistribution>,
    tau_dist: Option<ParamDistribution>,
    theta_dist: Option<ParamDistribution>,
    paths_per_channel: Option<usize>,
    scenario_kind: Option<ScenarioKind>,
    estimator_cfg: Option<PartialEstimator>,
    dq_target: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialGrid {
    f_b0: Option<f64>,
    tone_gap: Option<f64>,
    delta_f: Option<f64>,
    num_freqs: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialEstimator {
    num_paths: Option<usize>,
    zero_pad_factor: Option<usize>,
    min_delay: Option<f64>,
    max_delay: Option<f64>,
    min_separation: Option<f64>,
    alpha_floor: Option<f64>,
    alpha_cap: Option<f64>,
    refine_rounds: Option<usize>,
}

fn load_partial(path: &Path) -> Result<PartialConfig, Error> {
    // An unreadable or malformed --config is an argument error (exit 2),
    // unlike failures writing results (exit 3).
    let bad = |e: &dyn std::fmt::Display| {
        Error::InvalidConfig(format!("config {}: {e}", path.display()))
    };
    let text = fs::read_to_string(path).map_err(|e| bad(&e))?;
    if text.trim_start().starts_with('{') {
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
        // A run manifest is accepted directly: reuse its embedded config.
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).map_err(|e| bad(&e))
    } else {
        toml::from_str(&text).map_err(|e| bad(&e))
    }
}

fn merge_config(mut cfg: ExperimentConfig, partial: PartialConfig) -> ExperimentConfig {
    if let Some(g) = &partial.grid {
        if let Some(v) = g.f_b0 {
            cfg.grid.f_b0 = v;
        }
        if let Some(v) = g.tone_gap {
            cfg.grid.tone_gap = v;
        }
        if let Some(v) = g.delta_f {
            cfg.grid.delta_f = v;
        }
        if let Some(v) = g.num_freqs {
            cfg.grid.num_freqs = v;
        }
        // Estimator defaults are tied to the grid's resolution; re-derive
        // them before applying any explicit estimator overrides below.
        cfg.estimator_cfg = EstimatorConfig::for_grid(&cfg.grid);
    }
    if let Some(e) = &partial.estimator_cfg {
        if let Some(v) = e.num_paths {
            cfg.estimator_cfg.num_paths = v;
        }
        if let Some(v) = e.zero_pad_factor {
            cfg.estimator_cfg.zero_pad_factor = v;
        }
        if let Some(v) = e.min_delay {
            cfg.estimator_cfg.min_delay = v;
        }
        if let Some(v) = e.max_delay {
            cfg.estimator_cfg.max_delay = v;
        }
        if let Some(v) = e.min_separation {
            cfg.estimator_cfg.min_separation = v;
        }
        if let Some(v) = e.alpha_floor {
            cfg.estimator_cfg.alpha_floor = v;
        }
        if let Some(v) = e.alpha_cap {
            cfg.estimator_cfg.alpha_cap = v;
        }
        if let Some(v) = e.refine_rounds {
            cfg.estimator_cfg.refine_rounds = v;
        }
    }
    if let Some(v) = partial.snr_db {
        cfg.snr_db = v;
    }
    if let Some(v) = partial.trials {
        cfg.trials = v;
    }
    if let Some(v) = partial.seed {
        cfg.seed = v;
    }
    if let Some(v) = partial.alpha_dist {
        cfg.alpha_dist = v;
    }
    if let Some(v) = partial.tau_dist {
        cfg.tau_dist = v;
    }
    if let Some(v) = partial.theta_dist {
        cfg.theta_dist = v;
    }
    if let Some(v) = partial.paths_per_channel {
        cfg.paths_per_channel = v;
    }
    if let Some(v) = partial.scenario_kind {
        cfg.scenario_kind = v;
    }
    if let Some(v) = partial.dq_target {
        cfg.dq_target = v;
    }
    cfg
}

/// Command defaults ← config file ← explicit flags, in ascending precedence.
fn resolve_config(common: &CommonArgs, mut base: ExperimentConfig) -> Result<ExperimentConfig, Error> {
    if let Some(path) = &common.config {
        base = merge_config(base, load_partial(path)?);
    }
    if let Some(seed) = common.seed {
        base.seed = seed;
    }
    if let Some(snr) = common.snr_db {
        base.snr_db = snr;
    }
    Ok(base)
}

/// Parses "lo:hi:step" into inclusive sweep points. Endpoints count within
/// half a step, and a final value that overshoots `hi` only through grid
/// arithmetic is snapped back onto it.
fn parse_points(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "points must be lo:hi:step, got {text:?}"
        )));
    }
    let mut nums = [0.0f64; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|e| {
            Error::InvalidParameter(format!("points value {part:?}: {e}"))
        })?;
    }
    let [lo, hi, step] = nums;
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!(
            "points need finite lo <= hi and step > 0, got {text:?}"
        )));
    }
    let mut points = Vec::new();
    for i in 0..u32::MAX {
        let v = lo + f64::from(i) * step;
        if v > hi + step / 2.0 {
            break;
        }
        points.push(v.min(hi));
        if points.len() > 10_000 {
            return Err(Error::InvalidParameter(format!(
                "points argument {text:?} expands to more than 10000 values"
            )));
        }
    }
    Ok(points)
}

fn render_output<T>(
    format: OutputFormat,
    value: &T,
    csv: impl Fn(&T) -> String,
    json: impl Fn(&T) -> String,
) -> String {
    match format {
        OutputFormat::Csv => csv(value),
        OutputFormat::Json => json(value),
    }
}

/// Writes the result body to stdout or atomically to --out, adding the
/// manifest sidecar in the file case.
fn emit(
    common: &CommonArgs,
    command: String,
    cfg: &ExperimentConfig,
    body: String,
    started: Instant,
) -> Result<(), Error> {
    match &common.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            report::write_atomic(path, body.as_bytes())?;
            let manifest = RunManifest {
                command,
                version: env!("CARGO_PKG_VERSION").to_string(),
                seed: cfg.seed,
                config: cfg.clone(),
                outputs: vec![path.clone()],
                duration_seconds: started.elapsed().as_secs_f64(),
            };
            report::write_atomic(&report::manifest_path(path), manifest.to_json().as_bytes())?;
        }
    }
    Ok(())
}

fn run_demo(args: DemoArgs) -> Result<(), Error> {
    let started = Instant::now();
    let base = ExperimentConfig {
        trials: 1,
        scenario_kind: ScenarioKind::SingleChannel,
        alpha_dist: ParamDistribution::fixed(0.3),
        tau_dist: ParamDistribution::fixed(20e-9),
        theta_dist: ParamDistribution::fixed(std::f64::consts::FRAC_PI_4),
        ..ExperimentConfig::default()
    };
    let mut cfg = resolve_config(&args.common, base)?;
    if let Some(v) = args.alpha {
        cfg.alpha_dist = ParamDistribution::fixed(v);
    }
    if let Some(v) = args.tau {
        cfg.tau_dist = ParamDistribution::fixed(v);
    }
    if let Some(v) = args.theta {
        cfg.theta_dist = ParamDistribution::fixed(v);
    }
    cfg.validate()?;

    let grid = cfg.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scenario = sample_scenario(&cfg, &mut rng)?;
    let snr_linear = if args.no_noise {
        f64::INFINITY
    } else {
        cfg.snr_linear()
    };
    let observation = synthesize_observation(&scenario, &grid, snr_linear, &mut rng)?;
    let phases = observation.phases(ChannelId::Bc);
    let amplitudes = observation.amplitudes(ChannelId::Bc);
    let estimate = estimate_channel_profile(&amplitudes, &grid, Sender::B, &cfg.estimator_cfg)?;

    let mut rows = Vec::with_capacity(grid.num_freqs);
    let (mut max_before, mut max_after) = (0.0f64, 0.0f64);
    for k in 0..grid.num_freqs {
        let f = grid.freq(Sender::B, k);
        let truth = los_phase(&grid, Sender::B, k, 0.0, SINGLE_CHANNEL_DISTANCE_M)?;
        let before = wrap_to_pi(phases[k] - truth);
        let after = wrap_to_pi(phases[k] - predict_phase_error(&estimate, f) - truth);
        max_before = max_before.max(before.abs());
        max_after = max_after.max(after.abs());
        rows.push(DemoRow {
            k,
            f_hz: f,
            phase_error_true_rad: before,
            phase_error_corrected_rad: after,
        });
    }
    eprintln!("max |phase error|: before {max_before:.6} rad, after {max_after:.6} rad");

    let body = render_output(args.common.format, &rows, |r| report::demo_csv(r), |r| report::demo_json(r));
    let command = if args.no_noise {
        "demo-correct --no-noise"
    } else {
        "demo-correct"
    };
    emit(&args.common, command.to_string(), &cfg, body, started)
}

fn run_sweep(args: SweepArgs) -> Result<(), Error> {
    let started = Instant::now();
    let (param, param_name, default_points, base) = match args.param {
        SweepParamArg::Alpha => (
            SweepParam::Alpha,
            "alpha",
            "0.05:1.0:0.05",
            ExperimentConfig {
                scenario_kind: ScenarioKind::SingleChannel,
                ..ExperimentConfig::default()
            },
        ),
        SweepParamArg::Tau => (
            SweepParam::Tau,
            "tau",
            "5e-9:50e-9:5e-9",
            ExperimentConfig {
                scenario_kind: ScenarioKind::SingleChannel,
                // The delay study draws moderate reflection strengths.
                alpha_dist: ParamDistribution::uniform(0.1, 0.4),
                ..ExperimentConfig::default()
            },
        ),
    };
    let mut cfg = resolve_config(&args.common, base)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let points_str = args.points.as_deref().unwrap_or(default_points);
    let points = parse_points(points_str)?;
    let result = run_phase_sweep(&cfg, param, &points)?;

    let mean_floor = result.rmse_free.iter().sum::<f64>() / result.rmse_free.len() as f64;
    eprintln!(
        "{} sweep: {} points x {} trials, mean multipath-free floor {:.4} rad",
        param_name,
        points.len(),
        cfg.trials,
        mean_floor
    );
    let body = render_output(args.common.format, &result, report::sweep_csv, report::sweep_json);
    emit(
        &args.common,
        format!("sweep --param {param_name} --points {points_str}"),
        &cfg,
        body,
        started,
    )
}

fn run_cdf(args: CdfArgs) -> Result<(), Error> {
    let started = Instant::now();
    let base = ExperimentConfig {
        // The ranging benchmark keeps delays above the resolution floor.
        tau_dist: ParamDistribution::uniform(10e-9, 50e-9),
        ..ExperimentConfig::default()
    };
    let mut cfg = resolve_config(&args.common, base)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(dq) = args.dq {
        cfg.dq_target = dq;
    }
    let cdf = run_qrange_cdf(&cfg)?;
    eprintln!(
        "distorted: median {:.4} m, 95th {:.4} m",
        cdf.median_distorted, cdf.p95_distorted
    );
    eprintln!(
        "corrected: median {:.4} m, 95th {:.4} m",
        cdf.median_corrected, cdf.p95_corrected
    );
    let body = render_output(args.common.format, &cdf, report::cdf_csv, report::cdf_json);
    emit(&args.common, "qrange-cdf".to_string(), &cfg, body, started)
}

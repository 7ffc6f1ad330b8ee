//! Command-line interface.
//!
//! Subcommands: `baseline` (entanglement growth), `train`, `eval`, `sweep`,
//! `fit`, `plot`. Configuration precedence is flags over `--config` file
//! over built-in defaults, and every run writes its resolved configuration
//! next to its outputs. Exit codes: 0 success, 1 invalid input or
//! configuration, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::env::{layer_weight, CircuitMode, EnvConfig, PenaltyOrientation};
use crate::experiments::{
    emit_growth, emit_results, entanglement_growth, evaluate_policy, read_growth, read_results,
    results_column, sweep, Actor, EvalStats, FillFinalColumnActor, GrowthCurve, PolicyActor,
    RandomActor, ResultRow,
};
use crate::fit::{linear_fit, tanh_fit, FitResult};
use crate::nn::PolicyModel;
use crate::plot::{emit_plot, PlotConfig, PlotKind, Series};
use crate::ppo::{load_model, save_model, train, TrainConfig};
use crate::{Error, Result};

/// Environment variable consulted for the output root when `--out` is absent.
pub const OUT_ENV_VAR: &str = "DISENTANGLE_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "disentangle",
    version,
    about = "Find minimal projective-measurement disentanglers for brick-wall Clifford circuits",
    propagate_version = true
)]
struct Cli {
    /// Output directory (default: $DISENTANGLE_OUT, then the current directory)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// TOML config file supplying [env] and [train] defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sections (1 forces the serial schedule)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Entanglement growth of unmeasured random circuits
    Baseline(BaselineArgs),
    /// Train one policy and save model + metrics
    Train(TrainArgs),
    /// Evaluate a saved model (or a baseline actor) over many episodes
    Eval(EvalArgs),
    /// Train and evaluate over an (n, d, alpha) grid
    Sweep(SweepArgs),
    /// Fit a curve to columns of a results CSV
    Fit(FitArgs),
    /// Render SVG plots from CSV artifacts
    Plot(PlotArgs),
}

/// Environment knobs shared by train and eval.
#[derive(Args, Clone, Debug, Default)]
struct EnvFlags {
    /// Qubit count n (>= 2)
    #[arg(long)]
    n: Option<usize>,

    /// Circuit depth d (even, >= 2); the measurement grid has d/2 columns
    #[arg(long)]
    depth: Option<usize>,

    /// Penalty slope alpha (>= 0)
    #[arg(long)]
    alpha: Option<f64>,

    /// Terminal reward scale p_r
    #[arg(long)]
    p_r: Option<f64>,

    /// Episode step cap (default n*d)
    #[arg(long)]
    max_steps: Option<usize>,

    /// Penalty orientation: depth-increasing | as-written
    #[arg(long)]
    orientation: Option<String>,

    /// Circuit mode: resample-per-episode | fixed
    #[arg(long)]
    circuit_mode: Option<String>,
}

/// Trainer knobs; `--seed` also seeds the environment streams.
#[derive(Args, Clone, Debug, Default)]
struct TrainFlags {
    /// Total environment steps t_s
    #[arg(long)]
    timesteps: Option<usize>,

    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,

    /// Entropy bonus coefficient
    #[arg(long)]
    entropy_coef: Option<f64>,

    /// PPO clip range epsilon
    #[arg(long)]
    clip: Option<f64>,

    /// Discount gamma
    #[arg(long)]
    gamma: Option<f64>,

    /// GAE lambda
    #[arg(long)]
    gae_lambda: Option<f64>,

    /// Steps per environment per update
    #[arg(long)]
    n_steps: Option<usize>,

    /// Minibatch size
    #[arg(long)]
    minibatch: Option<usize>,

    /// Optimization epochs per update
    #[arg(long)]
    epochs: Option<usize>,

    /// Value loss coefficient
    #[arg(long)]
    value_coef: Option<f64>,

    /// Global gradient norm clip
    #[arg(long)]
    max_grad_norm: Option<f64>,

    /// Parallel environments
    #[arg(long)]
    n_envs: Option<usize>,

    /// Master seed for model init, action sampling, shuffling, and circuits
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    /// Comma-separated qubit counts
    #[arg(long, default_value = "4,6,8")]
    n: String,

    /// Largest circuit depth (even depths up to this are sampled)
    #[arg(long, default_value_t = 64)]
    max_depth: usize,

    /// Circuits per size
    #[arg(long, default_value_t = 1000)]
    samples: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    env: EnvFlags,

    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Model file written by `train` (required for the policy actor)
    #[arg(long)]
    model: Option<PathBuf>,

    /// Actor: policy | random | fill-final-column
    #[arg(long, default_value = "policy")]
    actor: String,

    /// Evaluation episodes
    #[arg(long, default_value_t = 1000)]
    episodes: usize,

    /// Seed for evaluation action sampling and the default circuit stream
    #[arg(long)]
    seed: Option<u64>,

    #[command(flatten)]
    env: EnvFlags,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated qubit counts (default 3..8; 3..11 with --full)
    #[arg(long)]
    n: Option<String>,

    /// Comma-separated even depths d (default 4..16 step 2; up to 22 with --full)
    #[arg(long)]
    depth: Option<String>,

    /// Comma-separated penalty slopes (default 0.1)
    #[arg(long)]
    alpha: Option<String>,

    /// Evaluation episodes per grid point
    #[arg(long, default_value_t = 1000)]
    episodes: usize,

    /// Use the full published grid and 5e5 timesteps per point
    #[arg(long)]
    full: bool,

    /// Terminal reward scale p_r for every point
    #[arg(long)]
    p_r: Option<f64>,

    /// Penalty orientation for every point
    #[arg(long)]
    orientation: Option<String>,

    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Model: linear | tanh
    #[arg(long, default_value = "linear")]
    kind: String,

    /// Results CSV to read
    #[arg(long = "in")]
    input: PathBuf,

    /// Column for x
    #[arg(long, default_value = "n")]
    x: String,

    /// Column for y
    #[arg(long, default_value = "mean_measurements")]
    y: String,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[command(subcommand)]
    source: PlotSource,
}

#[derive(Subcommand, Debug)]
enum PlotSource {
    /// Layer-weight family f(l; alpha) against the layer index
    Weights {
        /// Comma-separated alpha values
        #[arg(long, default_value = "0.1,0.5,1.0")]
        alpha: String,

        /// Layers to plot (columns of the measurement grid)
        #[arg(long, default_value_t = 10)]
        half_depth: usize,
    },
    /// Growth curves from a baseline CSV
    Growth {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Scatter of two results-CSV columns, with an optional fit overlay
    Results {
        #[arg(long = "in")]
        input: PathBuf,

        #[arg(long, default_value = "d")]
        x: String,

        #[arg(long, default_value = "mean_measurements")]
        y: String,

        /// Overlay fit: linear | tanh
        #[arg(long)]
        fit: Option<String>,
    },
    /// Training metric against timestep from a metrics CSV
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,

        #[arg(long, default_value = "ep_rew_mean")]
        y: String,
    },
}

/// `[env]` section of a config file; every field optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvPatch {
    n: Option<usize>,
    d: Option<usize>,
    alpha: Option<f64>,
    p_r: Option<f64>,
    max_steps: Option<usize>,
    penalty_orientation: Option<PenaltyOrientation>,
    circuit_mode: Option<CircuitMode>,
    seed: Option<u64>,
}

/// `[train]` section of a config file; every field optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainPatch {
    total_timesteps: Option<usize>,
    learning_rate: Option<f64>,
    entropy_coef: Option<f64>,
    clip_eps: Option<f64>,
    gamma: Option<f64>,
    gae_lambda: Option<f64>,
    n_steps: Option<usize>,
    minibatch_size: Option<usize>,
    n_epochs: Option<usize>,
    value_coef: Option<f64>,
    max_grad_norm: Option<f64>,
    n_envs: Option<usize>,
    seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    env: Option<EnvPatch>,
    train: Option<TrainPatch>,
}

/// Runs the CLI; `args` excludes the binary name.
pub fn run(args: impl Iterator<Item = String>) -> u8 {
    let argv = std::iter::once("disentangle".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(jobs) = cli.jobs {
        // Ignore a pool that already exists (repeat calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_)
        | Error::Malformed(_)
        | Error::FormatVersion { .. }
        | Error::DimensionMismatch { .. }
        | Error::Fit(_)
        | Error::TooFewQubits { .. } => 1,
        _ => 2,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let out = resolve_out(cli.out)?;
    let file_cfg = load_file_config(cli.config.as_deref())?;
    match cli.cmd {
        Cmd::Baseline(args) => cmd_baseline(&out, &args),
        Cmd::Train(args) => cmd_train(&out, &file_cfg, &args),
        Cmd::Eval(args) => cmd_eval(&out, &file_cfg, &args),
        Cmd::Sweep(args) => cmd_sweep(&out, &file_cfg, &args),
        Cmd::Fit(args) => cmd_fit(&out, &args),
        Cmd::Plot(args) => cmd_plot(&out, &args),
    }
}

fn resolve_out(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os(OUT_ENV_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("config file {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(|s| s.trim().parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse {what} list {text:?}")))?;
    if items.is_empty() {
        return Err(Error::InvalidConfig(format!("empty {what} list")));
    }
    Ok(items)
}

fn resolve_env(flags: &EnvFlags, patch: Option<&EnvPatch>, seed: Option<u64>) -> Result<EnvConfig> {
    let file = patch.cloned().unwrap_or_default();
    let n = flags.n.or(file.n).unwrap_or(4);
    let d = flags.depth.or(file.d).unwrap_or(6);
    let alpha = flags.alpha.or(file.alpha).unwrap_or(0.1);
    let mut cfg = EnvConfig::new(n, d, alpha);
    if let Some(v) = flags.p_r.or(file.p_r) {
        cfg.p_r = v;
    }
    if let Some(v) = flags.max_steps.or(file.max_steps) {
        cfg.max_steps = v;
    }
    cfg.penalty_orientation = match &flags.orientation {
        Some(s) => s.parse()?,
        None => file.penalty_orientation.unwrap_or_default(),
    };
    cfg.circuit_mode = match &flags.circuit_mode {
        Some(s) => s.parse()?,
        None => file.circuit_mode.unwrap_or_default(),
    };
    cfg.seed = seed.or(file.seed).unwrap_or(0);
    cfg.validate()?;
    Ok(cfg)
}

/// Returns the resolved trainer config and whether `total_timesteps` was set
/// explicitly (the sweep picks its own default otherwise).
fn resolve_train(flags: &TrainFlags, patch: Option<&TrainPatch>) -> (TrainConfig, bool) {
    let file = patch.cloned().unwrap_or_default();
    let mut cfg = TrainConfig::default();
    let explicit_timesteps = flags.timesteps.is_some() || file.total_timesteps.is_some();
    cfg.total_timesteps = flags.timesteps.or(file.total_timesteps).unwrap_or(cfg.total_timesteps);
    cfg.learning_rate = flags.lr.or(file.learning_rate).unwrap_or(cfg.learning_rate);
    cfg.entropy_coef = flags.entropy_coef.or(file.entropy_coef).unwrap_or(cfg.entropy_coef);
    cfg.clip_eps = flags.clip.or(file.clip_eps).unwrap_or(cfg.clip_eps);
    cfg.gamma = flags.gamma.or(file.gamma).unwrap_or(cfg.gamma);
    cfg.gae_lambda = flags.gae_lambda.or(file.gae_lambda).unwrap_or(cfg.gae_lambda);
    cfg.n_steps = flags.n_steps.or(file.n_steps).unwrap_or(cfg.n_steps);
    cfg.minibatch_size = flags.minibatch.or(file.minibatch_size).unwrap_or(cfg.minibatch_size);
    cfg.n_epochs = flags.epochs.or(file.n_epochs).unwrap_or(cfg.n_epochs);
    cfg.value_coef = flags.value_coef.or(file.value_coef).unwrap_or(cfg.value_coef);
    cfg.max_grad_norm = flags.max_grad_norm.or(file.max_grad_norm).unwrap_or(cfg.max_grad_norm);
    cfg.n_envs = flags.n_envs.or(file.n_envs).unwrap_or(cfg.n_envs);
    cfg.seed = flags.seed.or(file.seed).unwrap_or(0);
    (cfg, explicit_timesteps)
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value).map_err(|e| Error::Malformed(e.to_string()))?;
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

#[derive(Serialize)]
struct BaselineResolved<'a> {
    command: &'static str,
    ns: &'a [usize],
    max_depth: usize,
    samples: usize,
    seed: u64,
}

fn cmd_baseline(out: &Path, args: &BaselineArgs) -> Result<()> {
    let ns = parse_list::<usize>(&args.n, "qubit count")?;
    let curves = entanglement_growth(&ns, args.max_depth, args.samples, args.seed)?;
    let combined = out.join("growth.csv");
    emit_growth(&curves, &combined)?;
    announce(&combined);
    for curve in &curves {
        let path = out.join(format!("growth_n{}.csv", curve.n));
        emit_growth(std::slice::from_ref(curve), &path)?;
        announce(&path);
    }
    write_toml(
        &out.join("baseline.config.toml"),
        &BaselineResolved {
            command: "baseline",
            ns: &ns,
            max_depth: args.max_depth,
            samples: args.samples,
            seed: args.seed,
        },
    )
}

/// Resolved train configuration; deliberately shaped like [`FileConfig`] so
/// the emitted file can be fed back through `--config` unchanged.
#[derive(Serialize)]
struct TrainResolved<'a> {
    env: &'a EnvConfig,
    train: &'a TrainConfig,
}

fn cmd_train(out: &Path, file_cfg: &FileConfig, args: &TrainArgs) -> Result<()> {
    let env_cfg = resolve_env(&args.env, file_cfg.env.as_ref(), args.train.seed)?;
    let (train_cfg, _) = resolve_train(&args.train, file_cfg.train.as_ref());
    let result = train(&env_cfg, &train_cfg)?;
    let model_path = out.join("model.json");
    save_model(&result.model, &train_cfg, &model_path)?;
    announce(&model_path);
    let metrics_path = out.join("metrics.csv");
    result.metrics.write_csv(&metrics_path)?;
    announce(&metrics_path);
    write_toml(
        &out.join("train.config.toml"),
        &TrainResolved { env: &env_cfg, train: &train_cfg },
    )?;
    if let Some(row) = result.metrics.rows.last() {
        println!(
            "final update: timestep={} ep_rew_mean={:.4} ep_len_mean={:.2} entropy={:.4}",
            row.timestep, row.ep_rew_mean, row.ep_len_mean, row.entropy
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalResolved<'a> {
    command: &'static str,
    actor: &'a str,
    model: Option<String>,
    episodes: usize,
    seed: u64,
    env: &'a EnvConfig,
}

fn eval_report(stats: &EvalStats) -> String {
    format!(
        "n_episodes = {}\nsuccess_count = {}\nsuccess_rate = {}\n\
         mean_measurements = {}\nstderr_measurements = {}\n\
         mean_weighted_layer = {}\nstderr_weighted_layer = {}\n\
         mean_unscaled_reward = {}\nstderr_unscaled_reward = {}\n",
        stats.n_episodes,
        stats.success_count,
        stats.success_rate(),
        stats.mean_measurements,
        stats.stderr_measurements,
        stats.mean_weighted_layer,
        stats.stderr_weighted_layer,
        stats.mean_unscaled_reward,
        stats.stderr_unscaled_reward
    )
}

fn cmd_eval(out: &Path, file_cfg: &FileConfig, args: &EvalArgs) -> Result<()> {
    let env_cfg = resolve_env(&args.env, file_cfg.env.as_ref(), args.seed)?;
    let seed = args.seed.unwrap_or(0);
    // The model must outlive the actor that borrows it.
    let model_store: Option<PolicyModel>;
    let mut actor: Box<dyn Actor> = match args.actor.as_str() {
        "policy" => {
            let path = args.model.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--model is required for the policy actor".into())
            })?;
            let (model, _) = load_model(path)?;
            model_store = Some(model);
            Box::new(PolicyActor::new(model_store.as_ref().expect("just stored")))
        }
        "random" => Box::new(RandomActor::new(env_cfg.n_actions())),
        "fill-final-column" => Box::new(FillFinalColumnActor::new(&env_cfg)),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown actor {other:?}; expected policy, random, or fill-final-column"
            )))
        }
    };
    let stats = evaluate_policy(actor.as_mut(), &env_cfg, args.episodes, seed)?;
    let report = eval_report(&stats);
    print!("{report}");
    let txt_path = out.join("eval.txt");
    std::fs::write(&txt_path, &report)?;
    announce(&txt_path);
    let row = ResultRow {
        n: env_cfg.n,
        d: env_cfg.d,
        alpha: env_cfg.alpha,
        mean_measurements: stats.mean_measurements,
        stderr_measurements: stats.stderr_measurements,
        mean_weighted_layer: stats.mean_weighted_layer,
        mean_reward: stats.mean_unscaled_reward,
        success_rate: stats.success_rate(),
        seed,
    };
    let csv_path = out.join("eval.csv");
    emit_results(&[row], &csv_path)?;
    announce(&csv_path);
    write_toml(
        &out.join("eval.config.toml"),
        &EvalResolved {
            command: "eval",
            actor: &args.actor,
            model: args.model.as_ref().map(|p| p.display().to_string()),
            episodes: args.episodes,
            seed,
            env: &env_cfg,
        },
    )
}

#[derive(Serialize)]
struct SweepResolved<'a> {
    command: &'static str,
    ns: &'a [usize],
    ds: &'a [usize],
    alphas: &'a [f64],
    episodes: usize,
    master_seed: u64,
    env_template: &'a EnvConfig,
    train_template: &'a TrainConfig,
}

fn cmd_sweep(out: &Path, file_cfg: &FileConfig, args: &SweepArgs) -> Result<()> {
    let ns = match &args.n {
        Some(s) => parse_list::<usize>(s, "qubit count")?,
        None => if args.full { (3..=11).collect() } else { (3..=8).collect() },
    };
    let ds = match &args.depth {
        Some(s) => parse_list::<usize>(s, "depth")?,
        None => {
            let max_half = if args.full { 11 } else { 8 };
            (2..=max_half).map(|half| 2 * half).collect()
        }
    };
    let alphas = match &args.alpha {
        Some(s) => parse_list::<f64>(s, "alpha")?,
        None => vec![0.1],
    };
    let env_flags = EnvFlags {
        p_r: args.p_r,
        orientation: args.orientation.clone(),
        ..EnvFlags::default()
    };
    let master_seed = args.train.seed.unwrap_or(0);
    let env_template = resolve_env(&env_flags, file_cfg.env.as_ref(), Some(master_seed))?;
    let (mut train_template, explicit_timesteps) =
        resolve_train(&args.train, file_cfg.train.as_ref());
    if !explicit_timesteps {
        train_template.total_timesteps = if args.full { 500_000 } else { 100_000 };
    }
    let outcome =
        sweep(&ns, &ds, &alphas, &env_template, &train_template, args.episodes, master_seed)?;
    let results_path = out.join("results.csv");
    emit_results(&outcome.rows, &results_path)?;
    announce(&results_path);
    if !outcome.failures.is_empty() {
        let failures_path = out.join("failures.txt");
        let mut text = String::new();
        for f in &outcome.failures {
            text.push_str(&format!("n={} d={} alpha={}: {}\n", f.n, f.d, f.alpha, f.error));
        }
        std::fs::write(&failures_path, text)?;
        announce(&failures_path);
        eprintln!("{} grid point(s) failed; see failures.txt", outcome.failures.len());
    }
    write_toml(
        &out.join("sweep.config.toml"),
        &SweepResolved {
            command: "sweep",
            ns: &ns,
            ds: &ds,
            alphas: &alphas,
            episodes: args.episodes,
            master_seed,
            env_template: &env_template,
            train_template: &train_template,
        },
    )
}

fn fit_by_kind(kind: &str, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    match kind {
        "linear" => linear_fit(xs, ys),
        "tanh" => tanh_fit(xs, ys),
        other => Err(Error::InvalidConfig(format!("unknown fit kind {other:?}"))),
    }
}

fn fit_report(fit: &FitResult, x: &str, y: &str, n_points: usize) -> String {
    let mut text = format!("kind = {}\nx = {x}\ny = {y}\nn_points = {n_points}\n", fit.kind);
    for (i, c) in fit.coeffs.iter().enumerate() {
        text.push_str(&format!("gamma{} = {c}\n", i + 1));
    }
    text.push_str(&format!("rss = {}\nconverged = {}\n", fit.rss, fit.converged));
    text
}

fn cmd_fit(out: &Path, args: &FitArgs) -> Result<()> {
    let rows = read_results(&args.input)?;
    let xs = results_column(&rows, &args.x)?;
    let ys = results_column(&rows, &args.y)?;
    let fit = fit_by_kind(&args.kind, &xs, &ys)?;
    let report = fit_report(&fit, &args.x, &args.y, rows.len());
    print!("{report}");
    let path = out.join(format!("fit_{}.txt", args.kind));
    std::fs::write(&path, &report)?;
    announce(&path);
    Ok(())
}

fn growth_series(curves: &[GrowthCurve]) -> Vec<Series> {
    curves
        .iter()
        .map(|c| {
            Series::new(
                format!("n = {}", c.n),
                c.points.iter().map(|p| (p.depth as f64, p.mean_savg)).collect(),
            )
        })
        .collect()
}

/// Reads `(timestep, column)` pairs from a training metrics CSV.
fn read_metrics_points(path: &Path, column: &str) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Malformed("empty metrics file".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let col = names
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| Error::InvalidConfig(format!("no column {column:?} in {names:?}")))?;
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::Malformed(format!("row {} has {} fields", i + 2, fields.len())));
        }
        let parse = |j: usize| -> Result<f64> {
            fields[j]
                .parse()
                .map_err(|_| Error::Malformed(format!("row {}: bad {}", i + 2, names[j])))
        };
        points.push((parse(0)?, parse(col)?));
    }
    Ok(points)
}

fn cmd_plot(out: &Path, args: &PlotArgs) -> Result<()> {
    match &args.source {
        PlotSource::Weights { alpha, half_depth } => {
            let alphas = parse_list::<f64>(alpha, "alpha")?;
            let mut series = Vec::new();
            for &a in &alphas {
                let points = (1..=*half_depth)
                    .map(|l| {
                        layer_weight(l, *half_depth, a, PenaltyOrientation::AsWritten)
                            .map(|w| (l as f64, w))
                    })
                    .collect::<Result<Vec<_>>>()?;
                series.push(Series::new(format!("alpha = {a}"), points));
            }
            let cfg = PlotConfig {
                title: "Measurement layer weights".into(),
                x_label: "layer".into(),
                y_label: "f(l; alpha)".into(),
            };
            let path = out.join("weights.svg");
            emit_plot(&series, PlotKind::Line, &cfg, &path)?;
            announce(&path);
        }
        PlotSource::Growth { input } => {
            let curves = read_growth(input)?;
            let cfg = PlotConfig {
                title: "Entanglement growth".into(),
                x_label: "depth".into(),
                y_label: "mean S_avg (bits)".into(),
            };
            let path = out.join("growth.svg");
            emit_plot(&growth_series(&curves), PlotKind::Line, &cfg, &path)?;
            announce(&path);
        }
        PlotSource::Results { input, x, y, fit } => {
            let rows = read_results(input)?;
            let xs = results_column(&rows, x)?;
            let ys = results_column(&rows, y)?;
            let mut series =
                vec![Series::new(y.clone(), xs.iter().copied().zip(ys.iter().copied()).collect())];
            if let Some(kind) = fit {
                let fitted = fit_by_kind(kind, &xs, &ys)?;
                let (lo, hi) = xs
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                let curve: Vec<(f64, f64)> = (0..=100)
                    .map(|k| {
                        let xv = lo + (hi - lo) * k as f64 / 100.0;
                        (xv, fitted.predict(xv))
                    })
                    .collect();
                series.push(Series::new(format!("{kind} fit"), curve));
                print!("{}", fit_report(&fitted, x, y, rows.len()));
            }
            let cfg = PlotConfig { title: String::new(), x_label: x.clone(), y_label: y.clone() };
            let path = out.join("results.svg");
            emit_plot(&series, PlotKind::ScatterFit, &cfg, &path)?;
            announce(&path);
        }
        PlotSource::Metrics { input, y } => {
            let points = read_metrics_points(input, y)?;
            let cfg = PlotConfig {
                title: "Training metrics".into(),
                x_label: "timestep".into(),
                y_label: y.clone(),
            };
            let path = out.join("metrics.svg");
            emit_plot(&[Series::new(y.clone(), points)], PlotKind::Line, &cfg, &path)?;
            announce(&path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> u8 {
        run(args.iter().map(|s| s.to_string()))
    }

    fn tiny_train(dir: &Path, extra: &[&str]) -> u8 {
        let out = dir.to_str().unwrap();
        let mut args = vec![
            "train", "--n", "3", "--depth", "4", "--alpha", "0.1", "--timesteps", "128",
            "--n-steps", "64", "--minibatch", "32", "--epochs", "2", "--seed", "9", "--out", out,
        ];
        args.extend_from_slice(extra);
        run_args(&args)
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["train", "--help"]), 0);
        assert_eq!(run_args(&["--version"]), 0);
    }

    #[test]
    fn bad_invocations_exit_one() {
        assert_eq!(run_args(&["bogus-subcommand"]), 1);
        assert_eq!(run_args(&["train", "--no-such-flag"]), 1);
        let dir = tempfile::tempdir().unwrap();
        // Odd depth: caught by config validation.
        assert_eq!(
            run_args(&["train", "--n", "3", "--depth", "3", "--out", dir.path().to_str().unwrap()]),
            1
        );
    }

    #[test]
    fn train_writes_artifacts_and_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(tiny_train(a.path(), &[]), 0);
        assert_eq!(tiny_train(b.path(), &[]), 0);
        for name in ["model.json", "metrics.csv", "train.config.toml"] {
            assert!(a.path().join(name).exists(), "{name} missing");
        }
        let ma = std::fs::read(a.path().join("metrics.csv")).unwrap();
        let mb = std::fs::read(b.path().join("metrics.csv")).unwrap();
        assert_eq!(ma, mb);
        let wa = std::fs::read(a.path().join("model.json")).unwrap();
        let wb = std::fs::read(b.path().join("model.json")).unwrap();
        assert_eq!(wa, wb);
    }

    #[test]
    fn config_file_layers_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(
            &cfg_path,
            "[env]\nn = 5\nd = 4\n\n[train]\ntotal_timesteps = 128\nn_steps = 64\n\
             minibatch_size = 32\nn_epochs = 2\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let code = run_args(&[
            "train",
            "--config",
            cfg_path.to_str().unwrap(),
            "--n",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let resolved = std::fs::read_to_string(out.join("train.config.toml")).unwrap();
        // Flag --n 3 overrides the file's n = 5; the file's d = 4 survives.
        assert!(resolved.contains("n = 3"), "resolved: {resolved}");
        assert!(resolved.contains("d = 4"), "resolved: {resolved}");
        assert!(resolved.contains("total_timesteps = 128"), "resolved: {resolved}");
    }

    #[test]
    fn train_resolved_config_round_trips_through_config_flag() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(tiny_train(a.path(), &[]), 0);
        let resolved = a.path().join("train.config.toml");
        let code = run_args(&[
            "train",
            "--config",
            resolved.to_str().unwrap(),
            "--out",
            b.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let ca = std::fs::read(&resolved).unwrap();
        let cb = std::fs::read(b.path().join("train.config.toml")).unwrap();
        assert_eq!(ca, cb);
        let ma = std::fs::read(a.path().join("metrics.csv")).unwrap();
        let mb = std::fs::read(b.path().join("metrics.csv")).unwrap();
        assert_eq!(ma, mb);
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("cfg.toml");
        std::fs::write(&cfg_path, "[env]\nqubits = 5\n").unwrap();
        let code = run_args(&[
            "baseline",
            "--n",
            "3",
            "--max-depth",
            "4",
            "--samples",
            "2",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
    }

    #[test]
    fn baseline_writes_per_size_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let args = [
            "baseline", "--n", "3,4", "--max-depth", "8", "--samples", "20", "--seed", "1",
            "--out", out,
        ];
        assert_eq!(run_args(&args), 0);
        let combined = std::fs::read_to_string(dir.path().join("growth.csv")).unwrap();
        assert!(combined.starts_with("n,depth,mean_savg,stderr\n3,0,0,0\n"));
        assert!(dir.path().join("growth_n3.csv").exists());
        assert!(dir.path().join("growth_n4.csv").exists());
        assert!(dir.path().join("baseline.config.toml").exists());
        let first = std::fs::read(dir.path().join("growth.csv")).unwrap();
        assert_eq!(run_args(&args), 0);
        assert_eq!(std::fs::read(dir.path().join("growth.csv")).unwrap(), first);
    }

    #[test]
    fn eval_random_actor_writes_stats() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_args(&[
            "eval", "--actor", "random", "--n", "3", "--depth", "4", "--episodes", "15",
            "--seed", "2", "--out", out,
        ]);
        assert_eq!(code, 0);
        let txt = std::fs::read_to_string(dir.path().join("eval.txt")).unwrap();
        assert!(txt.contains("n_episodes = 15"));
        let csv = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
        assert!(csv.starts_with("n,d,alpha,"));
        assert!(dir.path().join("eval.config.toml").exists());
    }

    #[test]
    fn eval_rejects_model_environment_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(tiny_train(dir.path(), &[]), 0);
        let model = dir.path().join("model.json");
        // Trained on n=3, d=4 (6 grid cells); n=4, d=4 has 8.
        let code = run_args(&[
            "eval",
            "--model",
            model.to_str().unwrap(),
            "--n",
            "4",
            "--depth",
            "4",
            "--episodes",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 1);
        // The matching environment works.
        let code = run_args(&[
            "eval",
            "--model",
            model.to_str().unwrap(),
            "--n",
            "3",
            "--depth",
            "4",
            "--episodes",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }

    #[test]
    fn eval_policy_requires_model_flag() {
        let dir = tempfile::tempdir().unwrap();
        let code =
            run_args(&["eval", "--n", "3", "--depth", "4", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 1);
    }

    #[test]
    fn sweep_then_fit_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_args(&[
            "sweep", "--n", "2,3", "--depth", "4", "--alpha", "0.1", "--episodes", "10",
            "--timesteps", "128", "--n-steps", "64", "--minibatch", "32", "--epochs", "2",
            "--seed", "3", "--out", out,
        ]);
        assert_eq!(code, 0);
        let results = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert_eq!(results.lines().count(), 3, "header + 2 rows: {results}");
        assert!(dir.path().join("sweep.config.toml").exists());
        let code = run_args(&[
            "fit", "--kind", "linear", "--in",
            dir.path().join("results.csv").to_str().unwrap(),
            "--x", "n", "--y", "mean_measurements", "--out", out,
        ]);
        assert_eq!(code, 0);
        let report = std::fs::read_to_string(dir.path().join("fit_linear.txt")).unwrap();
        assert!(report.contains("kind = linear"));
        assert!(report.contains("gamma1 = "));
        assert!(report.contains("converged = true"));
    }

    #[test]
    fn fit_rejects_unknown_kind_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("results.csv");
        emit_results(&[], &csv).unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run_args(&["fit", "--kind", "cubic", "--in", csv.to_str().unwrap(), "--out", out]),
            1
        );
        assert_eq!(
            run_args(&[
                "fit", "--kind", "linear", "--in", csv.to_str().unwrap(), "--x", "bogus",
                "--out", out
            ]),
            1
        );
    }

    #[test]
    fn plot_weights_and_growth_render() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run_args(&["plot", "--out", out, "weights", "--alpha", "0,0.5", "--half-depth", "6"]),
            0
        );
        let svg = std::fs::read_to_string(dir.path().join("weights.svg")).unwrap();
        assert!(svg.contains("<polyline"));
        assert_eq!(
            run_args(&["baseline", "--n", "3", "--max-depth", "6", "--samples", "5", "--out", out]),
            0
        );
        assert_eq!(
            run_args(&[
                "plot",
                "--out",
                out,
                "growth",
                "--in",
                dir.path().join("growth.csv").to_str().unwrap(),
            ]),
            0
        );
        assert!(dir.path().join("growth.svg").exists());
    }

    #[test]
    fn plot_results_with_fit_overlay() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<ResultRow> = (3..=8)
            .map(|n| ResultRow {
                n,
                d: 10,
                alpha: 0.1,
                mean_measurements: 0.9 * n as f64 + 0.3,
                stderr_measurements: 0.05,
                mean_weighted_layer: 3.0,
                mean_reward: 0.9,
                success_rate: 1.0,
                seed: 0,
            })
            .collect();
        let csv = dir.path().join("results.csv");
        emit_results(&rows, &csv).unwrap();
        let code = run_args(&[
            "plot",
            "--out",
            dir.path().to_str().unwrap(),
            "results",
            "--in",
            csv.to_str().unwrap(),
            "--x",
            "n",
            "--y",
            "mean_measurements",
            "--fit",
            "linear",
        ]);
        assert_eq!(code, 0);
        let svg = std::fs::read_to_string(dir.path().join("results.svg")).unwrap();
        assert!(svg.matches("<circle").count() >= 6);
        assert!(svg.contains("<polyline"));
    }

    #[test]
    fn plot_metrics_from_training_output() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(tiny_train(dir.path(), &[]), 0);
        let code = run_args(&[
            "plot",
            "--out",
            dir.path().to_str().unwrap(),
            "metrics",
            "--in",
            dir.path().join("metrics.csv").to_str().unwrap(),
            "--y",
            "entropy",
        ]);
        assert_eq!(code, 0);
        assert!(dir.path().join("metrics.svg").exists());
        let code = run_args(&[
            "plot",
            "--out",
            dir.path().to_str().unwrap(),
            "metrics",
            "--in",
            dir.path().join("metrics.csv").to_str().unwrap(),
            "--y",
            "no_such_column",
        ]);
        assert_eq!(code, 1);
    }
}

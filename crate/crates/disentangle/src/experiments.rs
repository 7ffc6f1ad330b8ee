//! Experiment drivers: policy evaluation, entanglement-growth baselines,
//! and `(n, d, alpha)` training sweeps, plus their CSV artifacts.
//!
//! Every driver is a pure function of its seed: a sweep row can be
//! reproduced from the `(n, d, alpha, seed)` it carries, and growth curves
//! re-run bit-identically.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::sample_brickwall;
use crate::clifford::CliffordTable;
use crate::env::{unscaled_reward, weighted_avg_layer, DisentangleEnv, EnvConfig};
use crate::nn::{log_softmax, sample_action, PolicyModel};
use crate::ppo::{train, TrainConfig};
use crate::seeds;
use crate::tableau::StabilizerTableau;
use crate::{Error, Result};

/// Something that picks actions during evaluation episodes.
pub trait Actor {
    fn act(&mut self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<usize>;
    /// Called at every episode start; stateful actors rewind here.
    fn reset(&mut self) {}
    /// Observation width the actor requires, if it has one.
    fn expected_obs_dim(&self) -> Option<usize> {
        None
    }
}

/// Samples from a trained policy.
pub struct PolicyActor<'a> {
    model: &'a PolicyModel,
}

impl<'a> PolicyActor<'a> {
    pub fn new(model: &'a PolicyModel) -> PolicyActor<'a> {
        PolicyActor { model }
    }
}

impl Actor for PolicyActor<'_> {
    fn act(&mut self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
        let (logits, _) = self.model.policy_forward(obs)?;
        Ok(sample_action(&log_softmax(&logits), rng))
    }

    fn expected_obs_dim(&self) -> Option<usize> {
        Some(self.model.input_dim())
    }
}

/// Uniform-random baseline.
pub struct RandomActor {
    n_actions: usize,
}

impl RandomActor {
    pub fn new(n_actions: usize) -> RandomActor {
        assert!(n_actions > 0);
        RandomActor { n_actions }
    }
}

impl Actor for RandomActor {
    fn act(&mut self, _obs: &[f64], rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(rng.gen_range(0..self.n_actions))
    }
}

/// Scripted oracle: measures every qubit in the final column, one per step.
/// Always reaches a product state in exactly `n` steps.
pub struct FillFinalColumnActor {
    n: usize,
    half_depth: usize,
    next_qubit: usize,
}

impl FillFinalColumnActor {
    pub fn new(cfg: &EnvConfig) -> FillFinalColumnActor {
        FillFinalColumnActor { n: cfg.n, half_depth: cfg.half_depth(), next_qubit: 0 }
    }
}

impl Actor for FillFinalColumnActor {
    fn act(&mut self, _obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<usize> {
        let action = self.next_qubit * self.half_depth + (self.half_depth - 1);
        self.next_qubit = (self.next_qubit + 1) % self.n;
        Ok(action)
    }

    fn reset(&mut self) {
        self.next_qubit = 0;
    }
}

/// Episode-averaged evaluation statistics. All means and standard errors are
/// over successful episodes only; `success_rate` reports how many episodes
/// that covers. With no successes they are NaN, never a silent zero.
#[derive(Clone, Copy, Debug)]
pub struct EvalStats {
    pub n_episodes: usize,
    pub success_count: usize,
    pub mean_measurements: f64,
    pub stderr_measurements: f64,
    pub mean_weighted_layer: f64,
    pub stderr_weighted_layer: f64,
    pub mean_unscaled_reward: f64,
    pub stderr_unscaled_reward: f64,
}

impl EvalStats {
    pub fn success_rate(&self) -> f64 {
        self.success_count as f64 / self.n_episodes as f64
    }
}

/// Sample mean and its standard error (ddof = 1). Empty input gives NaN
/// means; a single sample gives a NaN standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Runs `n_episodes` episodes of `actor` on a fresh environment. Action
/// sampling uses a stream derived from `seed`; circuits follow the
/// environment's own seed. Truncated episodes count as failures and
/// contribute nothing to the means.
pub fn evaluate_policy(
    actor: &mut dyn Actor,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::InvalidConfig("n_episodes must be >= 1".into()));
    }
    let mut env = DisentangleEnv::new(env_cfg.clone())?;
    if let Some(dim) = actor.expected_obs_dim() {
        if dim != env.obs_dim() {
            return Err(Error::DimensionMismatch { expected: dim, got: env.obs_dim() });
        }
    }
    let mut rng = seeds::rng_for(seed, seeds::STREAM_EVAL, 0);
    let mut measurements = Vec::new();
    let mut layers = Vec::new();
    let mut rewards = Vec::new();
    for _ in 0..n_episodes {
        let mut obs = env.reset()?;
        actor.reset();
        loop {
            let action = actor.act(&obs, &mut rng)?;
            let out = env.step(action)?;
            if out.terminated {
                let ep = env.episode().expect("episode state after step");
                measurements.push(ep.p.count() as f64);
                layers.push(weighted_avg_layer(&ep.p)?);
                rewards.push(unscaled_reward(&ep.p, env_cfg.alpha, env_cfg.penalty_orientation));
                break;
            }
            if out.truncated {
                break;
            }
            obs = out.obs;
        }
    }
    let (mean_measurements, stderr_measurements) = mean_stderr(&measurements);
    let (mean_weighted_layer, stderr_weighted_layer) = mean_stderr(&layers);
    let (mean_unscaled_reward, stderr_unscaled_reward) = mean_stderr(&rewards);
    Ok(EvalStats {
        n_episodes,
        success_count: measurements.len(),
        mean_measurements,
        stderr_measurements,
        mean_weighted_layer,
        stderr_weighted_layer,
        mean_unscaled_reward,
        stderr_unscaled_reward,
    })
}

/// One depth sample of a growth curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthPoint {
    pub depth: usize,
    pub mean_savg: f64,
    pub stderr: f64,
}

/// Mean no-measurement entanglement versus circuit depth for one size.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthCurve {
    pub n: usize,
    pub points: Vec<GrowthPoint>,
}

/// Measures mean prefix entropy of unmeasured brick-wall circuits at every
/// even depth up to `max_depth`, averaged over `n_samples` fresh circuits
/// per size. Each circuit is swept incrementally, so a curve's depths share
/// their circuits.
pub fn entanglement_growth(
    ns: &[usize],
    max_depth: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<GrowthCurve>> {
    if ns.is_empty() || n_samples == 0 {
        return Err(Error::InvalidConfig("need at least one size and one sample".into()));
    }
    if max_depth < 2 {
        return Err(Error::InvalidConfig(format!("max_depth must be >= 2, got {max_depth}")));
    }
    let d = max_depth - max_depth % 2;
    let table = CliffordTable::global();
    let mut curves = Vec::with_capacity(ns.len());
    for &n in ns {
        let n_seed = seeds::derive_seed(seed, seeds::STREAM_ENV, n as u64);
        // samples[k] collects S_avg at depth 2(k+1) across circuits.
        let mut samples = vec![Vec::with_capacity(n_samples); d / 2];
        for i in 0..n_samples {
            let circuit_seed = seeds::derive_seed(n_seed, seeds::STREAM_ENV, i as u64);
            let circuit = sample_brickwall(n, d, circuit_seed, table)?;
            let mut tableau = StabilizerTableau::new_computational_basis_state(n)?;
            for (idx, layer) in circuit.layers().iter().enumerate() {
                for placement in layer {
                    tableau.apply_gate(&placement.gate, placement.a, placement.b)?;
                }
                if (idx + 1) % 2 == 0 {
                    samples[(idx + 1) / 2 - 1].push(tableau.avg_prefix_entropy()?);
                }
            }
        }
        let mut points = vec![GrowthPoint { depth: 0, mean_savg: 0.0, stderr: 0.0 }];
        for (k, depth_samples) in samples.iter().enumerate() {
            let (mean_savg, stderr) = mean_stderr(depth_samples);
            points.push(GrowthPoint { depth: 2 * (k + 1), mean_savg, stderr });
        }
        curves.push(GrowthCurve { n, points });
    }
    Ok(curves)
}

/// One row of a sweep results table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub mean_measurements: f64,
    pub stderr_measurements: f64,
    pub mean_weighted_layer: f64,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub seed: u64,
}

/// A grid point that failed, with the error it produced.
#[derive(Clone, Debug)]
pub struct SweepFailure {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub error: String,
}

/// Outcome of a sweep: completed rows sorted by `(n, d, alpha)`, plus any
/// failed points.
#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<SweepFailure>,
}

/// Trains and evaluates one grid point. The row is a pure function of the
/// point and `master_seed`; `sweep` calls this for every point, and a single
/// point can be re-run in isolation to reproduce its row.
pub fn run_sweep_point(
    n: usize,
    d: usize,
    alpha: f64,
    env_template: &EnvConfig,
    train_template: &TrainConfig,
    n_episodes: usize,
    master_seed: u64,
) -> Result<ResultRow> {
    let point_seed = seeds::sweep_point_seed(master_seed, n, d, alpha);
    let mut env_cfg = EnvConfig {
        n,
        d,
        alpha,
        seed: point_seed,
        ..env_template.clone()
    };
    env_cfg.max_steps = n * d;
    let train_cfg = TrainConfig { seed: point_seed, ..train_template.clone() };
    let trained = train(&env_cfg, &train_cfg)?;
    // Evaluation draws circuits from its own stream, disjoint from training.
    let eval_env = EnvConfig {
        seed: seeds::derive_seed(point_seed, seeds::STREAM_EVAL, 1),
        ..env_cfg
    };
    let mut actor = PolicyActor::new(&trained.model);
    let stats = evaluate_policy(&mut actor, &eval_env, n_episodes, point_seed)?;
    Ok(ResultRow {
        n,
        d,
        alpha,
        mean_measurements: stats.mean_measurements,
        stderr_measurements: stats.stderr_measurements,
        mean_weighted_layer: stats.mean_weighted_layer,
        mean_reward: stats.mean_unscaled_reward,
        success_rate: stats.success_rate(),
        seed: point_seed,
    })
}

/// Trains and evaluates every point of the `ns x ds x alphas` grid. Points
/// run in parallel and independently; failures are collected, not fatal.
pub fn sweep(
    ns: &[usize],
    ds: &[usize],
    alphas: &[f64],
    env_template: &EnvConfig,
    train_template: &TrainConfig,
    n_episodes: usize,
    master_seed: u64,
) -> Result<SweepOutcome> {
    if ns.is_empty() || ds.is_empty() || alphas.is_empty() {
        return Err(Error::InvalidConfig("sweep grid is empty".into()));
    }
    let mut grid = Vec::new();
    for &n in ns {
        for &d in ds {
            for &alpha in alphas {
                grid.push((n, d, alpha));
            }
        }
    }
    let results: Vec<(usize, usize, f64, Result<ResultRow>)> = grid
        .par_iter()
        .map(|&(n, d, alpha)| {
            let row =
                run_sweep_point(n, d, alpha, env_template, train_template, n_episodes, master_seed);
            (n, d, alpha, row)
        })
        .collect();
    let mut outcome = SweepOutcome::default();
    for (n, d, alpha, row) in results {
        match row {
            Ok(row) => outcome.rows.push(row),
            Err(e) => outcome.failures.push(SweepFailure { n, d, alpha, error: e.to_string() }),
        }
    }
    sort_rows(&mut outcome.rows);
    Ok(outcome)
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (a.n, a.d, a.alpha.to_bits()).cmp(&(b.n, b.d, b.alpha.to_bits()))
    });
}

pub const RESULTS_HEADER: &str =
    "n,d,alpha,mean_measurements,stderr_measurements,mean_weighted_layer,mean_reward,success_rate,seed";
pub const GROWTH_HEADER: &str = "n,depth,mean_savg,stderr";

/// Serializes rows to CSV, sorted by `(n, d, alpha)`.
pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in &sorted {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.d,
            r.alpha,
            r.mean_measurements,
            r.stderr_measurements,
            r.mean_weighted_layer,
            r.mean_reward,
            r.success_rate,
            r.seed
        ));
    }
    out
}

pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(results_to_csv(rows).as_bytes())?;
    Ok(())
}

/// Parses a results CSV written by [`emit_results`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Malformed("empty results file".into()))?;
    if header != RESULTS_HEADER {
        return Err(Error::Malformed(format!("unexpected results header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Malformed(format!("row {} has {} fields", i + 2, fields.len())));
        }
        let bad = |what: &str| Error::Malformed(format!("row {}: bad {what}", i + 2));
        rows.push(ResultRow {
            n: fields[0].parse().map_err(|_| bad("n"))?,
            d: fields[1].parse().map_err(|_| bad("d"))?,
            alpha: fields[2].parse().map_err(|_| bad("alpha"))?,
            mean_measurements: fields[3].parse().map_err(|_| bad("mean_measurements"))?,
            stderr_measurements: fields[4].parse().map_err(|_| bad("stderr_measurements"))?,
            mean_weighted_layer: fields[5].parse().map_err(|_| bad("mean_weighted_layer"))?,
            mean_reward: fields[6].parse().map_err(|_| bad("mean_reward"))?,
            success_rate: fields[7].parse().map_err(|_| bad("success_rate"))?,
            seed: fields[8].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(rows)
}

/// Extracts a named column from result rows, for fitting.
pub fn results_column(rows: &[ResultRow], name: &str) -> Result<Vec<f64>> {
    let get: fn(&ResultRow) -> f64 = match name {
        "n" => |r| r.n as f64,
        "d" => |r| r.d as f64,
        "half_depth" => |r| r.d as f64 / 2.0,
        "alpha" => |r| r.alpha,
        "mean_measurements" => |r| r.mean_measurements,
        "stderr_measurements" => |r| r.stderr_measurements,
        "mean_weighted_layer" => |r| r.mean_weighted_layer,
        "mean_reward" => |r| r.mean_reward,
        "success_rate" => |r| r.success_rate,
        _ => {
            return Err(Error::InvalidConfig(format!(
                "unknown column {name:?}; expected one of n, d, half_depth, alpha, \
                 mean_measurements, stderr_measurements, mean_weighted_layer, mean_reward, \
                 success_rate"
            )))
        }
    };
    Ok(rows.iter().map(get).collect())
}

/// Serializes growth curves to CSV, ordered by `(n, depth)`.
pub fn growth_to_csv(curves: &[GrowthCurve]) -> String {
    let mut sorted: Vec<&GrowthCurve> = curves.iter().collect();
    sorted.sort_by_key(|c| c.n);
    let mut out = String::from(GROWTH_HEADER);
    out.push('\n');
    for curve in sorted {
        for p in &curve.points {
            out.push_str(&format!("{},{},{},{}\n", curve.n, p.depth, p.mean_savg, p.stderr));
        }
    }
    out
}

pub fn emit_growth(curves: &[GrowthCurve], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(growth_to_csv(curves).as_bytes())?;
    Ok(())
}

/// Parses a growth CSV written by [`emit_growth`], regrouping rows by `n`.
pub fn read_growth(path: &Path) -> Result<Vec<GrowthCurve>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Malformed("empty growth file".into()))?;
    if header != GROWTH_HEADER {
        return Err(Error::Malformed(format!("unexpected growth header {header:?}")));
    }
    let mut curves: Vec<GrowthCurve> = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Malformed(format!("row {} has {} fields", i + 2, fields.len())));
        }
        let bad = |what: &str| Error::Malformed(format!("row {}: bad {what}", i + 2));
        let n: usize = fields[0].parse().map_err(|_| bad("n"))?;
        let point = GrowthPoint {
            depth: fields[1].parse().map_err(|_| bad("depth"))?,
            mean_savg: fields[2].parse().map_err(|_| bad("mean_savg"))?,
            stderr: fields[3].parse().map_err(|_| bad("stderr"))?,
        };
        match curves.last_mut() {
            Some(curve) if curve.n == n => curve.points.push(point),
            _ => curves.push(GrowthCurve { n, points: vec![point] }),
        }
    }
    Ok(curves)
}

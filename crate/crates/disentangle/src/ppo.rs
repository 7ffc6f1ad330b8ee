//! Proximal policy optimization, written out in full.
//!
//! One update collects `n_steps` transitions from each of `n_envs`
//! environments (env-major, so the parallel and serial schedules are
//! bit-identical), computes GAE advantages per environment segment, then runs
//! `n_epochs` of shuffled minibatch Adam steps on the clipped surrogate loss
//!
//! `L = -E[min(r·Â, clip(r, 1±ε)·Â)] + value_coef·E[(V-G)²] - e_c·E[H]`
//!
//! with gradients derived analytically through both heads. Episode ends
//! (terminal or truncated) are treated alike as boundaries: no value
//! bootstrap crosses them. All randomness is derived from the config seeds,
//! so a run is exactly reproducible.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{DisentangleEnv, EnvConfig};
use crate::nn::{
    clip_global_norm, entropy_from_log_probs, log_softmax, sample_action, Activations, Adam,
    PolicyModel, HIDDEN_DIM,
};
use crate::seeds;
use crate::{Error, Result};

const MODEL_FORMAT: &str = "policy-model";
const MODEL_VERSION: u32 = 1;
/// Episode statistics are averaged over a sliding window of this many
/// completed episodes.
const EPISODE_WINDOW: usize = 100;

/// Training hyperparameters.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total environment steps to collect (t_s).
    pub total_timesteps: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Steps collected per environment per update.
    pub n_steps: usize,
    pub minibatch_size: usize,
    pub n_epochs: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            total_timesteps: 50_000,
            learning_rate: 1e-3,
            entropy_coef: 1e-2,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            n_steps: 2048,
            minibatch_size: 64,
            n_epochs: 10,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            n_envs: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_envs == 0 || self.n_steps == 0 {
            return err("n_envs and n_steps must be >= 1".into());
        }
        if self.total_timesteps < self.n_steps * self.n_envs {
            return err(format!(
                "total_timesteps {} is below one rollout of {}",
                self.total_timesteps,
                self.n_steps * self.n_envs
            ));
        }
        if self.minibatch_size == 0 || self.minibatch_size > self.n_steps * self.n_envs {
            return err(format!("minibatch_size {} must be in [1, rollout size]", self.minibatch_size));
        }
        if self.n_epochs == 0 {
            return err("n_epochs must be >= 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return err(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if !self.clip_eps.is_finite() || self.clip_eps <= 0.0 {
            return err(format!("clip_eps must be > 0, got {}", self.clip_eps));
        }
        if !(0.0 < self.gamma && self.gamma <= 1.0) {
            return err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return err(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return err("value_coef and entropy_coef must be >= 0".into());
        }
        if !self.max_grad_norm.is_finite() || self.max_grad_norm <= 0.0 {
            return err(format!("max_grad_norm must be > 0, got {}", self.max_grad_norm));
        }
        Ok(())
    }
}

/// Transitions from one update, env-major: the segment of environment `e`
/// occupies indices `e*n_steps .. (e+1)*n_steps`.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    pub obs_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// True when the episode ended (terminal or truncated) after this step.
    pub boundaries: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    /// Checks the all-arrays-same-length invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let ok = self.log_probs.len() == n
            && self.rewards.len() == n
            && self.values.len() == n
            && self.boundaries.len() == n
            && self.advantages.len() == n
            && self.returns.len() == n
            && self.obs.len() == n * self.obs_dim;
        if ok {
            Ok(())
        } else {
            Err(Error::Malformed("rollout buffer arrays have mismatched lengths".into()))
        }
    }
}

/// Generalized advantage estimation over one environment segment.
///
/// `bootstrap` is the value estimate of the observation after the final step;
/// it is masked away when that step closed an episode. Returns
/// `(advantages, returns)` with `returns = advantages + values`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    boundaries: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && boundaries.len() == n);
    let mut advantages = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let mask = if boundaries[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * mask - values[t];
        acc = delta + gamma * lambda * mask * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

/// A minibatch gathered from the rollout buffer.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn gather(buffer: &RolloutBuffer, indices: &[usize], norm_adv: &[f64]) -> Batch {
        let mut batch = Batch {
            obs_dim: buffer.obs_dim,
            obs: Vec::with_capacity(indices.len() * buffer.obs_dim),
            actions: Vec::with_capacity(indices.len()),
            old_log_probs: Vec::with_capacity(indices.len()),
            advantages: Vec::with_capacity(indices.len()),
            returns: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            batch.obs.extend_from_slice(buffer.obs_row(i));
            batch.actions.push(buffer.actions[i]);
            batch.old_log_probs.push(buffer.log_probs[i]);
            batch.advantages.push(norm_adv[i]);
            batch.returns.push(buffer.returns[i]);
        }
        batch
    }

    fn obs_row(&self, k: usize) -> &[f64] {
        &self.obs[k * self.obs_dim..(k + 1) * self.obs_dim]
    }
}

/// Mean loss components over a batch or update. `value_loss` is the raw
/// squared error, before `value_coef`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

impl LossStats {
    pub fn total(&self, cfg: &TrainConfig) -> f64 {
        self.policy_loss + cfg.value_coef * self.value_loss - cfg.entropy_coef * self.entropy
    }
}

/// Scalar clipped-surrogate loss of `model` on `batch`. The finite-difference
/// reference for [`clipped_loss_grad`].
pub fn clipped_loss(model: &PolicyModel, batch: &Batch, cfg: &TrainConfig) -> Result<f64> {
    Ok(loss_pieces(model, batch, cfg, None)?.total(cfg))
}

/// Mean loss statistics and the analytic gradient of the total loss with
/// respect to every parameter.
pub fn clipped_loss_grad(
    model: &PolicyModel,
    batch: &Batch,
    cfg: &TrainConfig,
) -> Result<(LossStats, Vec<f64>)> {
    let mut grads = vec![0.0; model.n_params()];
    let stats = loss_pieces(model, batch, cfg, Some(&mut grads))?;
    Ok((stats, grads))
}

fn loss_pieces(
    model: &PolicyModel,
    batch: &Batch,
    cfg: &TrainConfig,
    mut grads: Option<&mut Vec<f64>>,
) -> Result<LossStats> {
    assert!(!batch.is_empty());
    let k = batch.len() as f64;
    let mut stats = LossStats::default();
    for s in 0..batch.len() {
        let act: Activations = model.forward(batch.obs_row(s))?;
        let log_probs = log_softmax(&act.logits);
        let action = batch.actions[s];
        if action >= model.n_actions() {
            return Err(Error::ActionOutOfRange { action, n_actions: model.n_actions() });
        }
        let adv = batch.advantages[s];
        let ratio = (log_probs[action] - batch.old_log_probs[s]).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let surr1 = ratio * adv;
        let surr2 = clipped * adv;
        let entropy = entropy_from_log_probs(&log_probs);
        let value_err = act.value - batch.returns[s];
        stats.policy_loss += -surr1.min(surr2) / k;
        stats.value_loss += value_err * value_err / k;
        stats.entropy += entropy / k;
        if !(ratio.is_finite() && value_err.is_finite() && entropy.is_finite()) {
            return Err(Error::Diverged("non-finite loss term".into()));
        }
        if let Some(grads) = grads.as_deref_mut() {
            let probs: Vec<f64> = log_probs.iter().map(|lp| lp.exp()).collect();
            let mut dlogits = vec![0.0; model.n_actions()];
            // Policy term: gradient flows only through the unclipped branch;
            // when the clipped branch is strictly smaller its derivative in
            // the flat region is zero.
            if surr1 <= surr2 {
                let factor = -adv * ratio / k;
                for (a, &p) in dlogits.iter_mut().zip(&probs) {
                    *a += factor * -p;
                }
                dlogits[action] += factor;
            }
            // Entropy bonus: d(-e_c·H)/dz_j = e_c · p_j (log p_j + H).
            for j in 0..model.n_actions() {
                dlogits[j] += cfg.entropy_coef * probs[j] * (log_probs[j] + entropy) / k;
            }
            let dvalue = cfg.value_coef * 2.0 * value_err / k;
            model.backward(&act, &dlogits, dvalue, grads);
        }
    }
    Ok(stats)
}

/// One PPO update: per-update advantage normalization, then `n_epochs`
/// shuffled passes of clipped minibatch gradient steps through `opt`.
pub fn ppo_update(
    model: &mut PolicyModel,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossStats> {
    buffer.validate()?;
    let total = buffer.len();
    let mean = buffer.advantages.iter().sum::<f64>() / total as f64;
    let var = buffer.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / total as f64;
    let std = var.max(1e-8).sqrt();
    let norm_adv: Vec<f64> = buffer.advantages.iter().map(|a| (a - mean) / std).collect();

    let mut indices: Vec<usize> = (0..total).collect();
    let mut sum = LossStats::default();
    let mut samples = 0usize;
    for _ in 0..cfg.n_epochs {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch_size) {
            let batch = Batch::gather(buffer, chunk, &norm_adv);
            let (stats, mut grads) = clipped_loss_grad(model, &batch, cfg)?;
            if !grads.iter().all(|g| g.is_finite()) {
                return Err(Error::Diverged("non-finite gradient".into()));
            }
            clip_global_norm(&mut grads, cfg.max_grad_norm);
            opt.step(model.params_mut(), &grads, cfg.learning_rate);
            let w = chunk.len() as f64;
            sum.policy_loss += stats.policy_loss * w;
            sum.value_loss += stats.value_loss * w;
            sum.entropy += stats.entropy * w;
            samples += chunk.len();
        }
    }
    let k = samples as f64;
    Ok(LossStats {
        policy_loss: sum.policy_loss / k,
        value_loss: sum.value_loss / k,
        entropy: sum.entropy / k,
    })
}

/// One row of training metrics, written after every update.
#[derive(Clone, Copy, Debug)]
pub struct MetricsRow {
    pub timestep: usize,
    pub ep_len_mean: f64,
    pub ep_rew_mean: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Metrics for a whole training run.
#[derive(Clone, Debug, Default)]
pub struct TrainMetrics {
    pub rows: Vec<MetricsRow>,
}

impl TrainMetrics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestep,ep_len_mean,ep_rew_mean,policy_loss,value_loss,entropy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.timestep, r.ep_len_mean, r.ep_rew_mean, r.policy_loss, r.value_loss, r.entropy
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// A trained model with its metrics.
pub struct TrainResult {
    pub model: PolicyModel,
    pub metrics: TrainMetrics,
}

struct EnvSlot {
    env: DisentangleEnv,
    action_rng: ChaCha8Rng,
    obs: Vec<f64>,
    ep_len: usize,
    ep_rew: f64,
}

impl EnvSlot {
    fn new(env_cfg: &EnvConfig, cfg: &TrainConfig, index: usize) -> Result<EnvSlot> {
        let mut slot_cfg = env_cfg.clone();
        slot_cfg.seed = seeds::derive_seed(env_cfg.seed, seeds::STREAM_ENV, index as u64);
        let mut env = DisentangleEnv::new(slot_cfg)?;
        let obs = env.reset()?;
        Ok(EnvSlot {
            env,
            action_rng: seeds::rng_for(cfg.seed, seeds::STREAM_ACTIONS, index as u64),
            obs,
            ep_len: 0,
            ep_rew: 0.0,
        })
    }
}

struct Segment {
    obs: Vec<f64>,
    actions: Vec<usize>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    boundaries: Vec<bool>,
    bootstrap: f64,
    /// (length, total reward) of episodes completed in this segment.
    episodes: Vec<(usize, f64)>,
}

fn collect_segment(model: &PolicyModel, slot: &mut EnvSlot, n_steps: usize) -> Result<Segment> {
    let dim = slot.obs.len();
    let mut seg = Segment {
        obs: Vec::with_capacity(n_steps * dim),
        actions: Vec::with_capacity(n_steps),
        log_probs: Vec::with_capacity(n_steps),
        rewards: Vec::with_capacity(n_steps),
        values: Vec::with_capacity(n_steps),
        boundaries: Vec::with_capacity(n_steps),
        bootstrap: 0.0,
        episodes: Vec::new(),
    };
    for _ in 0..n_steps {
        let (logits, value) = model.policy_forward(&slot.obs)?;
        let log_probs = log_softmax(&logits);
        let action = sample_action(&log_probs, &mut slot.action_rng);
        let out = slot.env.step(action)?;
        seg.obs.extend_from_slice(&slot.obs);
        seg.actions.push(action);
        seg.log_probs.push(log_probs[action]);
        seg.rewards.push(out.reward);
        seg.values.push(value);
        let done = out.terminated || out.truncated;
        seg.boundaries.push(done);
        slot.ep_len += 1;
        slot.ep_rew += out.reward;
        if done {
            seg.episodes.push((slot.ep_len, slot.ep_rew));
            slot.ep_len = 0;
            slot.ep_rew = 0.0;
            slot.obs = slot.env.reset()?;
        } else {
            slot.obs = out.obs;
        }
    }
    seg.bootstrap = model.policy_forward(&slot.obs)?.1;
    Ok(seg)
}

/// Trains a fresh policy on the environment. Fully reproducible from
/// `cfg.seed` (model init, action sampling, shuffling) and `env_cfg.seed`
/// (per-env circuit and measurement streams); the parallel env schedule does
/// not affect the result.
pub fn train(env_cfg: &EnvConfig, cfg: &TrainConfig) -> Result<TrainResult> {
    env_cfg.validate()?;
    cfg.validate()?;
    let input_dim = env_cfg.n_actions();
    let mut init_rng = seeds::rng_for(cfg.seed, seeds::STREAM_INIT, 0);
    let mut model = PolicyModel::new(input_dim, input_dim, HIDDEN_DIM, &mut init_rng);
    let mut opt = Adam::new(model.n_params());
    let mut shuffle_rng = seeds::rng_for(cfg.seed, seeds::STREAM_SHUFFLE, 0);
    let mut slots = (0..cfg.n_envs)
        .map(|e| EnvSlot::new(env_cfg, cfg, e))
        .collect::<Result<Vec<_>>>()?;
    let updates = cfg.total_timesteps / (cfg.n_steps * cfg.n_envs);
    let mut window: VecDeque<(usize, f64)> = VecDeque::with_capacity(EPISODE_WINDOW);
    let mut metrics = TrainMetrics::default();
    for update in 0..updates {
        let segments: Vec<Segment> = if cfg.n_envs > 1 {
            slots
                .par_iter_mut()
                .map(|slot| collect_segment(&model, slot, cfg.n_steps))
                .collect::<Result<Vec<_>>>()?
        } else {
            slots
                .iter_mut()
                .map(|slot| collect_segment(&model, slot, cfg.n_steps))
                .collect::<Result<Vec<_>>>()?
        };
        let mut buffer = RolloutBuffer { obs_dim: input_dim, ..RolloutBuffer::default() };
        for seg in &segments {
            let (adv, ret) =
                gae(&seg.rewards, &seg.values, &seg.boundaries, seg.bootstrap, cfg.gamma, cfg.gae_lambda);
            buffer.obs.extend_from_slice(&seg.obs);
            buffer.actions.extend_from_slice(&seg.actions);
            buffer.log_probs.extend_from_slice(&seg.log_probs);
            buffer.rewards.extend_from_slice(&seg.rewards);
            buffer.values.extend_from_slice(&seg.values);
            buffer.boundaries.extend_from_slice(&seg.boundaries);
            buffer.advantages.extend(adv);
            buffer.returns.extend(ret);
            for &ep in &seg.episodes {
                if window.len() == EPISODE_WINDOW {
                    window.pop_front();
                }
                window.push_back(ep);
            }
        }
        let stats = ppo_update(&mut model, &mut opt, &buffer, cfg, &mut shuffle_rng)?;
        let (ep_len_mean, ep_rew_mean) = if window.is_empty() {
            (0.0, 0.0)
        } else {
            let k = window.len() as f64;
            (
                window.iter().map(|&(l, _)| l as f64).sum::<f64>() / k,
                window.iter().map(|&(_, r)| r).sum::<f64>() / k,
            )
        };
        metrics.rows.push(MetricsRow {
            timestep: (update + 1) * cfg.n_steps * cfg.n_envs,
            ep_len_mean,
            ep_rew_mean,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        });
    }
    Ok(TrainResult { model, metrics })
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    train_config: TrainConfig,
    input_dim: usize,
    hidden_dim: usize,
    n_actions: usize,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Writes the model and its training config as a versioned, self-describing
/// text document. Weights round-trip exactly.
pub fn save_model(model: &PolicyModel, cfg: &TrainConfig, path: &Path) -> Result<()> {
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        train_config: cfg.clone(),
        input_dim: model.input_dim(),
        hidden_dim: model.hidden_dim(),
        n_actions: model.n_actions(),
        layers: model
            .layers()
            .into_iter()
            .map(|(name, shape, data)| LayerDoc { name: name.into(), shape, data: data.to_vec() })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("model document serializes");
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads a model document written by [`save_model`].
pub fn load_model(path: &Path) -> Result<(PolicyModel, TrainConfig)> {
    let text = std::fs::read_to_string(path)?;
    let doc: ModelDoc = serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
    if doc.format != MODEL_FORMAT {
        return Err(Error::Malformed(format!("unexpected document format {:?}", doc.format)));
    }
    if doc.version != MODEL_VERSION {
        return Err(Error::FormatVersion { expected: MODEL_VERSION, got: doc.version });
    }
    let probe = PolicyModel::from_params(
        doc.input_dim,
        doc.n_actions,
        doc.hidden_dim,
        vec![0.0; expected_len(&doc)?],
    )?;
    let mut params = Vec::with_capacity(probe.n_params());
    let expected = probe.layers();
    if doc.layers.len() != expected.len() {
        return Err(Error::Malformed(format!(
            "expected {} layers, found {}",
            expected.len(),
            doc.layers.len()
        )));
    }
    for (layer, (name, shape, block)) in doc.layers.iter().zip(expected) {
        if layer.name != name || layer.shape != shape {
            return Err(Error::Malformed(format!(
                "layer {:?} with shape {:?} does not match expected {name:?} {shape:?}",
                layer.name, layer.shape
            )));
        }
        if layer.data.len() != block.len() {
            return Err(Error::DimensionMismatch { expected: block.len(), got: layer.data.len() });
        }
        params.extend_from_slice(&layer.data);
    }
    let model = PolicyModel::from_params(doc.input_dim, doc.n_actions, doc.hidden_dim, params)?;
    Ok((model, doc.train_config))
}

fn expected_len(doc: &ModelDoc) -> Result<usize> {
    let h = doc.hidden_dim;
    let i = doc.input_dim;
    let a = doc.n_actions;
    if h == 0 || i == 0 || a == 0 {
        return Err(Error::Malformed("zero-sized layer shape".into()));
    }
    Ok(h * i + h + h * h + h + a * h + a + h + 1)
}

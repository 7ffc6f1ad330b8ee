//! Policy/value network with hand-written forward and backward passes.
//!
//! The model is a shared trunk of two tanh layers feeding a policy head
//! (one logit per action) and a scalar value head. Parameters live in one
//! flat `f64` vector so that gradient clipping, the Adam update, and
//! finite-difference checks can treat them uniformly. Everything is `f64`;
//! training must be bit-reproducible from its seeds.

use rand::Rng;

use crate::{Error, Result};

/// Hidden width of both trunk layers.
pub const HIDDEN_DIM: usize = 64;

/// Offsets of each parameter block in the flat vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    input_dim: usize,
    hidden_dim: usize,
    n_actions: usize,
}

impl Layout {
    fn w1(&self) -> (usize, usize) {
        (0, self.hidden_dim * self.input_dim)
    }
    fn b1(&self) -> (usize, usize) {
        let (o, l) = self.w1();
        (o + l, self.hidden_dim)
    }
    fn w2(&self) -> (usize, usize) {
        let (o, l) = self.b1();
        (o + l, self.hidden_dim * self.hidden_dim)
    }
    fn b2(&self) -> (usize, usize) {
        let (o, l) = self.w2();
        (o + l, self.hidden_dim)
    }
    fn wp(&self) -> (usize, usize) {
        let (o, l) = self.b2();
        (o + l, self.n_actions * self.hidden_dim)
    }
    fn bp(&self) -> (usize, usize) {
        let (o, l) = self.wp();
        (o + l, self.n_actions)
    }
    fn wv(&self) -> (usize, usize) {
        let (o, l) = self.bp();
        (o + l, self.hidden_dim)
    }
    fn bv(&self) -> (usize, usize) {
        let (o, l) = self.wv();
        (o + l, 1)
    }
    fn total(&self) -> usize {
        let (o, l) = self.bv();
        o + l
    }
}

/// The policy/value network.
#[derive(Clone, Debug)]
pub struct PolicyModel {
    input_dim: usize,
    hidden_dim: usize,
    n_actions: usize,
    params: Vec<f64>,
}

/// Activations cached by [`PolicyModel::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Activations {
    pub obs: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

impl PolicyModel {
    /// Random initialization: Xavier-uniform trunk and value head, policy
    /// head scaled down by 100x so the initial policy is near uniform.
    pub fn new(
        input_dim: usize,
        n_actions: usize,
        hidden_dim: usize,
        rng: &mut impl Rng,
    ) -> PolicyModel {
        assert!(input_dim >= 1 && n_actions >= 1 && hidden_dim >= 1);
        let layout = Layout { input_dim, hidden_dim, n_actions };
        let mut params = vec![0.0; layout.total()];
        let mut fill = |range: (usize, usize), fan_in: usize, fan_out: usize, scale: f64| {
            let bound = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range.0..range.0 + range.1] {
                *p = rng.gen_range(-bound..=bound);
            }
        };
        fill(layout.w1(), input_dim, hidden_dim, 1.0);
        fill(layout.w2(), hidden_dim, hidden_dim, 1.0);
        fill(layout.wp(), hidden_dim, n_actions, 0.01);
        fill(layout.wv(), hidden_dim, 1, 1.0);
        PolicyModel { input_dim, hidden_dim, n_actions, params }
    }

    /// Rebuilds a model from raw parts (model file loading).
    pub fn from_params(
        input_dim: usize,
        n_actions: usize,
        hidden_dim: usize,
        params: Vec<f64>,
    ) -> Result<PolicyModel> {
        let layout = Layout { input_dim, hidden_dim, n_actions };
        if params.len() != layout.total() {
            return Err(Error::DimensionMismatch { expected: layout.total(), got: params.len() });
        }
        Ok(PolicyModel { input_dim, hidden_dim, n_actions, params })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layout(&self) -> Layout {
        Layout { input_dim: self.input_dim, hidden_dim: self.hidden_dim, n_actions: self.n_actions }
    }

    /// Full forward pass, keeping the activations.
    pub fn forward(&self, obs: &[f64]) -> Result<Activations> {
        if obs.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: obs.len() });
        }
        let l = self.layout();
        let p = &self.params;
        let h1: Vec<f64> = (0..self.hidden_dim)
            .map(|i| {
                let row = l.w1().0 + i * self.input_dim;
                let z: f64 = obs
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| p[row + j] * x)
                    .sum::<f64>()
                    + p[l.b1().0 + i];
                z.tanh()
            })
            .collect();
        let h2: Vec<f64> = (0..self.hidden_dim)
            .map(|i| {
                let row = l.w2().0 + i * self.hidden_dim;
                let z: f64 = h1.iter().enumerate().map(|(j, &x)| p[row + j] * x).sum::<f64>()
                    + p[l.b2().0 + i];
                z.tanh()
            })
            .collect();
        let logits: Vec<f64> = (0..self.n_actions)
            .map(|i| {
                let row = l.wp().0 + i * self.hidden_dim;
                h2.iter().enumerate().map(|(j, &x)| p[row + j] * x).sum::<f64>() + p[l.bp().0 + i]
            })
            .collect();
        let value = h2
            .iter()
            .enumerate()
            .map(|(j, &x)| p[l.wv().0 + j] * x)
            .sum::<f64>()
            + p[l.bv().0];
        Ok(Activations { obs: obs.to_vec(), h1, h2, logits, value })
    }

    /// Action logits and state value. Fails on non-finite outputs, the
    /// signature of a diverged model.
    pub fn policy_forward(&self, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
        let act = self.forward(obs)?;
        if !act.value.is_finite() || act.logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Diverged("non-finite network output".into()));
        }
        Ok((act.logits, act.value))
    }

    /// Accumulates parameter gradients into `grads` given the loss gradients
    /// at both heads. `grads` must have `n_params` entries.
    pub fn backward(
        &self,
        act: &Activations,
        dlogits: &[f64],
        dvalue: f64,
        grads: &mut [f64],
    ) {
        assert_eq!(dlogits.len(), self.n_actions);
        assert_eq!(grads.len(), self.params.len());
        let l = self.layout();
        let p = &self.params;
        let mut dh2 = vec![0.0; self.hidden_dim];
        // Policy head.
        for i in 0..self.n_actions {
            let row = l.wp().0 + i * self.hidden_dim;
            for j in 0..self.hidden_dim {
                grads[row + j] += dlogits[i] * act.h2[j];
                dh2[j] += dlogits[i] * p[row + j];
            }
            grads[l.bp().0 + i] += dlogits[i];
        }
        // Value head.
        for j in 0..self.hidden_dim {
            grads[l.wv().0 + j] += dvalue * act.h2[j];
            dh2[j] += dvalue * p[l.wv().0 + j];
        }
        grads[l.bv().0] += dvalue;
        // Trunk layer 2.
        let mut dh1 = vec![0.0; self.hidden_dim];
        for i in 0..self.hidden_dim {
            let dz = dh2[i] * (1.0 - act.h2[i] * act.h2[i]);
            let row = l.w2().0 + i * self.hidden_dim;
            for j in 0..self.hidden_dim {
                grads[row + j] += dz * act.h1[j];
                dh1[j] += dz * p[row + j];
            }
            grads[l.b2().0 + i] += dz;
        }
        // Trunk layer 1.
        for i in 0..self.hidden_dim {
            let dz = dh1[i] * (1.0 - act.h1[i] * act.h1[i]);
            let row = l.w1().0 + i * self.input_dim;
            for j in 0..self.input_dim {
                grads[row + j] += dz * act.obs[j];
            }
            grads[l.b1().0 + i] += dz;
        }
    }

    /// Named parameter blocks with shapes, row-major, for serialization.
    pub fn layers(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        let l = self.layout();
        let slice = |r: (usize, usize)| &self.params[r.0..r.0 + r.1];
        vec![
            ("w1", vec![self.hidden_dim, self.input_dim], slice(l.w1())),
            ("b1", vec![self.hidden_dim], slice(l.b1())),
            ("w2", vec![self.hidden_dim, self.hidden_dim], slice(l.w2())),
            ("b2", vec![self.hidden_dim], slice(l.b2())),
            ("wp", vec![self.n_actions, self.hidden_dim], slice(l.wp())),
            ("bp", vec![self.n_actions], slice(l.bp())),
            ("wv", vec![1, self.hidden_dim], slice(l.wv())),
            ("bv", vec![1], slice(l.bv())),
        ]
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&l| l - log_sum).collect()
}

/// Policy entropy in nats from log-probabilities.
pub fn entropy_from_log_probs(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|&lp| lp.exp() * lp).sum::<f64>()
}

/// Samples an action index from log-probabilities.
pub fn sample_action(log_probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Greedy argmax action (ties to the lowest index).
pub fn argmax_action(log_probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &lp) in log_probs.iter().enumerate() {
        if lp > log_probs[best] {
            best = i;
        }
    }
    best
}

/// Scales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

/// Adam optimizer state (β₁ = 0.9, β₂ = 0.999, ε = 1e-8, bias-corrected).
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n_params: usize) -> Adam {
        Adam { m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grads[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model(seed: u64) -> PolicyModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolicyModel::new(4, 5, 6, &mut rng)
    }

    #[test]
    fn zero_parameters_give_uniform_policy_and_zero_value() {
        let model = PolicyModel::from_params(3, 4, 8, vec![0.0; {
            let l = Layout { input_dim: 3, hidden_dim: 8, n_actions: 4 };
            l.total()
        }])
        .unwrap();
        let (logits, value) = model.policy_forward(&[0.3, -0.2, 0.9]).unwrap();
        assert!(logits.iter().all(|&l| l == 0.0));
        assert_eq!(value, 0.0);
        let lp = log_softmax(&logits);
        for &l in &lp {
            assert!((l - (1.0f64 / 4.0).ln()).abs() < 1e-12);
        }
        assert!((entropy_from_log_probs(&lp) - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn forward_rejects_wrong_dimension() {
        let model = toy_model(1);
        assert!(model.forward(&[0.0; 3]).is_err());
    }

    #[test]
    fn log_softmax_is_normalized_and_shift_invariant() {
        let logits = vec![1.5, -2.0, 0.3, 900.0, -900.0];
        let lp = log_softmax(&logits);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|l| l + 123.0).collect();
        for (a, b) in lp.iter().zip(log_softmax(&shifted)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_follows_the_distribution() {
        let lp = log_softmax(&[0.0, (3.0f64).ln()]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 40_000;
        let ones = (0..trials).filter(|_| sample_action(&lp, &mut rng) == 1).count();
        let freq = ones as f64 / trials as f64;
        assert!((freq - 0.75).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn backward_matches_central_differences() {
        // Composite loss exercising both heads: -logp[a] + 0.5 v^2.
        let model = toy_model(3);
        let obs = [0.2, -0.7, 1.1, 0.4];
        let action = 2;
        let loss = |m: &PolicyModel| {
            let act = m.forward(&obs).unwrap();
            let lp = log_softmax(&act.logits);
            -lp[action] + 0.5 * act.value * act.value
        };
        let act = model.forward(&obs).unwrap();
        let lp = log_softmax(&act.logits);
        let mut dlogits: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        dlogits[action] -= 1.0;
        let mut grads = vec![0.0; model.n_params()];
        model.backward(&act, &dlogits, act.value, &mut grads);

        let h = 1e-6;
        let mut fd = vec![0.0; model.n_params()];
        let mut probe = model.clone();
        for i in 0..probe.n_params() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let plus = loss(&probe);
            probe.params_mut()[i] = orig - h;
            let minus = loss(&probe);
            probe.params_mut()[i] = orig;
            fd[i] = (plus - minus) / (2.0 * h);
        }
        let diff: f64 = grads.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(diff / scale.max(1e-12) < 1e-6, "relative error {}", diff / scale);
    }

    #[test]
    fn clip_global_norm_scales_only_large_gradients() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_global_norm(&mut g, 1.0);
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((g[0] - 0.6).abs() < 1e-12 && (g[1] - 0.8).abs() < 1e-12);
        let mut small = vec![0.1, 0.2];
        let before = small.clone();
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // With constant gradient, bias correction makes |Δθ| ≈ lr.
        let mut adam = Adam::new(2);
        let mut params = vec![1.0, -1.0];
        adam.step(&mut params, &[0.5, -0.25], 0.01);
        assert!((params[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((params[1] - (-1.0 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn adam_with_zero_learning_rate_is_identity() {
        let mut adam = Adam::new(3);
        let mut params = vec![0.5, -0.5, 2.0];
        let before = params.clone();
        adam.step(&mut params, &[1.0, 2.0, -3.0], 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn initialization_is_seed_deterministic() {
        assert_eq!(toy_model(7).params(), toy_model(7).params());
        assert_ne!(toy_model(7).params(), toy_model(8).params());
    }

    #[test]
    fn from_params_checks_length() {
        assert!(PolicyModel::from_params(4, 5, 6, vec![0.0; 10]).is_err());
    }
}

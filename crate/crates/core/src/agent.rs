//! Actor-critic student: network, rollout collection, GAE and the clipped
//! PPO update.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Maze, Observation, N_ACTIONS, N_CLASSES, N_DIRECTIONS, OBS_DIM, VIEW_CELLS};
use crate::error::{Error, Result};
use crate::level::Level;
use crate::nn::{self, Activation, Adam, Mlp, MlpCache};

const IMAGE_DIM: usize = VIEW_CELLS * N_CLASSES;

/// Layer sizes of the actor-critic network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyLayout {
    pub image_hidden: usize,
    pub dir_hidden: usize,
    /// Hidden sizes shared by the actor and critic heads (separate weights).
    pub head_hidden: Vec<usize>,
}

impl Default for PolicyLayout {
    fn default() -> Self {
        Self {
            image_hidden: 64,
            dir_hidden: 5,
            head_hidden: vec![32, 32],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct PolicyNets {
    image: Mlp,
    dir: Mlp,
    actor: Mlp,
    critic: Mlp,
}

impl PolicyNets {
    fn build(layout: &PolicyLayout) -> Self {
        let image = Mlp::new(
            vec![IMAGE_DIM, layout.image_hidden],
            Activation::Relu,
            Activation::Relu,
            0,
        );
        let dir = Mlp::new(
            vec![N_DIRECTIONS, layout.dir_hidden],
            Activation::Relu,
            Activation::Relu,
            image.end(),
        );
        let feat = layout.image_hidden + layout.dir_hidden;
        let head = |out: usize, offset: usize| {
            let mut sizes = vec![feat];
            sizes.extend(&layout.head_hidden);
            sizes.push(out);
            Mlp::new(sizes, Activation::Relu, Activation::Identity, offset)
        };
        let actor = head(N_ACTIONS, dir.end());
        let critic = head(1, actor.end());
        Self {
            image,
            dir,
            actor,
            critic,
        }
    }

    fn n_params(&self) -> usize {
        self.critic.end()
    }
}

/// Flat parameter vector of the actor-critic plus its layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyParamsRepr", into = "PolicyParamsRepr")]
pub struct PolicyParams {
    layout: PolicyLayout,
    nets: PolicyNets,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyParamsRepr {
    layout: PolicyLayout,
    values: Vec<f64>,
}

impl TryFrom<PolicyParamsRepr> for PolicyParams {
    type Error = Error;

    fn try_from(r: PolicyParamsRepr) -> Result<Self> {
        PolicyParams::from_values(r.layout, r.values)
    }
}

impl From<PolicyParams> for PolicyParamsRepr {
    fn from(p: PolicyParams) -> Self {
        Self {
            layout: p.layout,
            values: p.values,
        }
    }
}

/// Logits over the seven actions and the state value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyOutput {
    pub logits: [f64; N_ACTIONS],
    pub value: f64,
}

impl PolicyOutput {
    pub fn probs(&self) -> Vec<f64> {
        nn::softmax(&self.logits)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PolicyCache {
    image: MlpCache,
    dir: MlpCache,
    actor: MlpCache,
    critic: MlpCache,
    features: Vec<f64>,
}

impl PolicyParams {
    /// Fan-in scaled initialisation; the actor's last layer starts at zero so
    /// the initial policy is uniform.
    pub fn new<R: Rng + ?Sized>(layout: PolicyLayout, rng: &mut R) -> Self {
        let nets = PolicyNets::build(&layout);
        let mut values = vec![0.0; nets.n_params()];
        let g = std::f64::consts::SQRT_2;
        nets.image.init(&mut values, g, g, rng);
        nets.dir.init(&mut values, g, g, rng);
        nets.actor.init(&mut values, g, 0.0, rng);
        nets.critic.init(&mut values, g, 1.0, rng);
        Self { layout, nets, values }
    }

    pub fn from_values(layout: PolicyLayout, values: Vec<f64>) -> Result<Self> {
        let nets = PolicyNets::build(&layout);
        if values.len() != nets.n_params() {
            return Err(Error::ShapeMismatch {
                expected: nets.n_params(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy parameters"));
        }
        Ok(Self { layout, nets, values })
    }

    pub fn layout(&self) -> &PolicyLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hash(&self) -> u64 {
        nn::params_hash(&self.values)
    }

    /// Output bias of the actor head, one entry per action.
    pub fn actor_bias_mut(&mut self) -> &mut [f64] {
        let end = self.nets.actor.end();
        &mut self.values[end - N_ACTIONS..end]
    }

    fn forward_encoded(&self, x: &[f64], cache: &mut PolicyCache) -> PolicyOutput {
        let p = &self.values;
        let img = self.nets.image.forward(p, &x[..IMAGE_DIM], &mut cache.image);
        cache.features.clear();
        cache.features.extend_from_slice(img);
        let d = self.nets.dir.forward(p, &x[IMAGE_DIM..OBS_DIM], &mut cache.dir);
        cache.features.extend_from_slice(d);
        let mut logits = [0.0; N_ACTIONS];
        logits.copy_from_slice(self.nets.actor.forward(p, &cache.features, &mut cache.actor));
        let value = self.nets.critic.forward(p, &cache.features, &mut cache.critic)[0];
        PolicyOutput { logits, value }
    }

    /// Accumulates parameter gradients for the output gradients of the last
    /// `forward_encoded` call that filled `cache`.
    fn backward(&self, cache: &PolicyCache, d_logits: &[f64], d_value: f64, grads: &mut [f64]) {
        let p = &self.values;
        let mut d_feat = vec![0.0; cache.features.len()];
        self.nets
            .actor
            .backward(p, &cache.actor, d_logits, grads, Some(&mut d_feat));
        self.nets
            .critic
            .backward(p, &cache.critic, &[d_value], grads, Some(&mut d_feat));
        let ih = self.layout.image_hidden;
        self.nets.image.backward(p, &cache.image, &d_feat[..ih], grads, None);
        self.nets.dir.backward(p, &cache.dir, &d_feat[ih..], grads, None);
    }

    pub fn forward(&self, obs: &Observation) -> Result<PolicyOutput> {
        let out = self.forward_encoded(&obs.encode(), &mut PolicyCache::default());
        if out.logits.iter().any(|l| !l.is_finite()) || !out.value.is_finite() {
            return Err(Error::NonFinite("policy output"));
        }
        Ok(out)
    }
}

pub fn policy_forward(params: &PolicyParams, obs: &Observation) -> Result<PolicyOutput> {
    params.forward(obs)
}

/// One episode (or a horizon-truncated prefix of one).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `observations[t]` precedes `actions[t]`; one extra final observation.
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// The episode ended inside the environment (goal or time limit).
    pub terminal: bool,
    /// `V` of the final observation when truncated, `0` when terminal.
    pub bootstrap_value: f64,
    pub reached_goal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn dones(&self) -> Vec<bool> {
        let n = self.len();
        (0..n).map(|t| self.terminal && t + 1 == n).collect()
    }

    /// `delta_t = r_t + gamma V(s_{t+1}) - V(s_t)`, with the bootstrap value
    /// for the last step.
    pub fn td_errors(&self, gamma: f64) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|t| {
                let next = if t + 1 < n {
                    self.values[t + 1]
                } else {
                    self.bootstrap_value
                };
                self.rewards[t] + gamma * next - self.values[t]
            })
            .collect()
    }

    /// `(s_t, a_t, s_{t+1})` triples.
    pub fn transitions(&self) -> impl Iterator<Item = (&Observation, usize, &Observation)> {
        self.actions
            .iter()
            .enumerate()
            .map(|(t, &a)| (&self.observations[t], a, &self.observations[t + 1]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gae {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub td_errors: Vec<f64>,
}

/// Backward recursion `A_t = delta_t + gamma lambda A_{t+1}`.
pub fn compute_gae(traj: &Trajectory, gamma: f64, lambda: f64) -> Gae {
    let td_errors = traj.td_errors(gamma);
    let mut advantages = vec![0.0; td_errors.len()];
    let mut acc = 0.0;
    for t in (0..td_errors.len()).rev() {
        acc = td_errors[t] + gamma * lambda * acc;
        advantages[t] = acc;
    }
    let returns = advantages.iter().zip(&traj.values).map(|(a, v)| a + v).collect();
    Gae {
        advantages,
        returns,
        td_errors,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    Sample,
    Greedy,
}

fn select_action<R: Rng + ?Sized>(out: &PolicyOutput, mode: ActionSelection, rng: &mut R) -> (usize, f64) {
    let logp = nn::log_softmax(&out.logits);
    let a = match mode {
        ActionSelection::Greedy => {
            let mut best = 0;
            for (i, l) in out.logits.iter().enumerate() {
                if *l > out.logits[best] {
                    best = i;
                }
            }
            best
        }
        ActionSelection::Sample => {
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            WeightedIndex::new(&probs).map_or(0, |d| d.sample(rng))
        }
    };
    (a, logp[a])
}

/// Runs episodes on one level until `horizon` steps are collected. The
/// last episode may be cut at the horizon, in which case its trajectory
/// carries a bootstrap value.
pub fn rollout_level<R: Rng + ?Sized>(
    params: &PolicyParams,
    maze: &Maze,
    horizon: usize,
    mode: ActionSelection,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    if horizon == 0 {
        return Err(Error::Config("rollout horizon must be >= 1".into()));
    }
    let mut out = Vec::new();
    let mut steps = 0;
    let mut cache = PolicyCache::default();
    let mut x = vec![0.0; OBS_DIM];
    while steps < horizon {
        let (mut state, obs) = maze.reset();
        let mut traj = Trajectory {
            observations: vec![obs],
            actions: Vec::new(),
            log_probs: Vec::new(),
            rewards: Vec::new(),
            values: Vec::new(),
            terminal: false,
            bootstrap_value: 0.0,
            reached_goal: false,
        };
        loop {
            traj.observations.last().unwrap().encode_into(&mut x);
            let pout = params.forward_encoded(&x, &mut cache);
            if !pout.value.is_finite() || pout.logits.iter().any(|l| !l.is_finite()) {
                return Err(Error::NonFinite("policy output"));
            }
            if steps == horizon {
                traj.bootstrap_value = pout.value;
                break;
            }
            let (a, lp) = select_action(&pout, mode, rng);
            let o = maze.step(&mut state, a)?;
            traj.actions.push(a);
            traj.log_probs.push(lp);
            traj.values.push(pout.value);
            traj.rewards.push(o.reward);
            traj.observations.push(o.obs);
            traj.reached_goal |= o.reached_goal;
            steps += 1;
            if o.done {
                traj.terminal = true;
                break;
            }
        }
        out.push(traj);
    }
    Ok(out)
}

/// One rollout per level, each `horizon` steps long.
pub fn collect_rollout<R: Rng + ?Sized>(
    params: &PolicyParams,
    levels: &[Level],
    horizon: usize,
    t_max: usize,
    mode: ActionSelection,
    rng: &mut R,
) -> Result<Vec<Vec<Trajectory>>> {
    levels
        .iter()
        .map(|l| rollout_level(params, &Maze::new(l, t_max)?, horizon, mode, rng))
        .collect()
}

/// PPO hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub rollout_length: usize,
    pub epochs: usize,
    pub minibatches: usize,
    pub clip_range: f64,
    pub num_workers: usize,
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub max_grad_norm: f64,
    pub value_clipping: bool,
    pub return_normalization: bool,
    pub value_loss_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
}

impl PpoConfig {
    /// MiniGrid column of the reference hyperparameter table.
    pub fn minigrid() -> Self {
        Self {
            gamma: 0.995,
            gae_lambda: 0.95,
            rollout_length: 256,
            epochs: 5,
            minibatches: 1,
            clip_range: 0.2,
            num_workers: 16,
            learning_rate: 1e-4,
            adam_eps: 1e-5,
            max_grad_norm: 0.5,
            value_clipping: true,
            return_normalization: false,
            value_loss_coef: 0.5,
            entropy_coef: 0.0,
            normalize_advantages: true,
        }
    }
}

/// Flattened PPO training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub old_value: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Builds training samples from trajectories, computing GAE per trajectory.
pub fn build_samples(trajs: &[Trajectory], gamma: f64, lambda: f64) -> Vec<Sample> {
    let mut out = Vec::new();
    for tr in trajs {
        let g = compute_gae(tr, gamma, lambda);
        for t in 0..tr.len() {
            out.push(Sample {
                obs: tr.observations[t].encode(),
                action: tr.actions[t],
                old_log_prob: tr.log_probs[t],
                old_value: tr.values[t],
                advantage: g.advantages[t],
                ret: g.returns[t],
            });
        }
    }
    out
}

/// Mean loss components over a minibatch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoLoss {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
}

/// Clipped-surrogate loss and its gradient with respect to every parameter.
/// Advantages are used as given; normalisation happens in [`ppo_update`].
pub fn ppo_loss_and_grad(params: &PolicyParams, batch: &[Sample], cfg: &PpoConfig) -> (PpoLoss, Vec<f64>) {
    let mut grads = vec![0.0; params.len()];
    let mut loss = PpoLoss::default();
    if batch.is_empty() {
        return (loss, grads);
    }
    let n = batch.len() as f64;
    let eps = cfg.clip_range;
    let mut cache = PolicyCache::default();
    let mut d_logits = [0.0; N_ACTIONS];
    for s in batch {
        let out = params.forward_encoded(&s.obs, &mut cache);
        let logp = nn::log_softmax(&out.logits);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();

        let ratio = (logp[s.action] - s.old_log_prob).exp();
        let adv = s.advantage;
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        let pg = -surr1.min(surr2);
        let d_logp = if surr1 <= surr2 { -adv * ratio } else { 0.0 };

        let v = out.value;
        let (vl, d_v) = if cfg.value_clipping {
            let delta = v - s.old_value;
            let vc = s.old_value + delta.clamp(-eps, eps);
            let a = v - s.ret;
            let b = vc - s.ret;
            if a * a >= b * b {
                (0.5 * a * a, a)
            } else {
                let inside = delta > -eps && delta < eps;
                (0.5 * b * b, if inside { b } else { 0.0 })
            }
        } else {
            let a = v - s.ret;
            (0.5 * a * a, a)
        };

        loss.policy += pg / n;
        loss.value += vl / n;
        loss.entropy += entropy / n;

        for k in 0..N_ACTIONS {
            let onehot = if k == s.action { 1.0 } else { 0.0 };
            let pg_grad = d_logp * (onehot - probs[k]);
            let ent_grad = cfg.entropy_coef * probs[k] * (logp[k] + entropy);
            d_logits[k] = (pg_grad + ent_grad) / n;
        }
        params.backward(&cache, &d_logits, cfg.value_loss_coef * d_v / n, &mut grads);
    }
    loss.total = loss.policy + cfg.value_loss_coef * loss.value - cfg.entropy_coef * loss.entropy;
    (loss, grads)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub n_samples: usize,
}

/// Student optimiser state.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyLearner {
    pub params: PolicyParams,
    pub optimizer: Adam,
}

impl PolicyLearner {
    pub fn new(params: PolicyParams, cfg: &PpoConfig) -> Self {
        let optimizer = Adam::new(params.len(), cfg.learning_rate, cfg.adam_eps);
        Self { params, optimizer }
    }
}

/// Runs `epochs x minibatches` clipped-surrogate steps on the given
/// trajectories. On a non-finite loss the parameters are restored and an
/// error is returned.
pub fn ppo_update<R: Rng + ?Sized>(
    learner: &mut PolicyLearner,
    trajs: &[Trajectory],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    let mut samples = build_samples(trajs, cfg.gamma, cfg.gae_lambda);
    if samples.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if cfg.normalize_advantages && samples.len() > 1 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        for s in &mut samples {
            s.advantage = (s.advantage - mean) / (std + 1e-8);
        }
    }
    let backup = learner.clone();
    let mut stats = PpoStats {
        n_samples: samples.len(),
        ..Default::default()
    };
    let mb = cfg.minibatches.max(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut steps = 0.0;
    for _ in 0..cfg.epochs {
        if mb > 1 {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        }
        let size = samples.len().div_ceil(mb);
        for chunk in order.chunks(size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (loss, mut grads) = ppo_loss_and_grad(&learner.params, &batch, cfg);
            if !loss.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                *learner = backup;
                return Err(Error::NonFinite("ppo loss"));
            }
            let norm = nn::clip_grad_norm(&mut grads, cfg.max_grad_norm);
            learner.optimizer.step(&mut learner.params.values, &grads);
            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.grad_norm += norm;
            steps += 1.0;
        }
    }
    if steps > 0.0 {
        stats.policy_loss /= steps;
        stats.value_loss /= steps;
        stats.entropy /= steps;
        stats.grad_norm /= steps;
    }
    Ok(stats)
}

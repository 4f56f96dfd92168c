//! Learned one-step observation predictor and the average transition
//! prediction loss (ATPL) of an episode.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Trajectory;
use crate::env::{Observation, N_ACTIONS, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, Adam, Mlp, MlpCache};

const INPUT_DIM: usize = OBS_DIM + N_ACTIONS;

/// Anything that maps `(o_t, a_t)` to a prediction of `o_{t+1}`.
pub trait TransitionModel {
    fn predict_next(&self, obs: &Observation, action: usize) -> PredictedObservation;
}

/// Per-element scores in the flattened observation layout.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedObservation(pub Vec<f64>);

impl PredictedObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsLayout {
    pub hidden: Vec<usize>,
}

impl Default for DynamicsLayout {
    fn default() -> Self {
        Self { hidden: vec![64, 64] }
    }
}

fn build_mlp(layout: &DynamicsLayout) -> Mlp {
    let mut sizes = vec![INPUT_DIM];
    sizes.extend(&layout.hidden);
    sizes.push(OBS_DIM);
    Mlp::new(sizes, Activation::Relu, Activation::Identity, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DynamicsParamsRepr", into = "DynamicsParamsRepr")]
pub struct DynamicsParams {
    layout: DynamicsLayout,
    mlp: Mlp,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DynamicsParamsRepr {
    layout: DynamicsLayout,
    values: Vec<f64>,
}

impl TryFrom<DynamicsParamsRepr> for DynamicsParams {
    type Error = Error;

    fn try_from(r: DynamicsParamsRepr) -> Result<Self> {
        DynamicsParams::from_values(r.layout, r.values)
    }
}

impl From<DynamicsParams> for DynamicsParamsRepr {
    fn from(p: DynamicsParams) -> Self {
        Self {
            layout: p.layout,
            values: p.values,
        }
    }
}

fn encode_input(obs: &Observation, action: usize, x: &mut [f64]) {
    obs.encode_into(x);
    x[OBS_DIM..].fill(0.0);
    x[OBS_DIM + action.min(N_ACTIONS - 1)] = 1.0;
}

impl DynamicsParams {
    /// Fan-in scaled initialisation with a small output layer, so initial
    /// predictions sit near zero.
    pub fn new<R: Rng + ?Sized>(layout: DynamicsLayout, rng: &mut R) -> Self {
        let mlp = build_mlp(&layout);
        let mut values = vec![0.0; mlp.n_params()];
        mlp.init(&mut values, std::f64::consts::SQRT_2, 0.1, rng);
        Self { layout, mlp, values }
    }

    pub fn from_values(layout: DynamicsLayout, values: Vec<f64>) -> Result<Self> {
        let mlp = build_mlp(&layout);
        if values.len() != mlp.n_params() {
            return Err(Error::ShapeMismatch {
                expected: mlp.n_params(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dynamics parameters"));
        }
        Ok(Self { layout, mlp, values })
    }

    pub fn layout(&self) -> &DynamicsLayout {
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
}

impl TransitionModel for DynamicsParams {
    fn predict_next(&self, obs: &Observation, action: usize) -> PredictedObservation {
        let mut x = [0.0; INPUT_DIM];
        encode_input(obs, action, &mut x);
        let mut cache = MlpCache::default();
        PredictedObservation(self.mlp.forward(&self.values, &x, &mut cache).to_vec())
    }
}

pub fn predict_next(params: &DynamicsParams, obs: &Observation, action: usize) -> PredictedObservation {
    params.predict_next(obs, action)
}

/// Mean absolute element-wise difference.
pub fn transition_loss(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::ShapeMismatch {
            expected: actual.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean one-step L1 prediction loss over the trajectory's transitions.
pub fn atpl<M: TransitionModel + ?Sized>(model: &M, traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut sum = 0.0;
    for (obs, a, next) in traj.transitions() {
        sum += transition_loss(model.predict_next(obs, a).as_slice(), &next.encode())?;
    }
    Ok(sum / traj.len() as f64)
}

/// ATPL over several trajectories, weighted by transition count.
pub fn atpl_many<M: TransitionModel + ?Sized>(model: &M, trajs: &[Trajectory]) -> Result<f64> {
    let n: usize = trajs.iter().map(Trajectory::len).sum();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut sum = 0.0;
    for t in trajs.iter().filter(|t| !t.is_empty()) {
        sum += atpl(model, t)? * t.len() as f64;
    }
    Ok(sum / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub next_obs: Observation,
}

pub fn transitions_of(trajs: &[Trajectory]) -> Vec<Transition> {
    trajs
        .iter()
        .flat_map(|t| {
            t.transitions().map(|(o, a, n)| Transition {
                obs: *o,
                action: a,
                next_obs: *n,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub learning_rate: f64,
    pub adam_eps: f64,
    /// Half-width of the quadratic region of the smoothed L1 surrogate.
    pub smoothing: f64,
    /// Gradient steps per collected rollout.
    pub steps_per_rollout: usize,
    pub layout: DynamicsLayout,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-3,
            adam_eps: 1e-5,
            smoothing: 1e-2,
            steps_per_rollout: 1,
            layout: DynamicsLayout::default(),
        }
    }
}

fn smooth_l1(d: f64, w: f64) -> (f64, f64) {
    if d.abs() < w {
        (d * d / (2.0 * w), d / w)
    } else {
        (d.abs() - w / 2.0, d.signum())
    }
}

/// Smoothed-L1 surrogate (mean over batch and elements) with its gradient,
/// plus the exact mean L1 loss.
pub fn surrogate_loss_and_grad(params: &DynamicsParams, batch: &[Transition], smoothing: f64) -> (f64, f64, Vec<f64>) {
    let mut grads = vec![0.0; params.len()];
    if batch.is_empty() {
        return (0.0, 0.0, grads);
    }
    let scale = 1.0 / (batch.len() * OBS_DIM) as f64;
    let mut x = [0.0; INPUT_DIM];
    let mut target = [0.0; OBS_DIM];
    let mut cache = MlpCache::default();
    let mut surrogate = 0.0;
    let mut exact = 0.0;
    let mut gy = [0.0; OBS_DIM];
    for tr in batch {
        encode_input(&tr.obs, tr.action, &mut x);
        tr.next_obs.encode_into(&mut target);
        let y = params.mlp.forward(&params.values, &x, &mut cache);
        for i in 0..OBS_DIM {
            let d = y[i] - target[i];
            let (l, g) = smooth_l1(d, smoothing);
            surrogate += l * scale;
            exact += d.abs() * scale;
            gy[i] = g * scale;
        }
        params.mlp.backward(&params.values, &cache, &gy, &mut grads, None);
    }
    (surrogate, exact, grads)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsLearner {
    pub params: DynamicsParams,
    pub optimizer: Adam,
}

impl DynamicsLearner {
    pub fn new(params: DynamicsParams, cfg: &DynamicsConfig) -> Self {
        let optimizer = Adam::new(params.len(), cfg.learning_rate, cfg.adam_eps);
        Self { params, optimizer }
    }
}

/// One gradient step on the batch; returns the exact L1 loss before the step.
pub fn train_dynamics(learner: &mut DynamicsLearner, batch: &[Transition], cfg: &DynamicsConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let (_, exact, grads) = surrogate_loss_and_grad(&learner.params, batch, cfg.smoothing);
    if !exact.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("dynamics gradient"));
    }
    learner.optimizer.lr = cfg.learning_rate;
    learner.optimizer.step(&mut learner.params.values, &grads);
    Ok(exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{rollout_level, ActionSelection, PolicyLayout, PolicyParams};
    use crate::env::Maze;
    use crate::level::{generate_random_level, BlockCount, GenerationConfig, Level};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Predicts the true next observation by looking it up.
    struct Perfect(Vec<Transition>);

    impl TransitionModel for Perfect {
        fn predict_next(&self, obs: &Observation, action: usize) -> PredictedObservation {
            let t = self.0.iter().find(|t| t.obs == *obs && t.action == action).unwrap();
            PredictedObservation(t.next_obs.encode())
        }
    }

    fn sample_trajs(seed: u64, n_steps: usize) -> Vec<Trajectory> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenerationConfig {
            width: 9,
            height: 9,
            max_blocks: 20,
            block_count: BlockCount::Uniform,
        };
        let level = generate_random_level(&mut rng, &cfg).unwrap();
        let p = PolicyParams::new(PolicyLayout::default(), &mut rng);
        rollout_level(
            &p,
            &Maze::new(&level, 30).unwrap(),
            n_steps,
            ActionSelection::Sample,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn loss_of_identical_tensors_is_zero() {
        let v = vec![0.0, 1.0, 0.5];
        assert_eq!(transition_loss(&v, &v).unwrap(), 0.0);
        assert!(matches!(transition_loss(&v, &v[..2]), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn zero_prediction_against_one_hot() {
        let level = Level::from_ascii(&["#####", "#>..#", "#...#", "#..G#", "#####"]).unwrap();
        let obs = Maze::new(&level, 10).unwrap().reset().1.encode();
        let k = obs.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(k, 26);
        let l = transition_loss(&vec![0.0; OBS_DIM], &obs).unwrap();
        assert_eq!(l, k as f64 / OBS_DIM as f64);
    }

    #[test]
    fn perfect_predictor_has_zero_atpl() {
        let trajs = sample_trajs(1, 40);
        let model = Perfect(transitions_of(&trajs));
        for t in &trajs {
            assert_eq!(atpl(&model, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn atpl_is_mean_of_step_losses() {
        struct Fixed(f64);
        impl TransitionModel for Fixed {
            fn predict_next(&self, _: &Observation, _: usize) -> PredictedObservation {
                PredictedObservation(vec![self.0; OBS_DIM])
            }
        }
        let trajs = sample_trajs(2, 2);
        let t = &trajs[0];
        assert_eq!(t.len(), 2);
        // A constant prediction c against a one-hot vector with 26 ones has
        // loss (26 |1 - c| + 78 |c|) / 104.
        let c = 0.5;
        let per_step = (26.0 * (1.0f64 - c).abs() + 78.0 * c) / 104.0;
        assert!((atpl(&Fixed(c), t).unwrap() - per_step).abs() < 1e-15);
    }

    #[test]
    fn atpl_ignores_rewards_and_values() {
        let p = DynamicsParams::new(DynamicsLayout::default(), &mut ChaCha8Rng::seed_from_u64(3));
        let trajs = sample_trajs(3, 30);
        let mut t = trajs[0].clone();
        let base = atpl(&p, &t).unwrap();
        t.rewards.iter_mut().for_each(|r| *r = 7.0);
        t.values.iter_mut().for_each(|v| *v = -3.0);
        assert_eq!(atpl(&p, &t).unwrap(), base);
        let empty = Trajectory {
            actions: vec![],
            log_probs: vec![],
            rewards: vec![],
            values: vec![],
            observations: vec![t.observations[0]],
            ..t
        };
        assert_eq!(atpl(&p, &empty), Err(Error::EmptyTrajectory));
    }

    #[test]
    fn prediction_shape_and_determinism() {
        let p = DynamicsParams::new(DynamicsLayout::default(), &mut ChaCha8Rng::seed_from_u64(3));
        let trajs = sample_trajs(4, 5);
        let o = &trajs[0].observations[0];
        let a = predict_next(&p, o, 2);
        assert_eq!(a.0.len(), OBS_DIM);
        assert_eq!(a, predict_next(&p, o, 2));
    }

    #[test]
    fn zero_learning_rate_leaves_params() {
        let cfg = DynamicsConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        let mut l = DynamicsLearner::new(
            DynamicsParams::new(cfg.layout.clone(), &mut ChaCha8Rng::seed_from_u64(3)),
            &cfg,
        );
        let before = l.params.clone();
        train_dynamics(&mut l, &transitions_of(&sample_trajs(5, 20)), &cfg).unwrap();
        assert_eq!(l.params, before);
    }

    #[test]
    fn memorises_single_transition() {
        let cfg = DynamicsConfig::default();
        let mut l = DynamicsLearner::new(
            DynamicsParams::new(cfg.layout.clone(), &mut ChaCha8Rng::seed_from_u64(8)),
            &cfg,
        );
        let batch = transitions_of(&sample_trajs(6, 1));
        assert_eq!(batch.len(), 1);
        for _ in 0..2000 {
            train_dynamics(&mut l, &batch, &cfg).unwrap();
        }
        let pred = l.params.predict_next(&batch[0].obs, batch[0].action);
        let err = transition_loss(pred.as_slice(), &batch[0].next_obs.encode()).unwrap();
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn overfits_fifty_transitions() {
        let cfg = DynamicsConfig::default();
        let mut l = DynamicsLearner::new(
            DynamicsParams::new(cfg.layout.clone(), &mut ChaCha8Rng::seed_from_u64(9)),
            &cfg,
        );
        let batch = transitions_of(&sample_trajs(7, 50));
        assert_eq!(batch.len(), 50);
        let first = train_dynamics(&mut l, &batch, &cfg).unwrap();
        let mut last = first;
        for _ in 1..200 {
            last = train_dynamics(&mut l, &batch, &cfg).unwrap();
        }
        assert!(last < 0.1 * first, "{first} -> {last}");
    }
}

//! Runs the production formulas against the brute-force references in
//! [`crate::oracle`] and collects a pass/fail report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{compute_gae, ppo_loss_and_grad, PolicyLayout, PolicyParams, PpoConfig, Sample, Trajectory};
use crate::curriculum::{colearnability_value, CurriculumConfig, CurriculumState, Mode};
use crate::dynamics::{
    atpl, predict_next, surrogate_loss_and_grad, transitions_of, DynamicsLayout, DynamicsParams, PredictedObservation,
    TransitionModel,
};
use crate::env::{Maze, Observation, N_ACTIONS, OBS_DIM};
use crate::error::Result;
use crate::level::{generate_random_level, BlockCount, GenerationConfig, Level};
use crate::oracle::{
    decomposition_check, gradient_check, mean_difficulty_change, naive_advantages, naive_pvl, staleness_simulation,
    value_iteration, Backup, Kernel, PrioritySchedule, TabularMdp, DECOMPOSITION_CONVENTION,
};
use crate::scoring::approx_regret;

/// Signature of the PVL implementation under test.
pub type PvlFn = fn(&Trajectory, f64, f64) -> Result<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed error or statistic.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub decomposition_convention: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub seed: u64,
    pub pvl: PvlFn,
    /// Random instances per formula check.
    pub cases: usize,
    pub staleness_trials: usize,
    pub staleness_schedules: usize,
    pub gradient_points: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            pvl: crate::scoring::pvl,
            cases: 100,
            staleness_trials: 1000,
            staleness_schedules: 20,
            gradient_points: 5,
        }
    }
}

fn check(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: value <= tolerance,
        value,
        tolerance,
        detail: detail.into(),
    }
}

fn failure(name: &str, err: impl std::fmt::Display) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: false,
        value: f64::MAX,
        tolerance: 0.0,
        detail: format!("error: {err}"),
    }
}

fn small_level<R: Rng + ?Sized>(rng: &mut R) -> Level {
    let cfg = GenerationConfig {
        width: 7,
        height: 7,
        max_blocks: 12,
        block_count: BlockCount::Uniform,
    };
    generate_random_level(rng, &cfg).expect("valid generation config")
}

fn some_observation<R: Rng + ?Sized>(rng: &mut R) -> Observation {
    Maze::new(&small_level(rng), 10).expect("valid level").reset().1
}

fn random_trajectory<R: Rng + ?Sized>(rng: &mut R) -> Trajectory {
    let n = rng.gen_range(1..60);
    let terminal = rng.gen_bool(0.5);
    Trajectory {
        observations: vec![some_observation(rng); n + 1],
        actions: (0..n).map(|_| rng.gen_range(0..N_ACTIONS)).collect(),
        log_probs: vec![0.0; n],
        rewards: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        values: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        terminal,
        bootstrap_value: if terminal { 0.0 } else { rng.gen_range(-1.0..1.0) },
        reached_goal: false,
    }
}

/// Trajectory whose TD errors are exactly `deltas` under `gamma = 1`.
fn trajectory_with_deltas(deltas: &[f64], obs: Observation) -> Trajectory {
    let n = deltas.len();
    Trajectory {
        observations: vec![obs; n + 1],
        actions: vec![0; n],
        log_probs: vec![0.0; n],
        rewards: deltas.to_vec(),
        values: vec![0.0; n],
        terminal: true,
        bootstrap_value: 0.0,
        reached_goal: false,
    }
}

fn gae_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let (gamma, lambda) = (0.995, 0.95);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let t = random_trajectory(rng);
        let got = compute_gae(&t, gamma, lambda);
        let want = naive_advantages(&t.td_errors(gamma), gamma, lambda);
        for (i, (a, b)) in got.advantages.iter().zip(&want).enumerate() {
            worst = worst.max((a - b).abs());
            worst = worst.max((got.returns[i] - (b + t.values[i])).abs());
        }
    }
    let hand = compute_gae(
        &trajectory_with_deltas(&[1.0, -2.0, 0.5], some_observation(rng)),
        1.0,
        1.0,
    )
    .advantages;
    for (a, b) in hand.iter().zip([-0.5, -1.5, 0.5]) {
        worst = worst.max((a - b).abs());
    }
    check(
        "gae",
        worst,
        1e-10,
        format!("{} random trajectories and the [1, -2, 0.5] hand case", opts.cases),
    )
}

fn pvl_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let (gamma, lambda) = (0.995, 0.95);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let t = random_trajectory(rng);
        match (opts.pvl)(&t, gamma, lambda) {
            Ok(p) => worst = worst.max((p - naive_pvl(&t.td_errors(gamma), gamma, lambda)).abs()),
            Err(e) => return failure("pvl", e),
        }
    }
    let hand = trajectory_with_deltas(&[1.0, -2.0, 0.5], some_observation(rng));
    match (opts.pvl)(&hand, 1.0, 1.0) {
        Ok(p) => worst = worst.max((p - 0.5 / 3.0).abs()),
        Err(e) => return failure("pvl", e),
    }
    check(
        "pvl",
        worst,
        1e-10,
        "naive double-sum reference and the 0.5/3 hand case",
    )
}

fn decomposition_run<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let n_s = rng.gen_range(1..=6);
        let n_a = rng.gen_range(1..=3);
        let gamma = rng.gen_range(0.5..0.95);
        let mdp = TabularMdp::random(n_s, n_a, gamma, rng.gen_range(0.0..1.0), rng);
        let tol = 1e-13;
        let solved = value_iteration(&mdp, Kernel::True, &Backup::Greedy, tol)
            .and_then(|qs| value_iteration(&mdp, Kernel::Estimated, &Backup::Greedy, tol).map(|q| (qs, q)));
        let (q_star, q) = match solved {
            Ok(x) => x,
            Err(e) => return failure("decomposition", e),
        };
        for s in 0..n_s {
            for a in 0..n_a {
                let d = decomposition_check(&mdp, &q_star, &q, s, a);
                worst = worst.max((d.lhs - d.rhs()).abs());
            }
        }
    }
    check("decomposition", worst, 1e-9, DECOMPOSITION_CONVENTION)
}

/// Replays the recorded successors in order, so it is exact on the
/// trajectory it was built from.
struct Replay {
    next: Vec<Observation>,
    cursor: std::cell::Cell<usize>,
}

impl TransitionModel for Replay {
    fn predict_next(&self, _obs: &Observation, _action: usize) -> PredictedObservation {
        let i = self.cursor.get();
        self.cursor.set(i + 1);
        PredictedObservation(self.next[i].encode())
    }
}

fn real_trajectory<R: Rng + ?Sized>(policy: &PolicyParams, rng: &mut R) -> Trajectory {
    let maze = Maze::new(&small_level(rng), 20).expect("valid level");
    let horizon = rng.gen_range(1..40);
    crate::agent::rollout_level(policy, &maze, horizon, crate::agent::ActionSelection::Sample, rng)
        .expect("finite policy")
        .swap_remove(0)
}

fn atpl_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let policy = PolicyParams::new(PolicyLayout::default(), rng);
    let model = DynamicsParams::new(DynamicsLayout { hidden: vec![16] }, rng);
    let mut worst: f64 = 0.0;
    let mut perfect_worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let t = real_trajectory(&policy, rng);
        let mut total = 0.0;
        for i in 0..t.len() {
            let pred = predict_next(&model, &t.observations[i], t.actions[i]);
            let actual = t.observations[i + 1].encode();
            let l: f64 = pred.0.iter().zip(&actual).map(|(p, y)| (p - y).abs()).sum();
            total += l / OBS_DIM as f64;
        }
        match atpl(&model, &t) {
            Ok(v) => worst = worst.max((v - total / t.len() as f64).abs()),
            Err(e) => return failure("atpl", e),
        }
        let table = Replay {
            next: t.observations[1..].to_vec(),
            cursor: std::cell::Cell::new(0),
        };
        match atpl(&table, &t) {
            Ok(v) => perfect_worst = perfect_worst.max(v),
            Err(e) => return failure("atpl", e),
        }
    }
    CheckResult {
        name: "atpl".into(),
        passed: worst <= 1e-12 && perfect_worst == 0.0,
        value: worst,
        tolerance: 1e-12,
        detail: format!(
            "loop reference on {} rollouts; perfect predictor max {perfect_worst}",
            opts.cases
        ),
    }
}

fn combined_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let mut mismatches = 0usize;
    for _ in 0..opts.cases {
        let (p, a, alpha) = (
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..5.0),
        );
        match (approx_regret(p, a, alpha), approx_regret(p, a, 0.0)) {
            (Ok(s), Ok(z)) => {
                mismatches += usize::from(s.combined.to_bits() != (p + alpha * a).to_bits());
                mismatches += usize::from(z.combined.to_bits() != p.to_bits());
            }
            (Err(e), _) | (_, Err(e)) => return failure("combined", e),
        }
    }
    check(
        "combined",
        mismatches as f64,
        0.0,
        "bitwise pvl + alpha * atpl; alpha = 0 returns pvl",
    )
}

fn priority_check<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let level = small_level(rng);
    let cfg = CurriculumConfig {
        temperature: 1.0,
        staleness_coef: 0.0,
        ..CurriculumConfig::minigrid()
    };
    let build = |scores: &[f64]| -> CurriculumState {
        let mut s = CurriculumState::new(Mode::Traced, cfg.clone()).expect("valid config");
        for &x in scores {
            s.maybe_insert(level.clone(), x, 0.0);
        }
        s
    };
    let mut worst: f64 = 0.0;
    let p = build(&[3.0, 1.0, 2.0]).task_priority_distribution().expect("non-empty");
    for (a, b) in p.iter().zip([6.0 / 11.0, 2.0 / 11.0, 3.0 / 11.0]) {
        worst = worst.max((a - b).abs());
    }
    worst = worst.max((colearnability_value(&[0.8, 0.4], &[0.5, 0.5]) - 0.1).abs());
    for _ in 0..20 {
        let n = rng.gen_range(1..12);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let k = rng.gen_range(0.01..100.0);
        let scaled: Vec<f64> = scores.iter().map(|s| s * k).collect();
        let a = build(&scores).task_priority_distribution().expect("non-empty");
        let b = build(&scaled).task_priority_distribution().expect("non-empty");
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    check(
        "priority",
        worst,
        1e-12,
        "rank hand case, co-learnability hand case, positive scaling",
    )
}

fn full_batch_colearnability_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let level = small_level(rng);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.cases {
        let n = rng.gen_range(1..=16);
        let mut state = CurriculumState::new(
            Mode::Traced,
            CurriculumConfig {
                buffer_capacity: n,
                batch_size: n,
                ..CurriculumConfig::minigrid()
            },
        )
        .expect("valid config");
        for _ in 0..n {
            state.maybe_insert(level.clone(), rng.gen_range(0.0..1.0), 0.0);
        }
        let ids: Vec<u64> = state.buffer.iter().map(|r| r.id).collect();
        state.update_colearnability(&ids.iter().map(|&id| (id, 0.0, 0.0)).collect::<Vec<_>>());
        let pre: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let post: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let batch: Vec<_> = ids
            .iter()
            .zip(&pre)
            .zip(&post)
            .map(|((&id, &a), &b)| (id, a, b))
            .collect();
        state.update_colearnability(&batch);
        let y = mean_difficulty_change(&pre, &post);
        for r in &state.buffer {
            worst = worst.max((r.colearnability + y).abs());
        }
    }
    check(
        "full_batch_colearnability",
        worst,
        1e-12,
        "whole-buffer co-learnability equals -mean(post - pre)",
    )
}

/// Uses ten times the configured trials: at 1000 trials the standard error
/// of each mean wait is about 0.11, too close to the 0.2 tolerance.
fn staleness_uniform<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let schedule = PrioritySchedule::constant(vec![0.25; 4]);
    let trials = 10 * opts.staleness_trials;
    match staleness_simulation(&schedule, trials, 100_000, rng) {
        Ok(r) => {
            let worst = r.mean_wait.iter().map(|w| (w - 4.0).abs()).fold(0.0, f64::max);
            check(
                "staleness_uniform",
                worst,
                0.2,
                format!("mean waits {:?} over {trials} trials, bound 4", r.mean_wait),
            )
        }
        Err(e) => failure("staleness_uniform", e),
    }
}

/// Initial priorities U(0.1, 1), per-step factors U(0.95, 1), buffer sizes
/// 2..=16. Fails when a mean wait exceeds its bound by more than three
/// standard errors; raw exceedances are reported alongside.
fn staleness_bound<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let mut violations = 0usize;
    let mut significant = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let mut tasks = 0usize;
    for _ in 0..opts.staleness_schedules {
        let n = rng.gen_range(2..=16);
        let schedule = PrioritySchedule::random_non_increasing(n, 500, 0.95, rng);
        match staleness_simulation(&schedule, opts.staleness_trials, 100_000, rng) {
            Ok(r) => {
                tasks += n;
                violations += r.violations().len();
                significant += r.significant_violations(3.0).len();
                for (w, b) in r.mean_wait.iter().zip(&r.bound) {
                    worst_ratio = worst_ratio.max(w / b);
                }
            }
            Err(e) => return failure("staleness_bound", e),
        }
    }
    CheckResult {
        name: "staleness_bound".into(),
        passed: significant == 0,
        value: worst_ratio,
        tolerance: 1.0,
        detail: format!(
            "{significant} of {tasks} tasks exceeded the bound by > 3 standard errors ({violations} by any margin); \
             worst wait/bound {worst_ratio:.4}"
        ),
    }
}

fn random_samples<R: Rng + ?Sized>(params: &PolicyParams, n: usize, rng: &mut R) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let obs = some_observation(rng);
            let out = params.forward(&obs).expect("finite policy");
            let logp = crate::nn::log_softmax(&out.logits);
            let action = rng.gen_range(0..N_ACTIONS);
            Sample {
                obs: obs.encode(),
                action,
                // Keep the ratio inside the clip range and the value away
                // from the clip boundary so the loss is smooth here.
                old_log_prob: logp[action] + rng.gen_range(-0.1..0.1),
                old_value: out.value + rng.gen_range(-0.1..0.1),
                advantage: rng.gen_range(-1.0..1.0),
                ret: rng.gen_range(-1.0..1.0),
            }
        })
        .collect()
}

fn policy_gradient_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let layout = PolicyLayout {
        image_hidden: 6,
        dir_hidden: 3,
        head_hidden: vec![5],
    };
    let cfg = PpoConfig {
        entropy_coef: 0.01,
        ..PpoConfig::minigrid()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..opts.gradient_points {
        let mut params = PolicyParams::new(layout.clone(), rng);
        for v in &mut params.values {
            *v += rng.gen_range(-0.3..0.3);
        }
        let batch = random_samples(&params, 8, rng);
        let (_, grads) = ppo_loss_and_grad(&params, &batch, &cfg);
        let coords: Vec<usize> = (0..params.len()).collect();
        let f = |x: &[f64]| {
            let p = PolicyParams::from_values(layout.clone(), x.to_vec()).expect("same layout");
            ppo_loss_and_grad(&p, &batch, &cfg).0.total
        };
        worst = worst.max(gradient_check(f, &params.values, &grads, &coords, 1e-5, 1e-6));
    }
    check(
        "grad_policy",
        worst,
        1e-4,
        format!("{} random points, every coordinate", opts.gradient_points),
    )
}

fn dynamics_gradient_check<R: Rng + ?Sized>(opts: &VerifyOptions, rng: &mut R) -> CheckResult {
    let layout = DynamicsLayout { hidden: vec![6, 5] };
    let policy = PolicyParams::new(PolicyLayout::default(), rng);
    // The backward pass does not depend on the width, but finite differences
    // lose accuracy near the quadratic/linear seam in proportion to 1 / width.
    // At 0.5 the zero targets fall in the quadratic piece and the one-hot
    // targets in the linear piece, so both branches are still exercised.
    let smoothing = 0.5;
    let mut worst: f64 = 0.0;
    for _ in 0..opts.gradient_points {
        // Jitter so no pre-activation sits exactly on a ReLU kink.
        let mut params = DynamicsParams::new(layout.clone(), rng);
        for v in &mut params.values {
            *v += rng.gen_range(-0.3..0.3);
        }
        let t = real_trajectory(&policy, rng);
        let batch = transitions_of(std::slice::from_ref(&t));
        let batch = &batch[..batch.len().min(6)];
        let (_, _, grads) = surrogate_loss_and_grad(&params, batch, smoothing);
        let coords: Vec<usize> = (0..params.len()).collect();
        let f = |x: &[f64]| {
            let p = DynamicsParams::from_values(layout.clone(), x.to_vec()).expect("same layout");
            surrogate_loss_and_grad(&p, batch, smoothing).0
        };
        worst = worst.max(gradient_check(f, &params.values, &grads, &coords, 1e-5, 1e-6));
    }
    check(
        "grad_dynamics",
        worst,
        1e-4,
        format!("{} random points, every coordinate", opts.gradient_points),
    )
}

/// Runs every check with independent streams derived from `opts.seed`.
pub fn run_verification(opts: &VerifyOptions) -> VerifyReport {
    let mut seeder = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rng = || ChaCha8Rng::seed_from_u64(seeder.gen());
    let checks = vec![
        gae_check(opts, &mut rng()),
        pvl_check(opts, &mut rng()),
        decomposition_run(opts, &mut rng()),
        atpl_check(opts, &mut rng()),
        combined_check(opts, &mut rng()),
        priority_check(&mut rng()),
        full_batch_colearnability_check(opts, &mut rng()),
        staleness_uniform(opts, &mut rng()),
        staleness_bound(opts, &mut rng()),
        policy_gradient_check(opts, &mut rng()),
        dynamics_gradient_check(opts, &mut rng()),
    ];
    VerifyReport {
        seed: opts.seed,
        decomposition_convention: DECOMPOSITION_CONVENTION.to_string(),
        checks,
    }
}

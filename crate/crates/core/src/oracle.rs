//! Brute-force references: naive advantage sums, tabular value iteration
//! for the one-step regret decomposition, the expected-staleness
//! simulation, the whole-buffer co-learnability identity and central
//! finite differences.
//!
//! Everything here is deliberately written without reusing the production
//! code paths it is compared against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `A_t = sum_{k >= t} (gamma lambda)^(k - t) delta_k`, evaluated as a
/// double loop.
#[allow(clippy::needless_range_loop)]
pub fn naive_advantages(deltas: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = deltas.len();
    let mut out = vec![0.0; n];
    for t in 0..n {
        let mut s = 0.0;
        for k in t..n {
            s += (gamma * lambda).powi((k - t) as i32) * deltas[k];
        }
        out[t] = s;
    }
    out
}

/// Mean over `t` of `max(A_t, 0)` using [`naive_advantages`].
pub fn naive_pvl(deltas: &[f64], gamma: f64, lambda: f64) -> f64 {
    let adv = naive_advantages(deltas, gamma, lambda);
    adv.iter().map(|a| if *a > 0.0 { *a } else { 0.0 }).sum::<f64>() / adv.len() as f64
}

/// Finite MDP with a true kernel `p` and an estimated kernel `p_hat`,
/// both indexed `[s][a][s']`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub p: Vec<Vec<Vec<f64>>>,
    pub p_hat: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub gamma: f64,
}

fn random_row<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0f64).powi(2) + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

impl TabularMdp {
    /// Random kernels and rewards; `p_hat` is an independent perturbation
    /// of `p` mixed with weight `perturbation`.
    pub fn random<R: Rng + ?Sized>(
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        perturbation: f64,
        rng: &mut R,
    ) -> Self {
        let p: Vec<Vec<Vec<f64>>> = (0..n_states)
            .map(|_| (0..n_actions).map(|_| random_row(n_states, rng)).collect())
            .collect();
        let p_hat = p
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| {
                        let noise = random_row(n_states, rng);
                        let mixed: Vec<f64> = row
                            .iter()
                            .zip(&noise)
                            .map(|(a, b)| (1.0 - perturbation) * a + perturbation * b)
                            .collect();
                        let s: f64 = mixed.iter().sum();
                        mixed.into_iter().map(|x| x / s).collect()
                    })
                    .collect()
            })
            .collect();
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Self {
            n_states,
            n_actions,
            p,
            p_hat,
            reward,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        for kernel in [&self.p, &self.p_hat] {
            if kernel.len() != self.n_states {
                return Err(Error::Config("kernel has wrong number of states".into()));
            }
            for rows in kernel {
                if rows.len() != self.n_actions {
                    return Err(Error::Config("kernel has wrong number of actions".into()));
                }
                for row in rows {
                    let s: f64 = row.iter().sum();
                    if row.len() != self.n_states || (s - 1.0).abs() > 1e-12 || row.iter().any(|&x| x < 0.0) {
                        return Err(Error::Config("kernel row is not a distribution".into()));
                    }
                }
            }
        }
        if self.reward.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        Ok(())
    }

    fn kernel(&self, k: Kernel) -> &Vec<Vec<Vec<f64>>> {
        match k {
            Kernel::True => &self.p,
            Kernel::Estimated => &self.p_hat,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    True,
    Estimated,
}

/// How the successor action is chosen inside the Bellman backup.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backup {
    /// `max_a' Q(s', a')`.
    Greedy,
    /// `Q(s', pi(s'))` for a fixed deterministic policy.
    Policy(Vec<usize>),
}

pub type QTable = Vec<Vec<f64>>;

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

fn successor_value(q: &QTable, s: usize, backup: &Backup) -> f64 {
    match backup {
        Backup::Greedy => q[s][argmax(&q[s])],
        Backup::Policy(pi) => q[s][pi[s]],
    }
}

fn bellman(mdp: &TabularMdp, kernel: Kernel, backup: &Backup, q: &QTable) -> QTable {
    let p = mdp.kernel(kernel);
    let v: Vec<f64> = (0..mdp.n_states).map(|s| successor_value(q, s, backup)).collect();
    (0..mdp.n_states)
        .map(|s| {
            (0..mdp.n_actions)
                .map(|a| {
                    let ev: f64 = p[s][a].iter().zip(&v).map(|(pr, x)| pr * x).sum();
                    mdp.reward[s][a] + mdp.gamma * ev
                })
                .collect()
        })
        .collect()
}

/// Sup-norm of `T Q - Q`.
pub fn bellman_residual(mdp: &TabularMdp, kernel: Kernel, backup: &Backup, q: &QTable) -> f64 {
    let tq = bellman(mdp, kernel, backup, q);
    tq.iter()
        .flatten()
        .zip(q.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Iterates the Bellman operator until successive iterates differ by less
/// than `tol` in sup-norm.
pub fn value_iteration(mdp: &TabularMdp, kernel: Kernel, backup: &Backup, tol: f64) -> Result<QTable> {
    const MAX_SWEEPS: usize = 100_000;
    mdp.validate()?;
    let mut q = vec![vec![0.0; mdp.n_actions]; mdp.n_states];
    for _ in 0..MAX_SWEEPS {
        let next = bellman(mdp, kernel, backup, &q);
        let diff = next
            .iter()
            .flatten()
            .zip(q.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if diff < tol {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence(MAX_SWEEPS))
}

/// One-step regret split into a value-error and a transition-error term.
///
/// Successor-action convention: `a'` is greedy w.r.t. `Q*` inside `Q*`
/// terms and greedy w.r.t. `Q` inside `Q` terms; `a''` is greedy w.r.t.
/// `Q`. With `Q*` the greedy fixed point under `P` and `Q` the greedy fixed
/// point under `P_hat`, `lhs = value_error + transition_error` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub lhs: f64,
    /// `gamma E_{s1~P}[Q*(s1, a') - Q(s1, a')]`.
    pub value_error: f64,
    /// `gamma (E_{s1~P}[Q(s1, a')] - E_{s2~P_hat}[Q(s2, a'')])`.
    pub transition_error: f64,
}

impl Decomposition {
    pub fn rhs(&self) -> f64 {
        self.value_error + self.transition_error
    }
}

pub const DECOMPOSITION_CONVENTION: &str =
    "a' = argmax Q*(s1,.) in Q* terms, a' = argmax Q(s1,.) in Q terms, a'' = argmax Q(s2,.); Q is the greedy fixed point under P_hat";

pub fn decomposition_check(mdp: &TabularMdp, q_star: &QTable, q: &QTable, s: usize, a: usize) -> Decomposition {
    let g = mdp.gamma;
    let mut e_qstar = 0.0;
    let mut e_q_under_p = 0.0;
    let mut e_q_under_phat = 0.0;
    for s1 in 0..mdp.n_states {
        let a_star = argmax(&q_star[s1]);
        let a_q = argmax(&q[s1]);
        e_qstar += mdp.p[s][a][s1] * q_star[s1][a_star];
        e_q_under_p += mdp.p[s][a][s1] * q[s1][a_q];
        e_q_under_phat += mdp.p_hat[s][a][s1] * q[s1][a_q];
    }
    Decomposition {
        lhs: q_star[s][a] - q[s][a],
        value_error: g * (e_qstar - e_q_under_p),
        transition_error: g * (e_q_under_p - e_q_under_phat),
    }
}

/// Per-step priorities for a fixed buffer; after the last row priorities
/// stay constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrioritySchedule {
    pub rows: Vec<Vec<f64>>,
}

impl PrioritySchedule {
    pub fn constant(priorities: Vec<f64>) -> Self {
        Self { rows: vec![priorities] }
    }

    /// Each task's priority shrinks by its own factor per step.
    pub fn geometric(initial: &[f64], rates: &[f64], horizon: usize) -> Self {
        let rows = (0..horizon)
            .map(|s| initial.iter().zip(rates).map(|(p, r)| p * r.powi(s as i32)).collect())
            .collect();
        Self { rows }
    }

    /// Initial priorities uniform in `[0.1, 1]`; every step each priority is
    /// multiplied by an independent factor uniform in `[min_factor, 1]`.
    pub fn random_non_increasing<R: Rng + ?Sized>(
        n_tasks: usize,
        horizon: usize,
        min_factor: f64,
        rng: &mut R,
    ) -> Self {
        let mut cur: Vec<f64> = (0..n_tasks).map(|_| rng.gen_range(0.1..=1.0)).collect();
        let mut rows = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            rows.push(cur.clone());
            for p in &mut cur {
                *p *= rng.gen_range(min_factor..=1.0);
            }
        }
        Self { rows }
    }

    pub fn n_tasks(&self) -> usize {
        self.rows[0].len()
    }

    pub fn at(&self, step: usize) -> &[f64] {
        &self.rows[step.min(self.rows.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() || self.rows[0].is_empty() {
            return Err(Error::Config("empty schedule".into()));
        }
        for w in self.rows.windows(2) {
            if w[1].iter().zip(&w[0]).any(|(b, a)| b > a) {
                return Err(Error::Config("schedule is not non-increasing".into()));
            }
        }
        if self.rows.iter().flatten().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::Config("priorities must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    /// Mean number of steps until first selection, counting the selecting
    /// step (so `E[T] = sum_{k >= 0} P[T > k]`).
    pub mean_wait: Vec<f64>,
    /// `|buffer| * M0 / priority_i(t0)`.
    pub bound: Vec<f64>,
    /// Standard error of each mean wait.
    pub std_error: Vec<f64>,
    /// Trials in which some task was never selected within the step cap.
    pub censored_trials: usize,
}

impl StalenessReport {
    pub fn violations(&self) -> Vec<usize> {
        (0..self.bound.len())
            .filter(|&i| self.mean_wait[i] > self.bound[i])
            .collect()
    }

    /// Tasks whose mean wait exceeds the bound by more than `z` standard
    /// errors.
    pub fn significant_violations(&self, z: f64) -> Vec<usize> {
        (0..self.bound.len())
            .filter(|&i| self.mean_wait[i] - self.bound[i] > z * self.std_error[i])
            .collect()
    }
}

/// Samples one task per step proportionally to the scheduled priorities and
/// records when each task is first chosen.
pub fn staleness_simulation<R: Rng + ?Sized>(
    schedule: &PrioritySchedule,
    trials: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<StalenessReport> {
    schedule.validate()?;
    let n = schedule.n_tasks();
    let initial = schedule.at(0);
    let m0 = initial.iter().copied().fold(0.0, f64::max);
    let bound: Vec<f64> = initial.iter().map(|p| n as f64 * m0 / p).collect();
    let mut total = vec![0.0; n];
    let mut total_sq = vec![0.0; n];
    let mut censored = 0;
    for _ in 0..trials {
        let mut first: Vec<Option<usize>> = vec![None; n];
        let mut remaining = n;
        let mut step = 0;
        while remaining > 0 && step < max_steps {
            let row = schedule.at(step);
            let sum: f64 = row.iter().sum();
            let mut u = rng.gen_range(0.0..sum);
            let mut pick = n - 1;
            for (i, p) in row.iter().enumerate() {
                if u < *p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            if first[pick].is_none() {
                first[pick] = Some(step + 1);
                remaining -= 1;
            }
            step += 1;
        }
        if remaining > 0 {
            censored += 1;
        }
        for i in 0..n {
            let w = first[i].unwrap_or(max_steps) as f64;
            total[i] += w;
            total_sq[i] += w * w;
        }
    }
    let k = trials as f64;
    let mean_wait: Vec<f64> = total.iter().map(|t| t / k).collect();
    let std_error = mean_wait
        .iter()
        .zip(&total_sq)
        .map(|(m, sq)| ((sq / k - m * m).max(0.0) / (k - 1.0).max(1.0)).sqrt())
        .collect();
    Ok(StalenessReport {
        mean_wait,
        std_error,
        bound,
        censored_trials: censored,
    })
}

/// Brute-force mean of `Y_j = post_j - pre_j` over the whole buffer.
pub fn mean_difficulty_change(pre: &[f64], post: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..pre.len() {
        s += post[j] - pre[j];
    }
    s / pre.len() as f64
}

/// Central difference of `f` along coordinate `i`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], i: usize, eps: f64) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += eps;
    let up = f(&xp);
    xp[i] = x[i] - eps;
    let dn = f(&xp);
    (up - dn) / (2.0 * eps)
}

/// Relative error `|a - n| / max(|a| + |n|, floor)` between an analytic and
/// a numerical gradient, maximised over the given coordinates. Each
/// coordinate is differenced with steps `eps` and `eps / 10` and the smaller
/// error counts, so a ReLU or loss-piece boundary closer than `eps` to the
/// point does not register as a mismatch.
pub fn gradient_check<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x: &[f64],
    analytic: &[f64],
    coords: &[usize],
    eps: f64,
    floor: f64,
) -> f64 {
    coords
        .iter()
        .map(|&i| {
            [eps, eps / 10.0]
                .map(|h| {
                    let num = central_difference(&mut f, x, i, h);
                    (analytic[i] - num).abs() / (analytic[i].abs() + num.abs()).max(floor)
                })
                .into_iter()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

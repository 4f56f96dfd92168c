//! Regret proxies: positive value loss, the combined transition-aware
//! score, and MaxMC.

use serde::{Deserialize, Serialize};

use crate::agent::{compute_gae, Trajectory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretScore {
    pub pvl: f64,
    pub atpl: f64,
    pub combined: f64,
    pub alpha: f64,
}

/// Mean positive part of the GAE advantages. The divisor is the number of
/// summed terms.
pub fn pvl(traj: &Trajectory, gamma: f64, lambda: f64) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let adv = compute_gae(traj, gamma, lambda).advantages;
    Ok(adv.iter().map(|a| a.max(0.0)).sum::<f64>() / adv.len() as f64)
}

/// PVL over a multi-episode rollout, weighted by episode length.
pub fn pvl_many(trajs: &[Trajectory], gamma: f64, lambda: f64) -> Result<f64> {
    let n: usize = trajs.iter().map(Trajectory::len).sum();
    if n == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut sum = 0.0;
    for t in trajs.iter().filter(|t| !t.is_empty()) {
        sum += pvl(t, gamma, lambda)? * t.len() as f64;
    }
    Ok(sum / n as f64)
}

/// `pvl + alpha * atpl`.
pub fn approx_regret(pvl: f64, atpl: f64, alpha: f64) -> Result<RegretScore> {
    for (what, value) in [("pvl", pvl), ("atpl", atpl), ("alpha", alpha)] {
        if value.is_nan() {
            return Err(Error::NonFinite(what));
        }
        if value < 0.0 {
            return Err(Error::NegativeInput { what, value });
        }
    }
    Ok(RegretScore {
        pvl,
        atpl,
        combined: pvl + alpha * atpl,
        alpha,
    })
}

/// Mean gap between the best return ever seen on the task and the value
/// estimates along the episode. Returns the score and the updated best.
pub fn maxmc(traj: &Trajectory, best_return_so_far: f64) -> Result<(f64, f64)> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let best = best_return_so_far.max(traj.episode_return());
    let score = traj.values.iter().map(|v| best - v).sum::<f64>() / traj.len() as f64;
    Ok((score, best))
}

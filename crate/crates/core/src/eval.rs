//! Zero-shot evaluation on fixed levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ActionSelection, PolicyParams};
use crate::env::Maze;
use crate::error::{Error, Result};
use crate::level::Level;
use crate::nn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelEval {
    pub name: String,
    /// Fraction of episodes with positive return.
    pub solved_rate: f64,
    pub mean_return: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub levels: Vec<LevelEval>,
    pub mean_solved_rate: f64,
    pub median_solved_rate: f64,
}

impl EvalReport {
    pub fn from_levels(levels: Vec<LevelEval>) -> Self {
        let mut rates: Vec<f64> = levels.iter().map(|l| l.solved_rate).collect();
        let mean = if rates.is_empty() {
            0.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        };
        rates.sort_by(f64::total_cmp);
        let median = match rates.len() {
            0 => 0.0,
            n if n % 2 == 1 => rates[n / 2],
            n => (rates[n / 2 - 1] + rates[n / 2]) / 2.0,
        };
        Self {
            levels,
            mean_solved_rate: mean,
            median_solved_rate: median,
        }
    }
}

/// Return of a single episode, capped by the maze's time limit.
pub fn run_episode<R: Rng + ?Sized>(
    params: &PolicyParams,
    maze: &Maze,
    mode: ActionSelection,
    rng: &mut R,
) -> Result<f64> {
    let (mut state, mut obs) = maze.reset();
    let mut ret = 0.0;
    loop {
        let out = params.forward(&obs)?;
        let a = match mode {
            ActionSelection::Greedy => {
                (0..out.logits.len()).fold(0, |best, i| if out.logits[i] > out.logits[best] { i } else { best })
            }
            ActionSelection::Sample => {
                let probs: Vec<f64> = nn::log_softmax(&out.logits).iter().map(|l| l.exp()).collect();
                let mut u: f64 = rng.gen();
                let mut pick = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    if u < *p {
                        pick = i;
                        break;
                    }
                    u -= p;
                }
                pick
            }
        };
        let step = maze.step(&mut state, a)?;
        ret += step.reward;
        obs = step.obs;
        if step.done {
            return Ok(ret);
        }
    }
}

/// Runs `episodes` episodes per level. Each level gets its own stream
/// derived from `seed`, so the result is independent of `workers`.
pub fn evaluate_policy(
    params: &PolicyParams,
    levels: &[(String, Level)],
    episodes: usize,
    t_max: usize,
    mode: ActionSelection,
    seed: u64,
    workers: usize,
) -> Result<EvalReport> {
    if levels.is_empty() {
        return Err(Error::Config("evaluation suite is empty".into()));
    }
    if episodes == 0 {
        return Err(Error::Config("episodes must be >= 1".into()));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = levels.iter().map(|_| seeder.gen()).collect();
    let one = |(name, level): &(String, Level), seed: u64| -> Result<LevelEval> {
        let maze = Maze::new(level, t_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut solved = 0usize;
        let mut total = 0.0;
        for _ in 0..episodes {
            let r = run_episode(params, &maze, mode, &mut rng)?;
            total += r;
            solved += usize::from(r > 0.0);
        }
        Ok(LevelEval {
            name: name.clone(),
            solved_rate: solved as f64 / episodes as f64,
            mean_return: total / episodes as f64,
            episodes,
        })
    };
    let workers = workers.clamp(1, levels.len());
    let chunk = levels.len().div_ceil(workers);
    let results: Vec<Result<LevelEval>> = std::thread::scope(|scope| {
        let handles: Vec<_> = levels
            .chunks(chunk)
            .zip(seeds.chunks(chunk))
            .map(|(ls, ss)| scope.spawn(move || ls.iter().zip(ss).map(|(l, &s)| one(l, s)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    Ok(EvalReport::from_levels(results.into_iter().collect::<Result<_>>()?))
}

//! Deterministic fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use traced_core::agent::rollout_level;
use traced_core::level::generate_random_level;
use traced_core::{
    ActionSelection, BlockCount, CurriculumConfig, CurriculumState, GenerationConfig, Level, Maze, Mode, PolicyLayout,
    PolicyParams, Trajectory,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn levels(n: usize, side: usize, max_blocks: usize) -> Vec<Level> {
    let cfg = GenerationConfig {
        width: side,
        height: side,
        max_blocks,
        block_count: BlockCount::Uniform,
    };
    let mut r = rng(1);
    (0..n)
        .map(|_| generate_random_level(&mut r, &cfg).expect("valid config"))
        .collect()
}

pub fn policy() -> PolicyParams {
    PolicyParams::new(PolicyLayout::default(), &mut rng(2))
}

/// `steps` transitions of a random policy on a 15x15 level.
pub fn trajectories(params: &PolicyParams, steps: usize) -> Vec<Trajectory> {
    let level = levels(1, 15, 60).swap_remove(0);
    let maze = Maze::new(&level, 250).expect("valid level");
    rollout_level(params, &maze, steps, ActionSelection::Sample, &mut rng(3)).expect("finite policy")
}

/// Full buffer of `n` tasks with distinct scores and staleness.
pub fn curriculum(n: usize) -> CurriculumState {
    let cfg = CurriculumConfig {
        buffer_capacity: n,
        ..CurriculumConfig::minigrid()
    };
    let mut state = CurriculumState::new(Mode::Traced, cfg).expect("valid config");
    let level = levels(1, 15, 60).swap_remove(0);
    for i in 0..n {
        state.maybe_insert(level.clone(), ((i * 7919) % n) as f64 / n as f64, 0.0);
    }
    let mut r = rng(4);
    for _ in 0..n / 8 {
        state.t += 1;
        state.sample_replay_batch(&mut r).expect("sampling works");
    }
    state
}

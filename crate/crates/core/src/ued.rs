//! The UED training loop: exploration of fresh levels, prioritized replay
//! with PPO updates, and mutation of low-regret replayed levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    ppo_update, rollout_level, ActionSelection, PolicyLayout, PolicyLearner, PolicyParams, PpoConfig, PpoStats,
    Trajectory,
};
use crate::curriculum::{select_mutation_parents, task_difficulty, CurriculumConfig, CurriculumState, Mode, TaskId};
use crate::dynamics::{atpl_many, train_dynamics, transitions_of, DynamicsConfig, DynamicsLearner, DynamicsParams};
use crate::env::Maze;
use crate::error::{Error, Result};
use crate::level::{generate_random_level, mutate_level, GenerationConfig, Level, MutationConfig};
use crate::scoring::{approx_regret, pvl_many, RegretScore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UedConfig {
    pub mode: Mode,
    pub curriculum: CurriculumConfig,
    pub ppo: PpoConfig,
    pub dynamics: DynamicsConfig,
    pub generation: GenerationConfig,
    pub policy: PolicyLayout,
    pub t_max: usize,
}

impl UedConfig {
    pub fn minigrid(mode: Mode) -> Self {
        Self {
            mode,
            curriculum: CurriculumConfig::minigrid(),
            ppo: PpoConfig::minigrid(),
            dynamics: DynamicsConfig::default(),
            generation: GenerationConfig::minigrid(),
            policy: PolicyLayout::default(),
            t_max: crate::env::DEFAULT_T_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.curriculum.validate()?;
        self.generation.validate()?;
        if self.t_max == 0 {
            return Err(Error::Config("t_max must be >= 1".into()));
        }
        if self.ppo.rollout_length == 0 {
            return Err(Error::Config("rollout_length must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ppo.gamma) || !(0.0..=1.0).contains(&self.ppo.gae_lambda) {
            return Err(Error::Config("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn mutation(&self) -> MutationConfig {
        MutationConfig {
            n_edits: self.curriculum.n_edits,
            max_blocks: self.generation.max_blocks,
            edit_weights: self.curriculum.edit_weights,
        }
    }
}

/// Which branch a step took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Exploration,
    Replay,
    Dr,
}

/// What a log row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Exploration,
    Replay,
    Mutation,
    Dr,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Exploration => "exploration",
            Phase::Replay => "replay",
            Phase::Mutation => "mutation",
            Phase::Dr => "dr",
        }
    }
}

/// One scored level at one update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: u64,
    pub phase: Phase,
    pub task_id: Option<TaskId>,
    pub pvl: f64,
    pub atpl: f64,
    pub combined: f64,
    pub colearnability: Option<f64>,
    pub priority_prob: Option<f64>,
    pub shortest_path_len: Option<usize>,
    pub num_blocks: usize,
    pub mean_return: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: u64,
    pub kind: StepKind,
    pub rows: Vec<LogRow>,
    pub ppo: Option<PpoStats>,
    pub dynamics_loss: Option<f64>,
}

/// A level's rollout and its regret estimate.
struct Scored {
    trajs: Vec<Trajectory>,
    score: RegretScore,
    best_return: f64,
    mean_return: f64,
}

/// Student, transition model and curriculum driven by one seeded stream.
#[derive(Clone, Debug)]
pub struct Ued {
    pub config: UedConfig,
    pub curriculum: CurriculumState,
    pub policy: PolicyLearner,
    pub dynamics: DynamicsLearner,
    rng: ChaCha8Rng,
}

impl Ued {
    pub fn new(config: UedConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = PolicyParams::new(config.policy.clone(), &mut rng);
        let dynamics = DynamicsParams::new(config.dynamics.layout.clone(), &mut rng);
        Ok(Self {
            curriculum: CurriculumState::new(config.mode, config.curriculum.clone())?,
            policy: PolicyLearner::new(policy, &config.ppo),
            dynamics: DynamicsLearner::new(dynamics, &config.dynamics),
            config,
            rng,
        })
    }

    pub fn t(&self) -> u64 {
        self.curriculum.t
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    /// One update of the loop. Every step performs at most one PPO update.
    pub fn step(&mut self) -> Result<StepReport> {
        let t = self.curriculum.t;
        let report = if self.config.mode == Mode::Dr {
            self.dr_step()?
        } else {
            let replay = self.rng.gen_bool(self.config.curriculum.replay_prob);
            if replay && self.curriculum.buffer.len() >= self.config.curriculum.batch_size {
                self.replay_step()?
            } else {
                self.exploration_step()?
            }
        };
        self.curriculum.t = t + 1;
        Ok(report)
    }

    fn fresh_levels(&mut self) -> Result<Vec<Level>> {
        (0..self.config.curriculum.batch_size)
            .map(|_| generate_random_level(&mut self.rng, &self.config.generation))
            .collect()
    }

    /// Rolls out the current policy on each level with its own seed, spread
    /// over `num_workers` threads. Results do not depend on the thread count.
    fn rollouts(&mut self, levels: &[Level]) -> Result<Vec<Vec<Trajectory>>> {
        let seeds: Vec<u64> = levels.iter().map(|_| self.rng.gen()).collect();
        let params = &self.policy.params;
        let horizon = self.config.ppo.rollout_length;
        let t_max = self.config.t_max;
        let run = |level: &Level, seed: u64| -> Result<Vec<Trajectory>> {
            let maze = Maze::new(level, t_max)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rollout_level(params, &maze, horizon, ActionSelection::Sample, &mut rng)
        };
        let workers = self.config.ppo.num_workers.clamp(1, levels.len().max(1));
        if workers == 1 {
            return levels.iter().zip(&seeds).map(|(l, &s)| run(l, s)).collect();
        }
        let chunk = levels.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = levels
                .chunks(chunk)
                .zip(seeds.chunks(chunk))
                .map(|(ls, ss)| scope.spawn(move || ls.iter().zip(ss).map(|(l, &s)| run(l, s)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("rollout worker panicked"))
                .collect()
        })
    }

    fn score(&self, trajs: Vec<Trajectory>, best_so_far: f64) -> Result<Scored> {
        let ppo = &self.config.ppo;
        let alpha = self.curriculum.alpha();
        let pvl = pvl_many(&trajs, ppo.gamma, ppo.gae_lambda)?;
        let atpl = if alpha > 0.0 {
            atpl_many(&self.dynamics.params, &trajs)?
        } else {
            0.0
        };
        let returns: Vec<f64> = trajs
            .iter()
            .filter(|t| t.terminal)
            .map(Trajectory::episode_return)
            .collect();
        let mean_return = if returns.is_empty() {
            0.0
        } else {
            returns.iter().sum::<f64>() / returns.len() as f64
        };
        let best_return = returns.iter().copied().fold(best_so_far, f64::max);
        Ok(Scored {
            score: approx_regret(pvl, atpl, alpha)?,
            trajs,
            best_return,
            mean_return,
        })
    }

    fn train_dynamics_on(&mut self, trajs: &[&Trajectory]) -> Result<Option<f64>> {
        if self.curriculum.alpha() <= 0.0 {
            return Ok(None);
        }
        let owned: Vec<Trajectory> = trajs.iter().map(|t| (*t).clone()).collect();
        let batch = transitions_of(&owned);
        if batch.is_empty() {
            return Ok(None);
        }
        let mut loss = 0.0;
        for _ in 0..self.config.dynamics.steps_per_rollout.max(1) {
            loss = train_dynamics(&mut self.dynamics, &batch, &self.config.dynamics)?;
        }
        Ok(Some(loss))
    }

    fn row(&self, phase: Phase, task_id: Option<TaskId>, level: &Level, s: &Scored) -> LogRow {
        let m = level.metrics();
        LogRow {
            t: self.curriculum.t,
            phase,
            task_id,
            pvl: s.score.pvl,
            atpl: s.score.atpl,
            combined: s.score.combined,
            colearnability: None,
            priority_prob: None,
            shortest_path_len: m.shortest_path_len,
            num_blocks: m.num_blocks,
            mean_return: s.mean_return,
        }
    }

    fn dr_step(&mut self) -> Result<StepReport> {
        let levels = self.fresh_levels()?;
        let rollouts = self.rollouts(&levels)?;
        let mut rows = Vec::new();
        let mut all = Vec::new();
        for (level, trajs) in levels.iter().zip(rollouts) {
            let s = self.score(trajs, 0.0)?;
            rows.push(self.row(Phase::Dr, None, level, &s));
            all.extend(s.trajs);
        }
        let stats = ppo_update(&mut self.policy, &all, &self.config.ppo, &mut self.rng)?;
        Ok(StepReport {
            t: self.curriculum.t,
            kind: StepKind::Dr,
            rows,
            ppo: Some(stats),
            dynamics_loss: None,
        })
    }

    /// Scores fresh levels without touching the policy and offers them to
    /// the buffer.
    fn exploration_step(&mut self) -> Result<StepReport> {
        let levels = self.fresh_levels()?;
        let rollouts = self.rollouts(&levels)?;
        let mut rows = Vec::new();
        let mut scored = Vec::new();
        for (level, trajs) in levels.into_iter().zip(rollouts) {
            let s = self.score(trajs, 0.0)?;
            let ins = self
                .curriculum
                .maybe_insert(level.clone(), s.score.combined, s.best_return);
            rows.push(self.row(Phase::Exploration, ins.inserted(), &level, &s));
            scored.push(s);
        }
        let trajs: Vec<&Trajectory> = scored.iter().flat_map(|s| &s.trajs).collect();
        let dynamics_loss = self.train_dynamics_on(&trajs)?;
        Ok(StepReport {
            t: self.curriculum.t,
            kind: StepKind::Exploration,
            rows,
            ppo: None,
            dynamics_loss,
        })
    }

    fn replay_step(&mut self) -> Result<StepReport> {
        let t = self.curriculum.t;
        let dist = self.curriculum.task_priority_distribution()?;
        let batch = self
            .curriculum
            .sample_replay_batch(&mut self.rng)?
            .ok_or(Error::EmptyBuffer)?;
        let probs: Vec<f64> = batch
            .iter()
            .map(|id| dist[self.curriculum.index_of(*id).unwrap()])
            .collect();
        let levels: Vec<Level> = batch
            .iter()
            .map(|id| self.curriculum.get(*id).unwrap().level.clone())
            .collect();
        let rollouts = self.rollouts(&levels)?;

        let mut rows = Vec::new();
        let mut all = Vec::new();
        let mut credit = Vec::new();
        let mut scored_batch = Vec::new();
        for (((id, level), trajs), prob) in batch.iter().zip(&levels).zip(rollouts).zip(probs) {
            let rec = self.curriculum.get(*id).unwrap();
            let pre = task_difficulty(rec, t);
            let s = self.score(trajs, rec.best_return)?;
            let rec = self.curriculum.get_mut(*id).unwrap();
            rec.record(t, s.score.combined)?;
            rec.best_return = s.best_return;
            credit.push((*id, pre, s.score.combined));
            scored_batch.push((*id, s.score.combined));
            let mut row = self.row(Phase::Replay, Some(*id), level, &s);
            row.priority_prob = Some(prob);
            rows.push(row);
            all.extend(s.trajs);
        }
        let stats = ppo_update(&mut self.policy, &all, &self.config.ppo, &mut self.rng)?;
        self.curriculum.update_colearnability(&credit);
        for row in &mut rows {
            row.colearnability = row
                .task_id
                .and_then(|id| self.curriculum.get(id))
                .map(|r| r.colearnability);
        }
        let refs: Vec<&Trajectory> = all.iter().collect();
        let dynamics_loss = self.train_dynamics_on(&refs)?;

        if self.config.mode.mutates() {
            let parents = select_mutation_parents(&scored_batch, self.config.curriculum.n_mutate);
            let mcfg = self.config.mutation();
            let children: Vec<Level> = parents
                .iter()
                .map(|id| mutate_level(&self.curriculum.get(*id).unwrap().level, &mcfg, &mut self.rng))
                .collect::<Result<_>>()?;
            let rollouts = self.rollouts(&children)?;
            for ((parent, child), trajs) in parents.iter().zip(children).zip(rollouts) {
                let s = self.score(trajs, 0.0)?;
                let id = self
                    .curriculum
                    .replace_task(*parent, child.clone(), s.score.combined, s.best_return)?;
                rows.push(self.row(Phase::Mutation, Some(id), &child, &s));
            }
        }
        Ok(StepReport {
            t,
            kind: StepKind::Replay,
            rows,
            ppo: Some(stats),
            dynamics_loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::level::BlockCount;

    fn tiny(mode: Mode) -> UedConfig {
        UedConfig {
            mode,
            curriculum: CurriculumConfig {
                buffer_capacity: 8,
                n_mutate: 2,
                ..CurriculumConfig::minigrid()
            },
            ppo: PpoConfig {
                rollout_length: 8,
                epochs: 1,
                num_workers: 1,
                ..PpoConfig::minigrid()
            },
            dynamics: DynamicsConfig {
                layout: crate::dynamics::DynamicsLayout { hidden: vec![8] },
                ..DynamicsConfig::default()
            },
            generation: GenerationConfig {
                width: 7,
                height: 7,
                max_blocks: 10,
                block_count: BlockCount::Uniform,
            },
            policy: PolicyLayout {
                image_hidden: 8,
                dir_hidden: 5,
                head_hidden: vec![8],
            },
            t_max: 20,
        }
    }

    #[test]
    fn exploration_never_writes_policy() {
        let mut ued = Ued::new(tiny(Mode::Traced), 3).unwrap();
        let mut explored = 0;
        for _ in 0..60 {
            let before = ued.policy.params.hash();
            let r = ued.step().unwrap();
            if r.kind == StepKind::Exploration {
                assert_eq!(ued.policy.params.hash(), before);
                assert!(r.ppo.is_none());
                explored += 1;
            } else {
                assert_ne!(ued.policy.params.hash(), before);
            }
            assert!(ued.curriculum.buffer.len() <= 8);
        }
        assert!(explored > 0);
    }

    #[test]
    fn dr_keeps_buffer_empty() {
        let mut ued = Ued::new(tiny(Mode::Dr), 1).unwrap();
        for _ in 0..10 {
            assert_eq!(ued.step().unwrap().kind, StepKind::Dr);
            assert!(ued.curriculum.buffer.is_empty());
        }
    }

    #[test]
    fn plr_never_mutates() {
        let mut ued = Ued::new(tiny(Mode::PlrPerp), 2).unwrap();
        for _ in 0..30 {
            let r = ued.step().unwrap();
            assert!(r.rows.iter().all(|row| row.phase != Phase::Mutation));
        }
    }

    #[test]
    fn mutation_replaces_in_place() {
        let mut ued = Ued::new(tiny(Mode::Accel), 5).unwrap();
        let mut checked = 0;
        for _ in 0..40 {
            let before: Vec<TaskId> = ued.curriculum.buffer.iter().map(|r| r.id).collect();
            let r = ued.step().unwrap();
            if r.kind != StepKind::Replay {
                continue;
            }
            let after: Vec<TaskId> = ued.curriculum.buffer.iter().map(|r| r.id).collect();
            assert_eq!(before.len(), after.len());
            let children: Vec<TaskId> = r
                .rows
                .iter()
                .filter(|x| x.phase == Phase::Mutation)
                .filter_map(|x| x.task_id)
                .collect();
            assert_eq!(children.len(), 2);
            let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
            assert_eq!(changed, 2);
            for c in children {
                assert!(!before.contains(&c) && after.contains(&c));
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let run = |workers: usize| {
            let mut cfg = tiny(Mode::Traced);
            cfg.ppo.num_workers = workers;
            let mut ued = Ued::new(cfg, 11).unwrap();
            let rows: Vec<LogRow> = (0..15).flat_map(|_| ued.step().unwrap().rows).collect();
            (rows, ued.policy.params.hash(), ued.dynamics.params.hash())
        };
        assert_eq!(run(1), run(1));
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn accel_scores_ignore_dynamics() {
        let mut ued = Ued::new(tiny(Mode::Accel), 8).unwrap();
        let h = ued.dynamics.params.hash();
        for _ in 0..10 {
            let r = ued.step().unwrap();
            assert!(r.rows.iter().all(|row| row.atpl == 0.0 && row.combined == row.pvl));
        }
        assert_eq!(ued.dynamics.params.hash(), h);
    }
}

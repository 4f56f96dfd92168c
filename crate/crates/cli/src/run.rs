//! Training runs, checkpoints and held-out evaluation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use traced_core::{
    evaluate_policy, held_out_suite, ActionSelection, DynamicsParams, EvalReport, Level, LogRow, Mode, PolicyParams,
    StepKind, SuiteSize, TaskRecord, Ued,
};

use crate::config::RunConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub t: u64,
    pub mode: Mode,
    pub seed: u64,
    pub t_max: usize,
    pub policy: PolicyParams,
    pub dynamics: DynamicsParams,
}

impl Checkpoint {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
        let ck: Self = serde_json::from_str(&text).with_context(|| format!("corrupt checkpoint {}", path.display()))?;
        if ck.version != CHECKPOINT_VERSION {
            bail!(
                "checkpoint {} has version {}, expected {CHECKPOINT_VERSION}",
                path.display(),
                ck.version
            );
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        write_file(path, &serde_json::to_string(self)?)
    }
}

/// Row of `updates.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: u64,
    pub phase: String,
    pub task_id: Option<u64>,
    pub pvl: f64,
    pub atpl: f64,
    pub combined: f64,
    pub colearnability: Option<f64>,
    pub priority_prob: Option<f64>,
    pub shortest_path_len: Option<usize>,
    pub num_blocks: usize,
    pub mean_return: f64,
}

impl From<&LogRow> for UpdateRecord {
    fn from(r: &LogRow) -> Self {
        Self {
            t: r.t,
            phase: r.phase.name().to_string(),
            task_id: r.task_id,
            pvl: r.pvl,
            atpl: r.atpl,
            combined: r.combined,
            colearnability: r.colearnability,
            priority_prob: r.priority_prob,
            shortest_path_len: r.shortest_path_len,
            num_blocks: r.num_blocks,
            mean_return: r.mean_return,
        }
    }
}

/// Row of `ppo.csv`: one per update.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainRecord {
    pub t: u64,
    pub kind: String,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub grad_norm: Option<f64>,
    pub n_samples: Option<usize>,
    pub dynamics_loss: Option<f64>,
    pub buffer_size: usize,
}

/// Row of `eval.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub t: u64,
    pub level: String,
    pub solved_rate: f64,
    pub mean_return: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub seed: u64,
    pub total_updates: u64,
    pub replay_steps: u64,
    pub exploration_steps: u64,
    pub buffer_size: usize,
    pub final_eval: EvalReport,
    pub policy_hash: String,
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Loads every `*.json` level in `dir`, sorted by file name. All unreadable
/// files are reported together.
pub fn load_suite_dir(dir: &Path) -> anyhow::Result<Vec<(String, Level)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read suite directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut levels = Vec::new();
    let mut errors = Vec::new();
    for p in paths {
        let name = p
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        match fs::read_to_string(&p)
            .map_err(|e| e.to_string())
            .and_then(|t| Level::from_json(&t).map_err(|e| e.to_string()))
        {
            Ok(level) => levels.push((name, level)),
            Err(e) => errors.push(format!("  {}: {e}", p.display())),
        }
    }
    if !errors.is_empty() {
        bail!("{} level file(s) failed to load:\n{}", errors.len(), errors.join("\n"));
    }
    if levels.is_empty() {
        bail!("suite directory {} contains no level files", dir.display());
    }
    Ok(levels)
}

/// `desk`, `full`, or a directory path.
pub fn resolve_suite(name: &str) -> anyhow::Result<Vec<(String, Level)>> {
    match name.parse::<SuiteSize>() {
        Ok(size) => Ok(held_out_suite(size)),
        Err(_) => load_suite_dir(Path::new(name)),
    }
}

/// Seed of the held-out evaluation after update `t`.
pub fn eval_seed(seed: u64, t: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ t
}

pub fn evaluate_params(
    policy: &PolicyParams,
    suite: &[(String, Level)],
    episodes: usize,
    t_max: usize,
    seed: u64,
    workers: usize,
) -> anyhow::Result<EvalReport> {
    Ok(evaluate_policy(
        policy,
        suite,
        episodes,
        t_max,
        ActionSelection::Sample,
        seed,
        workers,
    )?)
}

/// Evaluates a saved checkpoint without modifying it.
pub fn evaluate_checkpoint(path: &Path, suite: &str, episodes: usize, seed: u64) -> anyhow::Result<EvalReport> {
    let ck = Checkpoint::load(path)?;
    let levels = resolve_suite(suite)?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    evaluate_params(&ck.policy, &levels, episodes, ck.t_max, seed, workers)
}

/// Runs the configured number of updates and writes all artifacts to
/// `cfg.out`. The output is a pure function of the configuration.
pub fn run_experiment(cfg: &RunConfig) -> anyhow::Result<RunSummary> {
    run_experiment_with(cfg, |_, _| {})
}

/// Like [`run_experiment`], calling `progress(t, kind)` after each update.
pub fn run_experiment_with<F: FnMut(u64, StepKind)>(cfg: &RunConfig, mut progress: F) -> anyhow::Result<RunSummary> {
    cfg.validate()?;
    let suite = resolve_suite(&cfg.eval_suite)?;
    let out = &cfg.out;
    fs::create_dir_all(out.join("checkpoints")).with_context(|| format!("cannot create {}", out.display()))?;
    fs::create_dir_all(out.join("buffer"))?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;

    let mut updates = csv::Writer::from_path(out.join("updates.csv"))?;
    let mut train = csv::Writer::from_path(out.join("ppo.csv"))?;
    let mut evals = csv::Writer::from_path(out.join("eval.csv"))?;

    let mut ued = Ued::new(cfg.ued(), cfg.seed)?;
    let workers = cfg.ppo.num_workers.max(1);
    let mut replay_steps = 0;
    let mut exploration_steps = 0;
    let mut last_eval = None;

    let checkpoint = |ued: &Ued, name: &str| -> anyhow::Result<()> {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            t: ued.t(),
            mode: cfg.mode,
            seed: cfg.seed,
            t_max: cfg.t_max,
            policy: ued.policy.params.clone(),
            dynamics: ued.dynamics.params.clone(),
        }
        .save(&out.join("checkpoints").join(name))
    };
    let snapshot = |ued: &Ued, name: &str| -> anyhow::Result<()> {
        let buf: &Vec<TaskRecord> = &ued.curriculum.buffer;
        write_file(&out.join("buffer").join(name), &serde_json::to_string(buf)?)
    };

    for _ in 0..cfg.total_updates {
        let report = ued.step()?;
        match report.kind {
            StepKind::Replay => replay_steps += 1,
            StepKind::Exploration => exploration_steps += 1,
            StepKind::Dr => {}
        }
        for row in &report.rows {
            updates.serialize(UpdateRecord::from(row))?;
        }
        let stats = report.ppo.as_ref();
        train.serialize(TrainRecord {
            t: report.t,
            kind: format!("{:?}", report.kind).to_lowercase(),
            policy_loss: stats.map(|s| s.policy_loss),
            value_loss: stats.map(|s| s.value_loss),
            entropy: stats.map(|s| s.entropy),
            grad_norm: stats.map(|s| s.grad_norm),
            n_samples: stats.map(|s| s.n_samples),
            dynamics_loss: report.dynamics_loss,
            buffer_size: ued.curriculum.buffer.len(),
        })?;
        let done = ued.t();
        let is_last = done == cfg.total_updates;
        if is_last || (cfg.eval_every > 0 && done % cfg.eval_every == 0) {
            let r = evaluate_params(
                &ued.policy.params,
                &suite,
                cfg.eval_episodes,
                cfg.t_max,
                eval_seed(cfg.seed, done),
                workers,
            )?;
            for l in &r.levels {
                evals.serialize(EvalRecord {
                    t: done,
                    level: l.name.clone(),
                    solved_rate: l.solved_rate,
                    mean_return: l.mean_return,
                    episodes: l.episodes,
                })?;
            }
            evals.flush()?;
            last_eval = Some(r);
        }
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 {
            checkpoint(&ued, &format!("ckpt_{done:06}.json"))?;
        }
        if cfg.snapshot_every > 0 && done % cfg.snapshot_every == 0 {
            snapshot(&ued, &format!("buffer_{done:06}.json"))?;
        }
        progress(done, report.kind);
    }
    updates.flush()?;
    train.flush()?;
    checkpoint(&ued, "final.json")?;
    snapshot(&ued, "final.json")?;

    let summary = RunSummary {
        mode: cfg.mode,
        seed: cfg.seed,
        total_updates: cfg.total_updates,
        replay_steps,
        exploration_steps,
        buffer_size: ued.curriculum.buffer.len(),
        final_eval: last_eval.expect("the last update is always evaluated"),
        policy_hash: format!("{:016x}", ued.policy.params.hash()),
    };
    write_file(&out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

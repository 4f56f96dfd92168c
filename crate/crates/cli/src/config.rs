//! Run configuration: one TOML file with a section per component.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use traced_core::{
    BlockCount, CurriculumConfig, DynamicsConfig, DynamicsLayout, GenerationConfig, Mode, PolicyLayout, PpoConfig,
    UedConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub total_updates: u64,
    /// Held-out evaluation period in updates; 0 evaluates only at the end.
    pub eval_every: u64,
    pub eval_episodes: usize,
    /// `desk`, `full`, or a directory of level JSON files.
    pub eval_suite: String,
    pub checkpoint_every: u64,
    pub snapshot_every: u64,
    pub out: PathBuf,
    pub t_max: usize,
    pub grid: GenerationConfig,
    pub curriculum: CurriculumConfig,
    pub ppo: PpoConfig,
    pub dynamics: DynamicsConfig,
    pub policy: PolicyLayout,
}

impl RunConfig {
    /// Reference MiniGrid hyperparameters at full scale.
    pub fn minigrid() -> Self {
        let ued = UedConfig::minigrid(Mode::Traced);
        Self {
            mode: Mode::Traced,
            seed: 0,
            total_updates: 10_000,
            eval_every: 500,
            eval_episodes: 100,
            eval_suite: "full".into(),
            checkpoint_every: 1000,
            snapshot_every: 1000,
            out: PathBuf::from("runs/minigrid"),
            t_max: ued.t_max,
            grid: ued.generation,
            curriculum: ued.curriculum,
            ppo: ued.ppo,
            dynamics: ued.dynamics,
            policy: ued.policy,
        }
    }

    /// 11x11 single-machine setting that finishes in minutes.
    pub fn desk() -> Self {
        Self {
            mode: Mode::Traced,
            seed: 0,
            total_updates: 400,
            eval_every: 100,
            eval_episodes: 50,
            eval_suite: "desk".into(),
            checkpoint_every: 200,
            snapshot_every: 200,
            out: PathBuf::from("runs/desk"),
            t_max: traced_core::env::DEFAULT_T_MAX,
            grid: GenerationConfig {
                width: 11,
                height: 11,
                max_blocks: 25,
                block_count: BlockCount::Uniform,
            },
            curriculum: CurriculumConfig {
                buffer_capacity: 64,
                ..CurriculumConfig::minigrid()
            },
            ppo: PpoConfig {
                rollout_length: 256,
                num_workers: 4,
                learning_rate: 5e-4,
                entropy_coef: 0.01,
                ..PpoConfig::minigrid()
            },
            dynamics: DynamicsConfig {
                layout: DynamicsLayout { hidden: vec![64, 64] },
                ..DynamicsConfig::default()
            },
            policy: PolicyLayout::default(),
        }
    }

    pub fn preset(name: &str) -> anyhow::Result<Self> {
        match name {
            "minigrid" => Ok(Self::minigrid()),
            "desk" => Ok(Self::desk()),
            _ => bail!("unknown preset {name:?} (expected desk or minigrid)"),
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file, or a preset when `path` is `desk` or `minigrid`.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.exists() {
            if let Some(name) = path.to_str() {
                if let Ok(cfg) = Self::preset(name) {
                    return Ok(cfg);
                }
            }
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serialises")
    }

    pub fn ued(&self) -> UedConfig {
        UedConfig {
            mode: self.mode,
            curriculum: self.curriculum.clone(),
            ppo: self.ppo.clone(),
            dynamics: self.dynamics.clone(),
            generation: self.grid,
            policy: self.policy.clone(),
            t_max: self.t_max,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.total_updates == 0 {
            bail!("total_updates: must be >= 1");
        }
        if self.eval_episodes == 0 {
            bail!("eval_episodes: must be >= 1");
        }
        let p = &self.ppo;
        for (name, v) in [
            ("ppo.learning_rate", p.learning_rate),
            ("ppo.clip_range", p.clip_range),
            ("ppo.max_grad_norm", p.max_grad_norm),
            ("ppo.value_loss_coef", p.value_loss_coef),
            ("ppo.entropy_coef", p.entropy_coef),
            ("dynamics.learning_rate", self.dynamics.learning_rate),
        ] {
            if v < 0.0 || !v.is_finite() {
                bail!("{name}: must be a finite value >= 0, got {v}");
            }
        }
        if p.epochs == 0 || p.minibatches == 0 {
            bail!("ppo.epochs and ppo.minibatches: must be >= 1");
        }
        self.ued().validate().map_err(|e| anyhow::anyhow!("{e}"))
    }
}

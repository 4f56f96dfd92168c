//! Task buffer scheduling: difficulty history, co-learnability, rank-based
//! priority with staleness mixing, replay sampling, insertion and mutation
//! parent selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::{Level, LevelMetrics};

pub type TaskId = u64;

/// Curriculum variant. Baselines and ablations switch parts of the
/// scheduler off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Traced,
    Accel,
    #[serde(rename = "plr")]
    PlrPerp,
    Dr,
    #[serde(rename = "traced-no-atpl")]
    TracedNoAtpl,
    #[serde(rename = "traced-no-cl")]
    TracedNoCl,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Traced,
        Mode::Accel,
        Mode::PlrPerp,
        Mode::Dr,
        Mode::TracedNoAtpl,
        Mode::TracedNoCl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Traced => "traced",
            Mode::Accel => "accel",
            Mode::PlrPerp => "plr",
            Mode::Dr => "dr",
            Mode::TracedNoAtpl => "traced-no-atpl",
            Mode::TracedNoCl => "traced-no-cl",
        }
    }

    pub fn uses_buffer(self) -> bool {
        self != Mode::Dr
    }

    pub fn mutates(self) -> bool {
        !matches!(self, Mode::Dr | Mode::PlrPerp)
    }

    /// ATPL weight actually applied in this mode.
    pub fn alpha(self, cfg: &CurriculumConfig) -> f64 {
        match self {
            Mode::Traced | Mode::TracedNoCl => cfg.alpha,
            _ => 0.0,
        }
    }

    /// Co-learnability weight actually applied in this mode.
    pub fn beta(self, cfg: &CurriculumConfig) -> f64 {
        match self {
            Mode::Traced | Mode::TracedNoAtpl => cfg.beta,
            _ => 0.0,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumConfig {
    pub alpha: f64,
    pub beta: f64,
    pub replay_prob: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub n_mutate: usize,
    pub n_edits: usize,
    pub edit_weights: [f64; 3],
    /// Rank temperature. `inf` samples proportionally to the raw score.
    pub temperature: f64,
    pub staleness_coef: f64,
}

impl CurriculumConfig {
    /// MiniGrid column of the reference hyperparameter table.
    pub fn minigrid() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            replay_prob: 0.8,
            buffer_capacity: 4000,
            batch_size: 4,
            n_mutate: 4,
            n_edits: 5,
            edit_weights: [0.8, 0.1, 0.1],
            temperature: 0.3,
            staleness_coef: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.alpha.is_nan() || self.alpha < 0.0 || self.beta.is_nan() || self.beta < 0.0 {
            return bad("alpha and beta must be >= 0".into());
        }
        for (name, p) in [
            ("replay_prob", self.replay_prob),
            ("staleness_coef", self.staleness_coef),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 {
            return bad("buffer_capacity and batch_size must be >= 1".into());
        }
        if self.batch_size > self.buffer_capacity {
            return bad("batch_size exceeds buffer_capacity".into());
        }
        if self.n_edits == 0 {
            return bad("n_edits must be >= 1".into());
        }
        if self.temperature.is_nan() || self.temperature <= 0.0 {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.edit_weights.iter().any(|w| w.is_nan() || *w < 0.0) || self.edit_weights.iter().sum::<f64>() <= 0.0 {
            return bad("edit_weights must be non-negative with a positive sum".into());
        }
        Ok(())
    }
}

/// A buffered level with its difficulty history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: TaskId,
    pub level: Level,
    pub metrics: LevelMetrics,
    /// `(update index, combined regret)`, strictly increasing in time.
    pub history: Vec<(u64, f64)>,
    pub colearnability: f64,
    pub last_sampled: Option<u64>,
    pub best_return: f64,
    pub created_at: u64,
}

impl TaskRecord {
    pub fn new(id: TaskId, level: Level, created_at: u64) -> Self {
        let metrics = level.metrics();
        Self {
            id,
            level,
            metrics,
            history: Vec::new(),
            colearnability: 0.0,
            last_sampled: None,
            best_return: 0.0,
            created_at,
        }
    }

    /// Appends a history entry; timestamps must increase strictly.
    pub fn record(&mut self, t: u64, score: f64) -> Result<()> {
        if self.history.last().is_some_and(|&(last, _)| last >= t) {
            return Err(Error::Config(format!(
                "task {} already has a difficulty entry at or after {t}",
                self.id
            )));
        }
        self.history.push((t, score));
        Ok(())
    }

    pub fn latest_difficulty(&self) -> f64 {
        self.history.last().map_or(0.0, |&(_, s)| s)
    }
}

/// Latest recorded regret at or before `t`; zero before the first entry.
pub fn task_difficulty(record: &TaskRecord, t: u64) -> f64 {
    let idx = record.history.partition_point(|&(s, _)| s <= t);
    if idx == 0 {
        0.0
    } else {
        record.history[idx - 1].1
    }
}

/// Mean difficulty reduction over a replay batch.
pub fn colearnability_value(pre: &[f64], post: &[f64]) -> f64 {
    if pre.is_empty() {
        return 0.0;
    }
    pre.iter().zip(post).map(|(a, b)| a - b).sum::<f64>() / pre.len() as f64
}

/// Rank-transformed weights `(1 / rank)^(1 / temperature)`, rank 1 for the
/// highest score; ties keep input order. `temperature = inf` returns the
/// scores shifted to be positive.
pub fn rank_weights(scores: &[f64], temperature: f64) -> Vec<f64> {
    if temperature.is_infinite() {
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = if min <= 0.0 { -min + 1e-6 } else { 0.0 };
        return scores.iter().map(|s| s + shift).collect();
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut w = vec![0.0; scores.len()];
    for (rank0, &i) in order.iter().enumerate() {
        w[i] = (1.0 / (rank0 + 1) as f64).powf(1.0 / temperature);
    }
    w
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    if s > 0.0 && s.is_finite() {
        w.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|x| *x = u);
    }
}

/// What [`CurriculumState::maybe_insert`] did with a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Insertion {
    Inserted(TaskId),
    Replaced { evicted: TaskId, inserted: TaskId },
    Discarded,
}

impl Insertion {
    pub fn inserted(self) -> Option<TaskId> {
        match self {
            Insertion::Inserted(id) | Insertion::Replaced { inserted: id, .. } => Some(id),
            Insertion::Discarded => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub mode: Mode,
    pub config: CurriculumConfig,
    /// Buffer in slot order.
    pub buffer: Vec<TaskRecord>,
    /// Tasks of the most recent replay batch, awaiting co-learnability credit.
    pub prev_replay_batch: Vec<TaskId>,
    pub t: u64,
    next_id: TaskId,
}

impl CurriculumState {
    pub fn new(mode: Mode, config: CurriculumConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            mode,
            config,
            buffer: Vec::new(),
            prev_replay_batch: Vec::new(),
            t: 0,
            next_id: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.mode.alpha(&self.config)
    }

    pub fn beta(&self) -> f64 {
        self.mode.beta(&self.config)
    }

    pub fn fresh_id(&mut self) -> TaskId {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn index_of(&self, id: TaskId) -> Option<usize> {
        self.buffer.iter().position(|r| r.id == id)
    }

    pub fn get(&self, id: TaskId) -> Option<&TaskRecord> {
        self.buffer.iter().find(|r| r.id == id)
    }

    pub fn get_mut(&mut self, id: TaskId) -> Option<&mut TaskRecord> {
        self.buffer.iter_mut().find(|r| r.id == id)
    }

    /// `difficulty + beta * colearnability` for every buffered task.
    pub fn priority_scores(&self) -> Vec<f64> {
        let beta = self.beta();
        self.buffer
            .iter()
            .map(|r| task_difficulty(r, self.t) + beta * r.colearnability)
            .collect()
    }

    fn staleness_weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .buffer
            .iter()
            .map(|r| match r.last_sampled {
                Some(s) => self.t.saturating_sub(s) as f64,
                None => self.t as f64 + 1.0,
            })
            .collect();
        normalize(&mut w);
        w
    }

    /// `(1 - rho) * rank distribution + rho * staleness distribution`.
    pub fn task_priority_distribution(&self) -> Result<Vec<f64>> {
        if self.buffer.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let scores = self.priority_scores();
        // Tie order follows task id; the buffer is not always in id order
        // after in-place replacement.
        let mut by_id: Vec<usize> = (0..scores.len()).collect();
        by_id.sort_by_key(|&i| self.buffer[i].id);
        let sorted: Vec<f64> = by_id.iter().map(|&i| scores[i]).collect();
        let sorted_w = rank_weights(&sorted, self.config.temperature);
        let mut h = vec![0.0; scores.len()];
        for (k, &i) in by_id.iter().enumerate() {
            h[i] = sorted_w[k];
        }
        normalize(&mut h);
        let rho = self.config.staleness_coef;
        if rho > 0.0 {
            let st = self.staleness_weights();
            for (p, s) in h.iter_mut().zip(st) {
                *p = (1.0 - rho) * *p + rho * s;
            }
        }
        Ok(h)
    }

    /// Draws `batch_size` distinct tasks, renormalising after each draw,
    /// and stamps them as sampled at the current update. `None` when the
    /// buffer is smaller than the batch.
    pub fn sample_replay_batch<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<Vec<TaskId>>> {
        let b = self.config.batch_size;
        if self.buffer.len() < b {
            return Ok(None);
        }
        let mut p = self.task_priority_distribution()?;
        let mut out = Vec::with_capacity(b);
        for _ in 0..b {
            let total: f64 = p.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.gen_range(0.0..total);
                let mut pick = None;
                for (i, w) in p.iter().enumerate() {
                    if *w <= 0.0 {
                        continue;
                    }
                    if u < *w {
                        pick = Some(i);
                        break;
                    }
                    u -= w;
                }
                pick.unwrap_or_else(|| p.iter().rposition(|w| *w > 0.0).unwrap())
            } else {
                // Remaining mass underflowed: take the first unpicked slot.
                (0..p.len()).find(|i| !out.contains(&self.buffer[*i].id)).unwrap()
            };
            p[pick] = 0.0;
            out.push(self.buffer[pick].id);
        }
        let t = self.t;
        for id in &out {
            if let Some(r) = self.get_mut(*id) {
                r.last_sampled = Some(t);
            }
        }
        Ok(Some(out))
    }

    /// Inserts a scored candidate, evicting the lowest-priority task when
    /// full and the candidate beats it. The new record's history is seeded
    /// with the candidate score.
    pub fn maybe_insert(&mut self, level: Level, combined: f64, best_return: f64) -> Insertion {
        let t = self.t;
        let make = |this: &mut Self| {
            let mut rec = TaskRecord::new(this.fresh_id(), level, t);
            rec.history.push((t, combined));
            rec.best_return = best_return;
            rec
        };
        if self.buffer.len() < self.config.buffer_capacity {
            let rec = make(self);
            let id = rec.id;
            self.buffer.push(rec);
            return Insertion::Inserted(id);
        }
        let scores = self.priority_scores();
        let (slot, min) = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(self.buffer[a.0].id.cmp(&self.buffer[b.0].id)))
            .map(|(i, s)| (i, *s))
            .expect("full buffer is non-empty");
        if combined > min {
            let evicted = self.buffer[slot].id;
            let rec = make(self);
            let inserted = rec.id;
            self.buffer[slot] = rec;
            self.prev_replay_batch.retain(|&id| id != evicted);
            Insertion::Replaced { evicted, inserted }
        } else {
            Insertion::Discarded
        }
    }

    /// Credits every task of the previous replay batch with the mean
    /// difficulty reduction of the current batch, then makes the current
    /// batch the previous one. `current` holds `(id, pre, post)`.
    pub fn update_colearnability(&mut self, current: &[(TaskId, f64, f64)]) {
        if !self.prev_replay_batch.is_empty() && !current.is_empty() {
            let pre: Vec<f64> = current.iter().map(|c| c.1).collect();
            let post: Vec<f64> = current.iter().map(|c| c.2).collect();
            let value = colearnability_value(&pre, &post);
            for id in std::mem::take(&mut self.prev_replay_batch) {
                if let Some(r) = self.get_mut(id) {
                    r.colearnability = value;
                }
            }
        }
        self.prev_replay_batch = current.iter().map(|c| c.0).collect();
    }

    /// Replaces `parent` in its slot with a new record for `level`, seeded
    /// with `combined` at the current update.
    pub fn replace_task(&mut self, parent: TaskId, level: Level, combined: f64, best_return: f64) -> Result<TaskId> {
        let slot = self.index_of(parent).ok_or(Error::UnknownTask(parent))?;
        let id = self.fresh_id();
        let mut rec = TaskRecord::new(id, level, self.t);
        rec.history.push((self.t, combined));
        rec.best_return = best_return;
        self.buffer[slot] = rec;
        self.prev_replay_batch.retain(|&p| p != parent);
        Ok(id)
    }
}

/// The `n` lowest-scoring tasks of a scored batch; ties by id.
pub fn select_mutation_parents(scored_batch: &[(TaskId, f64)], n: usize) -> Vec<TaskId> {
    let mut v = scored_batch.to_vec();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(n).map(|(id, _)| id).collect()
}

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use traced_bench::{curriculum, levels, policy, rng, trajectories};
use traced_core::agent::{ppo_update, PolicyLearner};
use traced_core::{Maze, PpoConfig};

fn level_metrics(c: &mut Criterion) {
    let ls = levels(64, 15, 60);
    c.bench_function("level_metrics_15x15_x64", |b| {
        b.iter(|| {
            ls.iter()
                .map(|l| l.metrics().shortest_path_len.unwrap_or(0))
                .sum::<usize>()
        })
    });
}

fn policy_forward(c: &mut Criterion) {
    let params = policy();
    let obs = Maze::new(&levels(1, 15, 60)[0], 250).unwrap().reset().1;
    c.bench_function("policy_forward", |b| {
        b.iter(|| params.forward(black_box(&obs)).unwrap())
    });
}

fn ppo(c: &mut Criterion) {
    let params = policy();
    let trajs = trajectories(&params, 256);
    let cfg = PpoConfig::minigrid();
    c.bench_function("ppo_update_256_steps", |b| {
        b.iter_batched(
            || PolicyLearner::new(params.clone(), &cfg),
            |mut learner| ppo_update(&mut learner, &trajs, &cfg, &mut rng(5)).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
}

fn priority(c: &mut Criterion) {
    let state = curriculum(4000);
    c.bench_function("priority_distribution_4000", |b| {
        b.iter(|| state.task_priority_distribution().unwrap())
    });
}

criterion_group!(benches, level_metrics, policy_forward, ppo, priority);
criterion_main!(benches);

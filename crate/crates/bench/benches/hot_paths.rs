use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use dynasto_core::analytics::{knn_graph, leiden_cluster, levenshtein, levenshtein_distances};
use dynasto_core::reward::EpisodeConfig;
use dynasto_core::rl::{td_loss_and_grad, QNetwork, Transition};
use dynasto_core::search::replay_episode;
use dynasto_core::sim::{ConstantPolicy, MetaAction, Observation, ScenarioConfig};
use dynasto_core::validity::{classify_failure, SafeDistanceParams};

fn episode(c: &mut Criterion) {
    let ep = EpisodeConfig::default();
    // adversary brakes in front of an accelerating ego
    let config = ScenarioConfig::straight(250.0, 290.0, 0, 0, 25.0);
    let actions = vec![MetaAction::Slower; 40];
    c.bench_function("episode_40_steps", |b| {
        b.iter(|| replay_episode(&config, &actions, &ConstantPolicy(MetaAction::Faster), &ep, 0).unwrap())
    });
    let trace = replay_episode(&config, &actions, &ConstantPolicy(MetaAction::Faster), &ep, 0).unwrap();
    assert!(trace.collided);
    let p = SafeDistanceParams::default();
    c.bench_function("classify_trace", |b| b.iter(|| classify_failure(black_box(&trace), &p)));
}

fn td_update(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let q = QNetwork::new(&[8, 64, 64, 5], &mut rng).unwrap();
    let target = q.clone();
    let batch: Vec<Transition> = (0..64)
        .map(|_| Transition {
            obs: Observation(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
            action: rng.gen_range(0..5),
            reward: rng.gen(),
            next_obs: Observation(std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
            done: false,
        })
        .collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    c.bench_function("td_loss_and_grad_batch_64", |b| b.iter(|| td_loss_and_grad(&q, &target, &refs, 0.95)));
}

fn clustering(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let events: Vec<Vec<u32>> = (0..200)
        .map(|_| {
            let mut e: Vec<u32> = (0..rng.gen_range(3..20)).map(|_| [0, 0, 0, 6, 7, 8][rng.gen_range(0..6)]).collect();
            e.push(999);
            e
        })
        .collect();
    c.bench_function("levenshtein_pair", |b| b.iter(|| levenshtein(black_box(&events[0]), black_box(&events[1]))));
    c.bench_function("distance_matrix_200", |b| b.iter(|| levenshtein_distances(&events)));
    let g = knn_graph(&levenshtein_distances(&events), 10).unwrap();
    c.bench_function("leiden_200", |b| b.iter(|| leiden_cluster(&g, 1.0, 0).unwrap()));
}

criterion_group!(benches, episode, td_update, clustering);
criterion_main!(benches);

//! Regenerates the labeled fixtures under `tests/fixtures/`:
//!
//! * `sth_pairs.json`: descriptive-vector pairs of simulated collisions,
//!   labeled similar when they share the adversary script and closing
//!   speed, distinct otherwise.
//! * `failure_modes.json`: event sequences of seven failure modes with
//!   timing jitter and occasional spurious events.
//!
//! ```text
//! cargo run --release -p dynasto-core --example gen_fixtures
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dynasto_core::analytics::{descriptive_vector, DescriptiveConfig, LabeledPair, COLLISION};
use dynasto_core::reward::EpisodeConfig;
use dynasto_core::search::replay_episode;
use dynasto_core::sim::{ConstantPolicy, MetaAction, ScenarioConfig};

#[derive(Clone, Copy, PartialEq)]
enum Script {
    Cruise,
    EarlyBrake,
    MergeLeft,
}

impl Script {
    const ALL: [Script; 3] = [Script::Cruise, Script::EarlyBrake, Script::MergeLeft];

    fn actions(self) -> Vec<MetaAction> {
        use MetaAction::*;
        match self {
            Script::Cruise => vec![Idle; 40],
            Script::EarlyBrake => [vec![Slower, Slower], vec![Idle; 38]].concat(),
            Script::MergeLeft => [vec![Idle, LaneLeft], vec![Idle; 38]].concat(),
        }
    }

    fn adv_lane(self) -> usize {
        match self {
            Script::MergeLeft => 1,
            _ => 0,
        }
    }
}

/// Ego idles at 29 m/s in lane 0; the adversary starts `gap` ahead at
/// `29 - dv`.
fn collision_vector(script: Script, gap: f64, dv: f64, seed: u64) -> Option<Vec<f64>> {
    let config = ScenarioConfig {
        s_ego: 29.0,
        s_adv: 29.0 - dv,
        ..ScenarioConfig::straight(250.0, 250.0 + gap, 0, script.adv_lane(), 29.0)
    };
    let ep = EpisodeConfig::default();
    let trace = replay_episode(&config, &script.actions(), &ConstantPolicy(MetaAction::Idle), &ep, seed).ok()?;
    descriptive_vector(&trace, &DescriptiveConfig::default()).ok()
}

fn pairs(rng: &mut ChaCha8Rng, count: usize) -> Vec<LabeledPair> {
    let mut out = Vec::new();
    while out.len() < count {
        let s1 = Script::ALL[rng.gen_range(0..3)];
        let dv1 = rng.gen_range(5.0..9.0);
        let similar = out.len() % 2 == 0;
        let (s2, dv2) = if similar {
            (s1, dv1 + rng.gen_range(-0.8..0.8))
        } else if rng.gen_bool(0.5) {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (s1, dv1 + sign * rng.gen_range(2.5..4.0))
        } else {
            let other = loop {
                let s = Script::ALL[rng.gen_range(0..3)];
                if s != s1 {
                    break s;
                }
            };
            (other, dv1 + rng.gen_range(-0.5..0.5))
        };
        let a = collision_vector(s1, rng.gen_range(30.0..60.0), dv1, out.len() as u64);
        let b = collision_vector(s2, rng.gen_range(30.0..60.0), dv2, out.len() as u64 + 1000);
        if let (Some(a), Some(b)) = (a, b) {
            out.push(LabeledPair { a, b, similar });
        }
    }
    out
}

#[derive(Serialize)]
struct LabeledEvents {
    label: usize,
    events: Vec<u32>,
}

/// Seven failure modes as event templates: a quiet prefix, the mode's
/// core events and the collision.
fn mode_events(label: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let run = |code: u32, rng: &mut ChaCha8Rng, lo: usize, hi: usize| vec![code; rng.gen_range(lo..=hi)];
    let zeros = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| vec![0u32; rng.gen_range(lo..=hi)];
    let mut e = zeros(rng, 2, 5);
    match label {
        // adversary cut-in, then braking in the ego lane
        0 => {
            e.push(6);
            e.extend(zeros(rng, 1, 2));
            e.extend(run(7, rng, 2, 4));
        }
        // sustained braking ahead in the ego lane
        1 => e.extend(run(7, rng, 5, 8)),
        // adversary merges alongside the ego
        2 => {
            e.extend(zeros(rng, 1, 3));
            e.push(4);
        }
        // ego cuts in behind a vehicle braking in the other lane
        3 => {
            e.extend(run(8, rng, 2, 4));
            e.push(2);
            e.extend(zeros(rng, 0, 1));
        }
        // ego swerves into the adversary alongside
        4 => {
            e.extend(zeros(rng, 3, 5));
            e.push(1);
        }
        // ego cuts out and the adversary leaves, ego rear-ends later
        5 => {
            e.push(3);
            e.extend(zeros(rng, 1, 2));
            e.push(5);
            e.extend(zeros(rng, 1, 3));
        }
        // no interaction before a late rear-end collision
        _ => e.extend(zeros(rng, 8, 14)),
    }
    if rng.gen_bool(0.1) {
        let i = rng.gen_range(0..e.len());
        e[i] = [0, 7, 8][rng.gen_range(0..3)];
    }
    e.push(COLLISION);
    e
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    let p = pairs(&mut rng, 100);
    std::fs::write(dir.join("sth_pairs.json"), serde_json::to_vec(&p)?)?;

    let modes: Vec<LabeledEvents> = (0..7 * 30)
        .map(|i| LabeledEvents {
            label: i % 7,
            events: mode_events(i % 7, &mut rng),
        })
        .collect();
    std::fs::write(dir.join("failure_modes.json"), serde_json::to_vec(&modes)?)?;
    println!("wrote {} pairs and {} labeled event vectors", p.len(), modes.len());
    Ok(())
}

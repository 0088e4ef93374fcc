//! Training the ego driving policy that later serves as system under test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dqn::{DqnAgent, DqnConfig};
use super::network::QNetwork;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::sim::{Policy, RoadConfig, SimParams, TrafficConfig, TrafficSim, VehicleState, MetaAction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SutRewardWeights {
    pub w_speed: f64,
    pub w_right_lane: f64,
    pub w_collision: f64,
    /// Speeds mapped linearly onto `[0, 1]` and clipped.
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for SutRewardWeights {
    fn default() -> Self {
        Self {
            w_speed: 0.4,
            w_right_lane: 0.1,
            w_collision: 1.0,
            v_min: 20.0,
            v_max: 30.0,
        }
    }
}

pub fn sut_step_reward(ego: &VehicleState, collided: bool, road: &RoadConfig, w: &SutRewardWeights) -> f64 {
    let speed = ((ego.vx - w.v_min) / (w.v_max - w.v_min)).clamp(0.0, 1.0);
    let right = if ego.lane_index == road.rightmost_lane() { 1.0 } else { 0.0 };
    let crash = if collided { 1.0 } else { 0.0 };
    w.w_speed * speed + w.w_right_lane * right - w.w_collision * crash
}

/// Which background traffic the SUT is trained in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SutKind {
    /// One standard IDM vehicle.
    #[serde(rename = "SUT1")]
    Sut1,
    /// Four defensive IDM vehicles.
    #[serde(rename = "SUT2")]
    Sut2,
}

impl SutKind {
    pub fn traffic(self) -> TrafficConfig {
        match self {
            SutKind::Sut1 => TrafficConfig::standard(),
            SutKind::Sut2 => TrafficConfig::defensive(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SutKind::Sut1 => "SUT1",
            SutKind::Sut2 => "SUT2",
        }
    }
}

impl std::fmt::Display for SutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUT1" => Ok(SutKind::Sut1),
            "SUT2" => Ok(SutKind::Sut2),
            _ => Err(Error::config("sut", format!("unknown SUT `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SutConfig {
    pub dqn: DqnConfig,
    pub weights: SutRewardWeights,
    pub traffic: TrafficConfig,
    pub road: RoadConfig,
    pub sim: SimParams,
    pub t_max: usize,
}

impl Default for SutConfig {
    fn default() -> Self {
        Self::for_kind(SutKind::Sut1)
    }
}

impl SutConfig {
    pub fn for_kind(kind: SutKind) -> Self {
        Self {
            dqn: DqnConfig::default(),
            weights: SutRewardWeights::default(),
            traffic: kind.traffic(),
            road: RoadConfig::default(),
            sim: SimParams::default(),
            t_max: crate::sim::DEFAULT_T_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DrivingStats {
    pub episodes: usize,
    pub collisions: usize,
    pub mean_speed: f64,
}

/// Trains an ego policy for exactly `budget` environment steps.
pub fn train_sut(cfg: &SutConfig, budget: usize, seed: u64) -> Result<QNetwork> {
    cfg.road.validate()?;
    let mut agent = DqnAgent::new(cfg.dqn.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, u64::MAX));
    let mut episodes = 0;
    let mut crashes = 0;
    while agent.steps() < budget {
        let mut sim = TrafficSim::sample(&cfg.traffic, cfg.road, cfg.sim, &mut rng)?;
        episodes += 1;
        loop {
            let obs = sim.observation();
            let action = agent.act(&obs, budget);
            let step = sim.step(action)?;
            let reward = sut_step_reward(&step.ego, step.collided, &cfg.road, &cfg.weights);
            agent.observe(Transition {
                obs,
                action: action.index(),
                reward,
                next_obs: sim.observation(),
                done: step.collided,
            })?;
            crashes += usize::from(step.collided);
            if step.collided || sim.t() >= cfg.t_max || agent.steps() >= budget {
                break;
            }
        }
    }
    log::info!("SUT training: {} steps, {episodes} episodes, {crashes} collisions", agent.steps());
    Ok(agent.into_network())
}

/// Rolls `policy` out in background traffic and reports mean ego speed and
/// collision count.
pub fn evaluate_driving<P: Policy + Clone>(
    policy: &P,
    cfg: &SutConfig,
    episodes: usize,
    seed: u64,
) -> Result<DrivingStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut speed_sum = 0.0;
    let mut samples = 0usize;
    let mut collisions = 0;
    for _ in 0..episodes {
        let mut sim = TrafficSim::sample(&cfg.traffic, cfg.road, cfg.sim, &mut rng)?;
        let mut p = policy.clone();
        while !sim.is_terminated() && sim.t() < cfg.t_max {
            let action = MetaAction::from_index(p.act(&sim.observation()))?;
            let step = sim.step(action)?;
            speed_sum += step.ego.vx;
            samples += 1;
            collisions += usize::from(step.collided);
        }
    }
    Ok(DrivingStats {
        episodes,
        collisions,
        mean_speed: if samples > 0 { speed_sum / samples as f64 } else { 0.0 },
    })
}

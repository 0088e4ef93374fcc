//! Step 1: training the adversary against a fixed system under test and
//! archiving every valid failure it provokes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dqn::{DqnAgent, DqnConfig};
use super::network::QNetwork;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::reward::{reward_breakdown, step_shaping, EpisodeConfig, RewardMode};
use crate::sim::{MetaAction, Policy, ScenarioConfig, Simulator, Trace};
use crate::validity::{classify_failure, Classification, Label};

/// A valid failure together with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub adversary_actions: Vec<MetaAction>,
    pub trace: Trace,
    pub classification: Classification,
}

impl FailureRecord {
    pub fn from_trace(trace: Trace, classification: Classification) -> Self {
        Self {
            config: trace.config,
            seed: trace.seed,
            adversary_actions: trace.adversary_actions(),
            trace,
            classification,
        }
    }
}

/// Ordered list of valid failures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureArchive {
    records: Vec<FailureRecord>,
}

impl FailureArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: FailureRecord) -> Result<()> {
        if !record.classification.is_valid() {
            return Err(Error::Contract("only valid failures can be archived".into()));
        }
        if record.adversary_actions.len() != record.trace.num_steps() {
            return Err(Error::Contract(format!(
                "{} actions for a {}-step trace",
                record.adversary_actions.len(),
                record.trace.num_steps()
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&FailureRecord> {
        self.records.get(i)
    }

    pub fn records(&self) -> &[FailureRecord] {
        &self.records
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let archive: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        for r in &archive.records {
            if !r.classification.is_valid() || r.adversary_actions.len() != r.trace.num_steps() {
                return Err(Error::Contract(format!(
                    "archive entry with seed {} is malformed",
                    r.seed
                )));
            }
        }
        Ok(archive)
    }
}

impl FromIterator<FailureRecord> for FailureArchive {
    fn from_iter<I: IntoIterator<Item = FailureRecord>>(iter: I) -> Self {
        Self {
            records: iter.into_iter().collect(),
        }
    }
}

/// Supplies the initial condition of each training episode and receives the
/// episode's outcome.
pub trait ScenarioSource {
    fn propose(&mut self) -> Result<ScenarioConfig>;

    /// Called once per finished episode with the validity-aware reward.
    fn report(&mut self, _trace: &Trace, _reward: f64) -> Result<()> {
        Ok(())
    }
}

/// Step-1 initial conditions: both vehicles at a common speed with zero
/// heading, random lanes and the adversary ahead of the ego.
#[derive(Debug, Clone)]
pub struct StepOneSampler {
    pub x_ego: (f64, f64),
    pub x_adv: (f64, f64),
    pub speed: f64,
    pub lane_count: usize,
    rng: ChaCha8Rng,
}

impl StepOneSampler {
    pub fn new(lane_count: usize, seed: u64) -> Self {
        Self {
            x_ego: (247.0, 263.0),
            x_adv: (295.0, 327.0),
            speed: 25.0,
            lane_count,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ScenarioSource for StepOneSampler {
    fn propose(&mut self) -> Result<ScenarioConfig> {
        let l_ego = self.rng.gen_range(0..self.lane_count);
        let l_adv = self.rng.gen_range(0..self.lane_count);
        Ok(ScenarioConfig {
            x_ego: self.rng.gen_range(self.x_ego.0..=self.x_ego.1),
            x_adv: self.rng.gen_range(self.x_adv.0..=self.x_adv.1),
            l_ego,
            l_adv,
            tl_ego: l_ego,
            tl_adv: l_adv,
            h_ego: 0.0,
            h_adv: 0.0,
            s_ego: self.speed,
            s_adv: self.speed,
        })
    }
}

/// Everything an adversary-training session needs besides the SUT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdversaryConfig {
    pub dqn: DqnConfig,
    pub mode: RewardMode,
    pub episode: EpisodeConfig,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        Self {
            dqn: DqnConfig::default(),
            mode: RewardMode::ValidityAware,
            episode: EpisodeConfig::default(),
        }
    }
}

impl AdversaryConfig {
    pub fn validate(&self) -> Result<()> {
        self.dqn.validate()?;
        self.episode.validate()
    }
}

/// Outcome of one training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// Environment steps consumed before the episode started.
    pub start_step: usize,
    pub steps: usize,
    pub collided: bool,
    pub label: Label,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct AdversaryOutcome {
    pub network: QNetwork,
    pub archive: FailureArchive,
    pub episodes: Vec<EpisodeSummary>,
    /// Every collision trace, valid or not, in discovery order.
    pub collisions: Vec<(Trace, Classification)>,
    pub steps: usize,
}

/// Trains an adversary for exactly `budget` environment steps against
/// `sut`; the last episode is truncated when the budget runs out.
pub fn train_adversary<S, C>(
    sut: &S,
    source: &mut C,
    cfg: &AdversaryConfig,
    budget: usize,
    seed: u64,
) -> Result<AdversaryOutcome>
where
    S: Policy + Clone,
    C: ScenarioSource + ?Sized,
{
    cfg.validate()?;
    let ep = &cfg.episode;
    let mut agent = DqnAgent::new(cfg.dqn.clone(), seed)?;
    let mut archive = FailureArchive::new();
    let mut episodes = Vec::new();
    let mut collisions = Vec::new();
    let mut episode = 0u64;
    while agent.steps() < budget {
        let start_step = agent.steps();
        let config = source.propose()?;
        let ep_seed = crate::derive_seed(seed, episode);
        episode += 1;
        let mut sim = Simulator::reset_with(&config, ep.road, ep.sim, ep_seed)?;
        let mut ego = sut.clone();
        loop {
            let obs = sim.observation();
            let ego_action = MetaAction::from_index(ego.act(&obs))?;
            let adv_action = agent.act(&obs, budget);
            let record = sim.step(ego_action, adv_action)?;
            let mut reward = step_shaping(&record, &ep.safe);
            let done = sim.is_terminated();
            if done {
                reward += reward_breakdown(sim.trace(), &ep.safe, &ep.reward, cfg.mode).terminal;
            }
            agent.observe(Transition {
                obs,
                action: adv_action.index(),
                reward,
                next_obs: sim.observation(),
                done,
            })?;
            if done || sim.t() >= ep.t_max() || agent.steps() >= budget {
                break;
            }
        }
        let trace = sim.into_trace();
        let cls = classify_failure(&trace, &ep.safe);
        let validity_reward = reward_breakdown(&trace, &ep.safe, &ep.reward, RewardMode::ValidityAware).total;
        source.report(&trace, validity_reward)?;
        episodes.push(EpisodeSummary {
            start_step,
            steps: trace.num_steps(),
            collided: trace.collided,
            label: cls.label,
            reward: validity_reward,
        });
        if trace.collided {
            if cls.is_valid() {
                archive.push(FailureRecord::from_trace(trace.clone(), cls))?;
            }
            collisions.push((trace, cls));
        }
    }
    log::info!(
        "adversary training: {} steps, {} episodes, {} valid failures",
        agent.steps(),
        episodes.len(),
        archive.len()
    );
    Ok(AdversaryOutcome {
        steps: agent.steps(),
        network: agent.into_network(),
        archive,
        episodes,
        collisions,
    })
}

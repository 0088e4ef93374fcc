//! Reference test generators: random adversary, open-loop action search,
//! validity-agnostic learning and co-evolution of learning with search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{reward_breakdown, EpisodeConfig, RewardMode};
use crate::rl::{
    train_adversary, AdversaryConfig, AdversaryOutcome, FailureRecord, ScenarioSource, StepOneSampler,
};
use crate::search::{
    replay_episode, run_budgeted, AskTell, GaConfig, GeneticAlgorithm, Genotype, ParamBounds, ParamRange,
    RandomSearch,
};
use crate::sim::{MetaAction, Observation, Policy, ScenarioConfig, Simulator, Trace};
use crate::validity::{classify_failure, SafeDistanceParams};

/// A valid failure stamped with the budget position at which it was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredFailure {
    /// Budget units (environment steps or evaluations) consumed when the
    /// failure was observed.
    pub at: usize,
    pub record: FailureRecord,
}

/// Everything a generator found within its budget.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureLog {
    pub consumed: usize,
    pub collisions: usize,
    pub failures: Vec<DiscoveredFailure>,
}

impl FailureLog {
    pub fn from_adversary(out: &AdversaryOutcome) -> Self {
        let failures = out
            .episodes
            .iter()
            .filter(|e| e.label == crate::validity::Label::Valid)
            .map(|e| e.start_step + e.steps)
            .zip(out.archive.records())
            .map(|(at, r)| DiscoveredFailure { at, record: r.clone() })
            .collect();
        Self {
            consumed: out.steps,
            collisions: out.collisions.len(),
            failures,
        }
    }
}

/// Adversary that ignores its observations and draws uniform actions.
#[derive(Debug, Clone)]
pub struct RandomAdversary {
    rng: ChaCha8Rng,
}

impl Policy for RandomAdversary {
    fn act(&mut self, _obs: &Observation) -> usize {
        self.rng.gen_range(0..MetaAction::COUNT)
    }
}

pub fn random_adversary(seed: u64) -> RandomAdversary {
    RandomAdversary {
        rng: ChaCha8Rng::seed_from_u64(seed),
    }
}

/// Validity-agnostic reward: shaping plus the full bonus for any collision.
pub fn base_reward(trace: &Trace, p: &SafeDistanceParams, ep: &EpisodeConfig) -> f64 {
    reward_breakdown(trace, p, &ep.reward, RewardMode::AnyCollision).total
}

/// Random adversary on Step-1 initial conditions for exactly `budget`
/// environment steps.
pub fn random_testing<S: Policy + Clone>(sut: &S, ep: &EpisodeConfig, budget: usize, seed: u64) -> Result<FailureLog> {
    ep.validate()?;
    let mut source = StepOneSampler::new(ep.road.lane_count, crate::derive_seed(seed, 1));
    let mut adv = random_adversary(crate::derive_seed(seed, 2));
    let mut log = FailureLog::default();
    let mut episode = 0;
    while log.consumed < budget {
        let config = source.propose()?;
        let mut sim = Simulator::reset_with(&config, ep.road, ep.sim, crate::derive_seed(seed, 3 + episode))?;
        episode += 1;
        let mut ego = sut.clone();
        while !sim.is_terminated() && sim.t() < ep.t_max() && log.consumed < budget {
            let obs = sim.observation();
            let e = MetaAction::from_index(ego.act(&obs))?;
            let a = MetaAction::from_index(adv.act(&obs))?;
            sim.step(e, a)?;
            log.consumed += 1;
        }
        let at = log.consumed;
        record_outcome(&mut log, sim.into_trace(), at, &ep.safe);
    }
    Ok(log)
}

fn record_outcome(log: &mut FailureLog, trace: Trace, at: usize, p: &SafeDistanceParams) {
    if !trace.collided {
        return;
    }
    log.collisions += 1;
    let cls = classify_failure(&trace, p);
    if cls.is_valid() {
        log.failures.push(DiscoveredFailure {
            at,
            record: FailureRecord::from_trace(trace, cls),
        });
    }
}

/// Equal-width binning of a unit component onto the five meta-actions.
pub fn decode_action(v: f64) -> MetaAction {
    let bin = ((v * MetaAction::COUNT as f64).floor() as usize).min(MetaAction::COUNT - 1);
    MetaAction::ALL[bin]
}

pub fn decode_actions(x: &[f64]) -> Vec<MetaAction> {
    x.iter().map(|&v| decode_action(v)).collect()
}

/// Genetic search over open-loop action sequences of length `t_max` from one
/// fixed Step-1 initial condition; `budget` counts episodes.
pub fn ga_action_search<S: Policy + Clone + Sync>(
    sut: &S,
    ga: &GaConfig,
    ep: &EpisodeConfig,
    budget: usize,
    seed: u64,
) -> Result<(ScenarioConfig, FailureLog)> {
    ep.validate()?;
    let config = StepOneSampler::new(ep.road.lane_count, crate::derive_seed(seed, 1)).propose()?;
    let genes = vec![ParamRange::continuous(0.0, 1.0); ep.t_max()];
    let mut opt = GeneticAlgorithm::new(ga.clone(), genes, seed)?;
    let evaluated = run_budgeted(&mut opt, budget, |i, x| {
        let trace = replay_episode(&config, &decode_actions(x), sut, ep, crate::derive_seed(seed, 10 + i as u64))?;
        let fitness = -crate::reward::episode_reward(&trace, &ep.safe, &ep.reward);
        Ok((fitness, trace))
    })?;
    let mut log = FailureLog {
        consumed: evaluated.len(),
        ..FailureLog::default()
    };
    for e in evaluated {
        record_outcome(&mut log, e.value, e.index + 1, &ep.safe);
    }
    Ok((config, log))
}

/// Validity-aware or validity-agnostic adversary learning on Step-1
/// initial conditions.
pub fn rl_adversary<S: Policy + Clone>(
    sut: &S,
    cfg: &AdversaryConfig,
    budget: usize,
    seed: u64,
) -> Result<AdversaryOutcome> {
    let mut source = StepOneSampler::new(cfg.episode.road.lane_count, crate::derive_seed(seed, 1));
    train_adversary(sut, &mut source, cfg, budget, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoevolutionMode {
    Ga,
    Rs,
}

/// Feeds each training episode a configuration from an ask/tell optimizer
/// and returns the episode's negated reward once a batch is complete.
pub struct SearchSource<O> {
    opt: O,
    bounds: ParamBounds,
    batch: Vec<Genotype>,
    fitness: Vec<f64>,
    cursor: usize,
    tells: usize,
}

impl<O: AskTell> SearchSource<O> {
    pub fn new(opt: O, bounds: ParamBounds) -> Self {
        Self {
            opt,
            bounds: bounds.without_failure_ids(),
            batch: Vec::new(),
            fitness: Vec::new(),
            cursor: 0,
            tells: 0,
        }
    }

    /// Completed generations.
    pub fn tells(&self) -> usize {
        self.tells
    }

    pub fn optimizer(&self) -> &O {
        &self.opt
    }
}

impl<O: AskTell> ScenarioSource for SearchSource<O> {
    fn propose(&mut self) -> Result<ScenarioConfig> {
        if self.cursor == self.batch.len() {
            if self.fitness.len() != self.batch.len() {
                return Err(Error::Protocol("new proposal before the last one was reported".into()));
            }
            self.batch = self.opt.ask()?;
            self.fitness.clear();
            self.cursor = 0;
        }
        let (config, _) = self.bounds.decode(&self.batch[self.cursor])?;
        self.cursor += 1;
        Ok(config)
    }

    fn report(&mut self, _trace: &Trace, reward: f64) -> Result<()> {
        if self.fitness.len() >= self.cursor {
            return Err(Error::Protocol("report without a pending proposal".into()));
        }
        self.fitness.push(-reward);
        if self.fitness.len() == self.batch.len() {
            self.opt.tell(&self.batch, &self.fitness)?;
            self.tells += 1;
        }
        Ok(())
    }
}

/// Adversary learning whose episode initial conditions come from a search
/// over the ten scenario parameters, one episode per proposal.
pub fn coevolve<S: Policy + Clone>(
    sut: &S,
    mode: CoevolutionMode,
    cfg: &AdversaryConfig,
    bounds: &ParamBounds,
    ga: &GaConfig,
    budget: usize,
    seed: u64,
) -> Result<AdversaryOutcome> {
    let bounds = bounds.clone().without_failure_ids();
    let search_seed = crate::derive_seed(seed, 1);
    match mode {
        CoevolutionMode::Ga => {
            let opt = GeneticAlgorithm::new(ga.clone(), bounds.genes(), search_seed)?;
            train_adversary(sut, &mut SearchSource::new(opt, bounds), cfg, budget, seed)
        }
        CoevolutionMode::Rs => {
            let opt = RandomSearch::new(bounds.genes(), ga.pop_size, search_seed)?;
            train_adversary(sut, &mut SearchSource::new(opt, bounds), cfg, budget, seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::DqnConfig;
    use crate::sim::ConstantPolicy;
    use crate::validity::{Classification, Label, Rule};

    #[test]
    fn action_binning() {
        assert_eq!(decode_action(0.05), MetaAction::LaneLeft);
        assert_eq!(decode_action(0.99), MetaAction::Slower);
        assert_eq!(decode_action(1.0), MetaAction::Slower);
        assert_eq!(decode_action(0.0), MetaAction::LaneLeft);
        assert_eq!(decode_action(0.5), MetaAction::LaneRight);
        assert_eq!(decode_action(0.6), MetaAction::Faster);
    }

    #[test]
    fn random_adversary_is_uniform_and_blind() {
        let mut a = random_adversary(7);
        let mut b = random_adversary(7);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for i in 0..n {
            let x = a.act(&Observation([i as f64; 8]));
            assert_eq!(x, b.act(&Observation([0.0; 8])));
            counts[x] += 1;
        }
        let sigma = (n as f64 * 0.2 * 0.8).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - n as f64 / 5.0).abs() < 3.0 * sigma));
    }

    #[test]
    fn base_reward_only_differs_on_invalid_collisions() {
        let ep = EpisodeConfig::default();
        let sut = ConstantPolicy(MetaAction::Idle);
        // Adversary brakes hard right in front of the ego: an unsafe brake.
        let invalid = replay_episode(
            &ScenarioConfig::straight(250.0, 262.0, 0, 0, 25.0),
            &[MetaAction::Slower; 10],
            &sut,
            &ep,
            0,
        )
        .unwrap();
        let cls = classify_failure(&invalid, &ep.safe);
        assert_eq!(cls.label, Label::Invalid);
        assert_eq!(cls.violated_rule, Some(Rule::UnsafeBrake));
        let shaping = reward_breakdown(&invalid, &ep.safe, &ep.reward, RewardMode::AnyCollision).shaping_sum;
        assert!((base_reward(&invalid, &ep.safe, &ep) - (shaping + 30.0)).abs() < 1e-12);
        assert!(base_reward(&invalid, &ep.safe, &ep) > crate::reward::episode_reward(&invalid, &ep.safe, &ep.reward));

        let quiet = replay_episode(&ScenarioConfig::straight(250.0, 400.0, 0, 1, 25.0), &[], &sut, &ep, 0).unwrap();
        assert_eq!(
            base_reward(&quiet, &ep.safe, &ep),
            crate::reward::episode_reward(&quiet, &ep.safe, &ep.reward)
        );
        let _ = Classification::VALID;
    }

    fn small_adv() -> AdversaryConfig {
        AdversaryConfig {
            dqn: DqnConfig {
                hidden: vec![8],
                warmup: 20,
                batch_size: 8,
                ..DqnConfig::default()
            },
            ..AdversaryConfig::default()
        }
    }

    #[test]
    fn random_testing_consumes_its_budget() {
        let ep = EpisodeConfig::default();
        let log = random_testing(&ConstantPolicy(MetaAction::Idle), &ep, 333, 4).unwrap();
        assert_eq!(log.consumed, 333);
        assert!(log.failures.iter().all(|f| f.at <= 333 && f.record.classification.is_valid()));
        assert_eq!(log, random_testing(&ConstantPolicy(MetaAction::Idle), &ep, 333, 4).unwrap());
    }

    #[test]
    fn ga_actions_consume_evaluations() {
        let ep = EpisodeConfig::default();
        let (_, log) = ga_action_search(&ConstantPolicy(MetaAction::Idle), &GaConfig::default(), &ep, 150, 1).unwrap();
        assert_eq!(log.consumed, 150);
    }

    #[test]
    fn coevolution_tells_after_full_batches() {
        let sut = ConstantPolicy(MetaAction::Idle);
        let cfg = small_adv();
        let bounds = ParamBounds::default();
        let ga = GaConfig::default();
        let out = coevolve(&sut, CoevolutionMode::Ga, &cfg, &bounds, &ga, 4000, 3).unwrap();
        assert_eq!(out.steps, 4000);
        assert!(out.episodes.len() >= 100);

        let opt = GeneticAlgorithm::new(ga.clone(), bounds.clone().without_failure_ids().genes(), 0).unwrap();
        let mut src = SearchSource::new(opt, bounds.clone());
        for i in 0..100 {
            src.propose().unwrap();
            let dummy = Simulator::reset(&ScenarioConfig::straight(250.0, 300.0, 0, 1, 25.0), Default::default(), 0)
                .unwrap()
                .into_trace();
            src.report(&dummy, i as f64).unwrap();
            assert_eq!(src.tells(), usize::from(i == 99));
        }
    }

    #[test]
    fn random_coevolution_samples_the_table() {
        let bounds = ParamBounds::default();
        let opt = RandomSearch::new(bounds.genes(), 100, 9).unwrap();
        let mut src = SearchSource::new(opt, bounds);
        let dummy = Simulator::reset(&ScenarioConfig::straight(250.0, 300.0, 0, 1, 25.0), Default::default(), 0)
            .unwrap()
            .into_trace();
        let mut xs = Vec::new();
        for _ in 0..1000 {
            let c = src.propose().unwrap();
            src.report(&dummy, 0.0).unwrap();
            assert!((247.0..=304.0).contains(&c.x_ego) && (364.0..=395.0).contains(&c.x_adv));
            assert!((20.0..=29.0).contains(&c.s_ego) && c.h_adv.abs() <= 0.08);
            xs.push(c.x_ego);
        }
        let mean = xs.iter().sum::<f64>() / 1000.0;
        // uniform on [247, 304]: mean 275.5, sd of the mean about 0.52
        assert!((mean - 275.5).abs() < 2.0, "{mean}");
    }
}

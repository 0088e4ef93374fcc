//! Step 2: evaluating initial conditions by replaying archived adversary
//! behaviour against the live system under test.

use serde::{Deserialize, Serialize};

use super::bounds::{Genotype, ParamBounds};
use super::ga::{run_budgeted, AskTell, GaConfig, GeneticAlgorithm, RandomSearch};
use crate::error::{Error, Result};
use crate::reward::{episode_reward, EpisodeConfig};
use crate::rl::{FailureArchive, FailureRecord, GreedyPolicy, QNetwork};
use crate::sim::{run_episode, MetaAction, Policy, ReplayPolicy, ScenarioConfig, Simulator, Trace};
use crate::validity::{classify_failure, Classification, Label};

/// How the adversary behaves once the initial condition is fixed.
#[derive(Debug, Clone, Copy)]
pub enum Behaviour<'a> {
    /// Open-loop replay of the archived failure selected by the genotype.
    Replay(&'a FailureArchive),
    /// Closed-loop greedy play of a trained adversary network.
    Policy(&'a QNetwork),
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fitness: f64,
    pub trace: Trace,
    pub classification: Classification,
    pub failure_id: Option<usize>,
}

/// Runs one episode from `config` with the SUT online and the given
/// adversary actions padded with IDLE.
pub fn replay_episode<S: Policy + Clone>(
    config: &ScenarioConfig,
    actions: &[MetaAction],
    sut: &S,
    ep: &EpisodeConfig,
    seed: u64,
) -> Result<Trace> {
    let sim = Simulator::reset_with(config, ep.road, ep.sim, seed)?;
    let mut ego = sut.clone();
    let mut adv = ReplayPolicy::new(actions.to_vec());
    run_episode(sim, &mut ego, &mut adv, ep.t_max())
}

fn evaluate_with<S: Policy + Clone>(
    x: &[f64],
    behaviour: Behaviour<'_>,
    sut: &S,
    bounds: &ParamBounds,
    ep: &EpisodeConfig,
    seed: u64,
) -> Result<Evaluation> {
    let (config, failure_id) = bounds.decode(x)?;
    let trace = match behaviour {
        Behaviour::Replay(archive) => {
            let id = failure_id.ok_or_else(|| Error::Contract("genotype lacks a failure_id gene".into()))?;
            let record = archive
                .get(id)
                .ok_or_else(|| Error::Contract(format!("failure_id {id} outside an archive of {}", archive.len())))?;
            replay_episode(&config, &record.adversary_actions, sut, ep, seed)?
        }
        Behaviour::Policy(net) => {
            let sim = Simulator::reset_with(&config, ep.road, ep.sim, seed)?;
            let mut ego = sut.clone();
            run_episode(sim, &mut ego, &mut GreedyPolicy(net), ep.t_max())?
        }
    };
    let classification = classify_failure(&trace, &ep.safe);
    Ok(Evaluation {
        fitness: -episode_reward(&trace, &ep.safe, &ep.reward),
        trace,
        classification,
        failure_id,
    })
}

/// Decodes `x`, replays the archived failure it selects from the decoded
/// initial condition and scores the resulting trace.
pub fn evaluate_candidate<S: Policy + Clone>(
    x: &[f64],
    archive: &FailureArchive,
    sut: &S,
    bounds: &ParamBounds,
    ep: &EpisodeConfig,
    seed: u64,
) -> Result<Evaluation> {
    if archive.is_empty() {
        return Err(Error::config("archive", "the failure archive is empty"));
    }
    if bounds.archive_size() != Some(archive.len()) {
        return Err(Error::Contract(format!(
            "bounds index {:?} failures, archive holds {}",
            bounds.archive_size(),
            archive.len()
        )));
    }
    evaluate_with(x, Behaviour::Replay(archive), sut, bounds, ep, seed)
}

/// Per-candidate record kept for every evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub index: usize,
    pub genotype: Genotype,
    pub fitness: f64,
    pub label: Label,
    pub failure_id: Option<usize>,
    /// Policy steps simulated.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundFailure {
    /// Evaluation index at which the failure was found.
    pub index: usize,
    pub genotype: Genotype,
    pub record: FailureRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub candidates: Vec<CandidateSummary>,
    pub failures: Vec<FoundFailure>,
}

impl SearchOutcome {
    pub fn evaluations(&self) -> usize {
        self.candidates.len()
    }
}

/// Spends exactly `budget` evaluations of `opt` on initial conditions.
pub fn search_initial_conditions<S, O>(
    opt: &mut O,
    behaviour: Behaviour<'_>,
    sut: &S,
    bounds: &ParamBounds,
    ep: &EpisodeConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome>
where
    S: Policy + Clone + Sync,
    O: AskTell + ?Sized,
{
    if budget == 0 {
        return Ok(SearchOutcome::default());
    }
    ep.validate()?;
    if let Behaviour::Replay(archive) = behaviour {
        if archive.is_empty() {
            return Err(Error::config("archive", "the failure archive is empty"));
        }
    }
    let evaluated = run_budgeted(opt, budget, |i, x| {
        let e = evaluate_with(x, behaviour, sut, bounds, ep, crate::derive_seed(seed, i as u64))?;
        Ok((e.fitness, e))
    })?;
    let mut out = SearchOutcome::default();
    for e in evaluated {
        out.candidates.push(CandidateSummary {
            index: e.index,
            genotype: e.x.clone(),
            fitness: e.fitness,
            label: e.value.classification.label,
            failure_id: e.value.failure_id,
            steps: e.value.trace.num_steps(),
        });
        if e.value.classification.is_valid() {
            out.failures.push(FoundFailure {
                index: e.index,
                genotype: e.x,
                record: FailureRecord::from_trace(e.value.trace, e.value.classification),
            });
        }
    }
    Ok(out)
}

/// Genetic search over initial conditions paired with archived failures.
pub fn run_search<S: Policy + Clone + Sync>(
    archive: &FailureArchive,
    sut: &S,
    bounds: &ParamBounds,
    ga: &GaConfig,
    ep: &EpisodeConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Ok(SearchOutcome::default());
    }
    let bounds = bounds.clone().with_failure_ids(archive.len())?;
    let mut opt = GeneticAlgorithm::new(ga.clone(), bounds.genes(), seed)?;
    search_initial_conditions(&mut opt, Behaviour::Replay(archive), sut, &bounds, ep, budget, seed)
}

/// Uniform random search over the same space as [`run_search`].
pub fn run_random_search<S: Policy + Clone + Sync>(
    archive: &FailureArchive,
    sut: &S,
    bounds: &ParamBounds,
    batch_size: usize,
    ep: &EpisodeConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Ok(SearchOutcome::default());
    }
    let bounds = bounds.clone().with_failure_ids(archive.len())?;
    let mut opt = RandomSearch::new(bounds.genes(), batch_size, seed)?;
    search_initial_conditions(&mut opt, Behaviour::Replay(archive), sut, &bounds, ep, budget, seed)
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, Step2Unit};
use crate::analytics::{cluster_failures, dedup_indices, descriptive_vector, ClusterReport, DescriptiveConfig};
use crate::baselines::{
    coevolve, ga_action_search, random_testing, rl_adversary, CoevolutionMode, DiscoveredFailure, FailureLog,
};
use crate::error::{Error, Result};
use crate::reward::RewardMode;
use crate::rl::{train_sut, AdversaryConfig, Checkpoint, FailureArchive, FailureRecord, GreedyPolicy, QNetwork};
use crate::search::{
    run_random_search, run_search, search_initial_conditions, AskTell, Behaviour, GeneticAlgorithm, RandomSearch,
    SearchOutcome,
};
use crate::sim::Trace;
use crate::validity::Label;

/// Per-seed outcome of one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    /// Budget units actually spent.
    pub consumed: usize,
    pub all_collisions: usize,
    pub valid: usize,
    pub unique: usize,
    pub clusters: usize,
    /// `curve[i]`: unique valid failures found within the first `i + 1`
    /// budget units.
    pub curve: Vec<usize>,
    pub wall_seconds: f64,
}

/// Equality ignores wall-clock time.
impl PartialEq for RunResult {
    fn eq(&self, o: &Self) -> bool {
        (self.method, self.seed, self.budget, self.consumed) == (o.method, o.seed, o.budget, o.consumed)
            && (self.all_collisions, self.valid, self.unique, self.clusters)
                == (o.all_collisions, o.valid, o.unique, o.clusters)
            && self.curve == o.curve
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub result: RunResult,
    pub log: FailureLog,
    /// Indices into `log.failures` of the de-duplicated failures.
    pub unique: Vec<usize>,
    pub clusters: ClusterReport,
    /// Step-1 archive of the two-step methods.
    pub archive: Option<FailureArchive>,
}

impl RunArtifacts {
    pub fn unique_failures(&self) -> impl Iterator<Item = &DiscoveredFailure> {
        self.unique.iter().map(|&i| &self.log.failures[i])
    }
}

/// Descriptive vectors of `traces` followed by greedy de-duplication.
pub fn unique_indices(traces: &[&Trace], cfg: &DescriptiveConfig) -> Result<Vec<usize>> {
    let vectors = traces
        .iter()
        .map(|t| descriptive_vector(t, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(dedup_indices(&vectors, cfg.s_th))
}

fn step2_log(out: SearchOutcome, unit: Step2Unit, budget: usize, offset: usize) -> (FailureLog, usize) {
    let mut position = Vec::with_capacity(out.candidates.len());
    let mut used = 0;
    for c in &out.candidates {
        let cost = match unit {
            Step2Unit::Evaluations => 1,
            Step2Unit::EnvSteps => c.steps,
        };
        if used + cost > budget && unit == Step2Unit::EnvSteps && used > 0 {
            break;
        }
        used += cost;
        position.push(used);
    }
    let kept = position.len();
    let collisions = out.candidates[..kept].iter().filter(|c| c.label != Label::NoCollision).count();
    let failures = out
        .failures
        .into_iter()
        .filter(|f| f.index < kept)
        .map(|f| DiscoveredFailure {
            at: offset + position[f.index],
            record: f.record,
        })
        .collect();
    (
        FailureLog {
            consumed: used.min(budget),
            collisions,
            failures,
        },
        kept,
    )
}

fn two_step(
    cfg: &ExperimentConfig,
    sut: &QNetwork,
    seed: u64,
    mode: CoevolutionMode,
) -> Result<(FailureLog, FailureArchive)> {
    let policy = GreedyPolicy(sut);
    let ep = &cfg.adversary.episode;
    let step1 = rl_adversary(&policy, &cfg.adversary, cfg.step1_budget, seed)?;
    let mut log = FailureLog::from_adversary(&step1);
    let budget2 = cfg.step2_budget();
    let seed2 = crate::derive_seed(seed, 2);
    let bounds = cfg.bounds()?;
    let outcome = if step1.archive.is_empty() {
        log::warn!("seed {seed}: Step 1 archived no valid failure, Step 2 plays the trained adversary");
        let bounds = bounds.without_failure_ids();
        let mut opt: Box<dyn AskTell> = match mode {
            CoevolutionMode::Ga => Box::new(GeneticAlgorithm::new(cfg.ga.clone(), bounds.genes(), seed2)?),
            CoevolutionMode::Rs => Box::new(RandomSearch::new(bounds.genes(), cfg.ga.pop_size, seed2)?),
        };
        search_initial_conditions(
            opt.as_mut(),
            Behaviour::Policy(&step1.network),
            &policy,
            &bounds,
            ep,
            budget2,
            seed2,
        )?
    } else {
        match mode {
            CoevolutionMode::Ga => run_search(&step1.archive, &policy, &bounds, &cfg.ga, ep, budget2, seed2)?,
            CoevolutionMode::Rs => {
                run_random_search(&step1.archive, &policy, &bounds, cfg.ga.pop_size, ep, budget2, seed2)?
            }
        }
    };
    let (second, _) = step2_log(outcome, cfg.step2_unit, budget2, step1.steps);
    log.consumed += second.consumed;
    log.collisions += second.collisions;
    log.failures.extend(second.failures);
    Ok((log, step1.archive))
}

/// Runs one method for one seed under the configured budget, then
/// de-duplicates and clusters its valid failures.
pub fn run_method(cfg: &ExperimentConfig, method: Method, sut: &QNetwork, seed: u64) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();
    let policy = GreedyPolicy(sut);
    let ep = &cfg.adversary.episode;
    let varl = AdversaryConfig {
        mode: RewardMode::ValidityAware,
        ..cfg.adversary.clone()
    };
    let mut archive = None;
    let log = match method {
        Method::RandomTesting => random_testing(&policy, ep, cfg.budget, seed)?,
        Method::GaActions => ga_action_search(&policy, &cfg.ga, ep, cfg.budget, seed)?.1,
        Method::BaseDqn => {
            let base = AdversaryConfig {
                mode: RewardMode::AnyCollision,
                ..cfg.adversary.clone()
            };
            FailureLog::from_adversary(&rl_adversary(&policy, &base, cfg.budget, seed)?)
        }
        Method::Varl => FailureLog::from_adversary(&rl_adversary(&policy, &varl, cfg.budget, seed)?),
        Method::VarlGa | Method::VarlRs => {
            let mode = if method == Method::VarlGa {
                CoevolutionMode::Ga
            } else {
                CoevolutionMode::Rs
            };
            let out = coevolve(&policy, mode, &varl, &cfg.bounds()?, &cfg.ga, cfg.budget, seed)?;
            FailureLog::from_adversary(&out)
        }
        Method::DynastoGa | Method::DynastoRs => {
            let mode = if method == Method::DynastoGa {
                CoevolutionMode::Ga
            } else {
                CoevolutionMode::Rs
            };
            let sub = ExperimentConfig {
                adversary: varl.clone(),
                ..cfg.clone()
            };
            let (log, a) = two_step(&sub, sut, seed, mode)?;
            archive = Some(a);
            log
        }
    };
    finish(cfg, method, seed, log, archive, start)
}

fn finish(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    mut log: FailureLog,
    archive: Option<FailureArchive>,
    start: Instant,
) -> Result<RunArtifacts> {
    log.failures.sort_by_key(|f| f.at);
    let traces: Vec<&Trace> = log.failures.iter().map(|f| &f.record.trace).collect();
    let unique = unique_indices(&traces, &cfg.descriptive)?;
    let pool: Vec<Trace> = unique.iter().map(|&i| log.failures[i].record.trace.clone()).collect();
    let clusters = cluster_failures(
        &pool,
        &cfg.adversary.episode.safe,
        &cfg.cluster,
        crate::derive_seed(seed, 3),
    )?;
    let mut curve = vec![0usize; cfg.budget];
    for &i in &unique {
        let at = log.failures[i].at.max(1);
        if at <= cfg.budget {
            curve[at - 1] += 1;
        }
    }
    for i in 1..curve.len() {
        curve[i] += curve[i - 1];
    }
    let result = RunResult {
        method,
        seed,
        budget: cfg.budget,
        consumed: log.consumed,
        all_collisions: log.collisions,
        valid: log.failures.len(),
        unique: unique.len(),
        clusters: clusters.cluster_count(),
        curve,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunArtifacts {
        result,
        log,
        unique,
        clusters,
        archive,
    })
}

/// Loads the configured SUT checkpoint, or trains one when `train` is set.
pub fn resolve_sut(cfg: &ExperimentConfig, train: bool) -> Result<QNetwork> {
    match (&cfg.sut_checkpoint, train) {
        (Some(path), false) => Checkpoint::load(path)?.to_network(),
        (_, true) => train_sut(&cfg.sut_config(), cfg.sut_train_steps, cfg.sut_seed),
        (None, false) => Err(Error::config(
            "sut_checkpoint",
            "no SUT checkpoint configured; train one first",
        )),
    }
}

/// Writes through a temporary file so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value)?)
}

pub fn seed_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(method.name()).join(format!("seed_{seed}"))
}

/// Persists everything one run produced under `dir`.
pub fn persist_run(dir: &Path, run: &RunArtifacts) -> Result<()> {
    if let Some(a) = &run.archive {
        write_json(&dir.join("archive.json"), a)?;
    }
    let unique: Vec<&FailureRecord> = run.unique_failures().map(|f| &f.record).collect();
    write_json(&dir.join("failures.json"), &unique)?;
    write_json(&dir.join("clusters.json"), &run.clusters)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "cluster"]).map_err(csv_err)?;
    for (node, c) in run.clusters.assignment.iter().enumerate() {
        w.write_record([node.to_string(), c.to_string()]).map_err(csv_err)?;
    }
    write_atomic(&dir.join("assignments.csv"), &w.into_inner().map_err(|e| Error::Io(e.into_error()))?)?;
    write_json(&dir.join("result.json"), &run.result)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub method: Method,
    pub sut: crate::rl::SutKind,
    pub seeds: Vec<u64>,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash()?,
            method: cfg.method,
            sut: cfg.sut,
            seeds: cfg.seed_list(),
        })
    }
}

/// Runs the configured method for every seed in parallel and persists the
/// per-seed artifacts, the configuration and a manifest under `out_dir`.
pub fn run_pipeline(cfg: &ExperimentConfig, sut: &QNetwork) -> Result<Vec<RunArtifacts>> {
    cfg.validate()?;
    let runs = cfg
        .seed_list()
        .into_par_iter()
        .map(|seed| {
            let run = run_method(cfg, cfg.method, sut, seed)?;
            persist_run(&seed_dir(&cfg.out_dir, cfg.method, seed), &run)?;
            log::info!(
                "{} seed {seed}: {} valid, {} unique, {} clusters",
                cfg.method,
                run.result.valid,
                run.result.unique,
                run.result.clusters
            );
            Ok(run)
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&cfg.out_dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    write_json(&cfg.out_dir.join("manifest.json"), &Manifest::new(cfg)?)?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::DqnConfig;
    use crate::search::CandidateSummary;
    use rand::SeedableRng;

    fn candidate(index: usize, steps: usize, label: Label) -> CandidateSummary {
        CandidateSummary {
            index,
            genotype: vec![],
            fitness: 0.0,
            label,
            failure_id: None,
            steps,
        }
    }

    #[test]
    fn step2_units() {
        let out = SearchOutcome {
            candidates: vec![
                candidate(0, 10, Label::NoCollision),
                candidate(1, 5, Label::Invalid),
                candidate(2, 30, Label::Valid),
                candidate(3, 40, Label::NoCollision),
            ],
            failures: vec![],
        };
        let (log, kept) = step2_log(out.clone(), Step2Unit::Evaluations, 4, 100);
        assert_eq!((log.consumed, log.collisions, kept), (4, 2, 4));
        let (log, kept) = step2_log(out, Step2Unit::EnvSteps, 50, 100);
        assert_eq!((log.consumed, log.collisions, kept), (45, 2, 3));
    }

    #[test]
    fn missing_sut_is_a_configuration_error() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(resolve_sut(&cfg, false), Err(Error::Config { .. })));
    }

    #[test]
    fn every_method_spends_its_budget() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let sut = QNetwork::new(&[8, 8, 5], &mut rng).unwrap();
        let mut cfg = ExperimentConfig {
            budget: 200,
            step1_budget: 150,
            seeds: 1,
            ..ExperimentConfig::default()
        };
        cfg.adversary.dqn = DqnConfig {
            hidden: vec![8],
            warmup: 20,
            batch_size: 8,
            ..DqnConfig::default()
        };
        cfg.ga.pop_size = 10;
        for m in Method::ALL {
            let run = run_method(&cfg, m, &sut, 3).unwrap();
            let r = &run.result;
            assert_eq!(r.consumed, 200, "{m}");
            assert!(r.unique <= r.valid && r.valid <= r.all_collisions, "{m}");
            assert_eq!(r.curve.len(), 200);
            assert!(r.curve.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*r.curve.last().unwrap(), r.unique);
        }
    }
}

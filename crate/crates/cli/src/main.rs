use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use dynasto_core::analytics::{cluster_failures, dedup_indices, descriptive_vector};
use dynasto_core::harness::{
    collect_results, emit_report, pairwise_stats, persist_run, resolve_sut, run_method, run_pipeline, seed_dir,
    write_atomic, write_json, ExperimentConfig, Manifest, Method,
};
use dynasto_core::rl::{
    evaluate_driving, train_adversary, Checkpoint, FailureArchive, FailureRecord, GreedyPolicy, QNetwork,
    StepOneSampler, SutKind,
};
use dynasto_core::search::{run_random_search, run_search};
use dynasto_core::sim::{ObservationScales, Trace};
use dynasto_core::validity::classify_failure;

#[derive(Parser)]
#[command(name = "dynasto", version, about = "Adversarial scenario generation for highway driving policies")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SutArg {
    /// Trained SUT checkpoint; overrides the configuration.
    #[arg(long, visible_alias = "sut")]
    sut_checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ego policy and save it as a checkpoint.
    TrainSut {
        #[arg(long)]
        sut: Option<SutKind>,
        /// Environment steps; defaults to the configured value.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Step 1: train the validity-aware adversary and archive its failures.
    TrainAdversary {
        #[command(flatten)]
        sut: SutArg,
        /// Environment steps; defaults to the Step-1 budget.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Step 2: search initial conditions for archived failures.
    SearchInit {
        #[command(flatten)]
        sut: SutArg,
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        /// Population (or batch) size; overrides the configuration.
        #[arg(long)]
        pop: Option<usize>,
        /// `ga` or `rs`.
        #[arg(long, default_value = "ga")]
        optimizer: String,
    },
    /// Run one method for the base seed.
    RunMethod {
        #[command(flatten)]
        sut: SutArg,
        #[arg(long)]
        method: Option<Method>,
    },
    /// Run the configured methods over all seeds and write the report.
    RunPipeline {
        #[command(flatten)]
        sut: SutArg,
        /// Comma-separated methods; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        /// Train the SUT first instead of loading a checkpoint.
        #[arg(long)]
        train_sut: bool,
        /// Three seeds instead of the configured count.
        #[arg(long)]
        smoke: bool,
    },
    /// Label traces (JSON or JSON lines), failure records or an archive.
    Classify {
        input: PathBuf,
    },
    /// Remove near-duplicate failures from a list of failure records.
    Dedup {
        input: PathBuf,
    },
    /// Cluster a list of failure records into failure modes.
    Cluster {
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Pairwise statistics over every `result.json` under a directory.
    Stats {
        results: PathBuf,
    },
    /// Curves, summaries and statistics for a results directory.
    Report {
        results: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
        cfg.sut_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn load_sut(cfg: &mut ExperimentConfig, arg: &SutArg) -> Result<QNetwork> {
    if let Some(p) = &arg.sut_checkpoint {
        cfg.sut_checkpoint = Some(p.clone());
    }
    Ok(resolve_sut(cfg, false)?)
}

/// Accepts traces as JSON lines, an archive or a list of records.
fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    let text = std::fs::read_to_string(path)?;
    let values = serde_json::Deserializer::from_str(&text)
        .into_iter::<Value>()
        .collect::<serde_json::Result<Vec<_>>>()?;
    if values.first().is_some_and(|v| v.get("steps").is_some()) {
        return values.into_iter().map(|v| Ok(serde_json::from_value(v)?)).collect();
    }
    match <[Value; 1]>::try_from(values) {
        Ok([v]) => Ok(read_records_value(v)?.into_iter().map(|r| r.trace).collect()),
        Err(_) => bail!("expected traces, an archive or a list of failure records"),
    }
}

fn read_records_value(v: Value) -> Result<Vec<FailureRecord>> {
    if let Some(records) = v.get("records") {
        return Ok(serde_json::from_value(records.clone())?);
    }
    match &v {
        Value::Array(items) if items.first().is_some_and(|i| i.get("steps").is_some()) => {
            bail!("expected failure records, found bare traces")
        }
        Value::Array(_) => Ok(serde_json::from_value(v)?),
        _ => bail!("unrecognized input format"),
    }
}

fn read_records(path: &Path) -> Result<Vec<FailureRecord>> {
    read_records_value(serde_json::from_slice(&std::fs::read(path)?)?)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let mut cfg = load_config(&cli)?;
    let out = cfg.out_dir.clone();

    match &cli.command {
        Command::TrainSut { sut, budget } => {
            if let Some(k) = sut {
                cfg.sut = *k;
            }
            if let Some(s) = budget {
                cfg.sut_train_steps = *s;
            }
            let net = resolve_sut(&cfg, true)?;
            let path = out.join(format!("{}.json", cfg.sut.name().to_lowercase()));
            std::fs::create_dir_all(&out)?;
            Checkpoint::from_network(&net, ObservationScales::default()).save(&path)?;
            let stats = evaluate_driving(&GreedyPolicy(&net), &cfg.sut_config(), 50, cfg.sut_seed + 1)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            println!("checkpoint written to {}", path.display());
        }
        Command::TrainAdversary { sut, budget } => {
            let net = load_sut(&mut cfg, sut)?;
            let budget = budget.unwrap_or(cfg.step1_budget);
            let mut source = StepOneSampler::new(cfg.adversary.episode.road.lane_count, cfg.base_seed + 1);
            let outcome = train_adversary(&GreedyPolicy(&net), &mut source, &cfg.adversary, budget, cfg.base_seed)?;
            std::fs::create_dir_all(&out)?;
            outcome.archive.save(&out.join("archive.json"))?;
            Checkpoint::from_network(&outcome.network, ObservationScales::default())
                .save(&out.join("adversary.json"))?;
            write_json(&out.join("episodes.json"), &outcome.episodes)?;
            println!(
                "{} episodes, {} collisions, {} valid failures archived",
                outcome.episodes.len(),
                outcome.collisions.len(),
                outcome.archive.len()
            );
        }
        Command::SearchInit {
            sut,
            archive,
            budget,
            pop,
            optimizer,
        } => {
            let net = load_sut(&mut cfg, sut)?;
            if let Some(p) = pop {
                cfg.ga.pop_size = *p;
            }
            let archive = FailureArchive::load(archive)?;
            let budget = budget.unwrap_or(cfg.step2_budget());
            let bounds = cfg.bounds()?;
            let ep = &cfg.adversary.episode;
            let policy = GreedyPolicy(&net);
            let outcome = match optimizer.as_str() {
                "ga" => run_search(&archive, &policy, &bounds, &cfg.ga, ep, budget, cfg.base_seed)?,
                "rs" => run_random_search(&archive, &policy, &bounds, cfg.ga.pop_size, ep, budget, cfg.base_seed)?,
                other => bail!("unknown optimizer `{other}`, expected `ga` or `rs`"),
            };
            write_json(&out.join("search.json"), &outcome)?;
            println!(
                "{} evaluations, {} valid failures",
                outcome.evaluations(),
                outcome.failures.len()
            );
        }
        Command::RunMethod { sut, method } => {
            let net = load_sut(&mut cfg, sut)?;
            let method = method.unwrap_or(cfg.method);
            let run = run_method(&cfg, method, &net, cfg.base_seed)?;
            persist_run(&seed_dir(&out, method, cfg.base_seed), &run)?;
            println!("{}", serde_json::to_string_pretty(&summary_line(&run.result))?);
        }
        Command::RunPipeline {
            sut,
            methods,
            train_sut,
            smoke,
        } => {
            if *smoke {
                cfg.seeds = 3;
            }
            if let Some(p) = &sut.sut_checkpoint {
                cfg.sut_checkpoint = Some(p.clone());
            }
            let net = resolve_sut(&cfg, *train_sut)?;
            if *train_sut {
                std::fs::create_dir_all(&out)?;
                Checkpoint::from_network(&net, ObservationScales::default()).save(&out.join("sut.json"))?;
            }
            let methods = if methods.is_empty() { vec![cfg.method] } else { methods.clone() };
            let mut results = Vec::new();
            for m in methods {
                let c = ExperimentConfig {
                    method: m,
                    ..cfg.clone()
                };
                let runs = run_pipeline(&c, &net)?;
                results.extend(runs.into_iter().map(|r| r.result));
            }
            write_json(&out.join("manifest.json"), &Manifest::new(&cfg)?)?;
            emit_report(&out, &results)?;
            for r in &results {
                println!("{}", serde_json::to_string(&summary_line(r))?);
            }
        }
        Command::Classify { input } => {
            for (trace_id, t) in read_traces(input)?.iter().enumerate() {
                let c = classify_failure(t, &cfg.adversary.episode.safe);
                let line = serde_json::json!({
                    "trace_id": trace_id,
                    "label": c.label,
                    "rule": c.violated_rule,
                    "t_m": c.t_m,
                });
                println!("{line}");
            }
        }
        Command::Dedup { input } => {
            let records = read_records(input)?;
            let vectors = records
                .iter()
                .map(|r| descriptive_vector(&r.trace, &cfg.descriptive))
                .collect::<dynasto_core::Result<Vec<_>>>()?;
            let kept: Vec<&FailureRecord> = dedup_indices(&vectors, cfg.descriptive.s_th)
                .into_iter()
                .map(|i| &records[i])
                .collect();
            write_json(&out.join("unique.json"), &kept)?;
            println!("{} of {} failures kept", kept.len(), records.len());
        }
        Command::Cluster { input, k } => {
            if let Some(k) = k {
                cfg.cluster.k = *k;
            }
            let traces: Vec<Trace> = read_records(input)?.into_iter().map(|r| r.trace).collect();
            let report = cluster_failures(&traces, &cfg.adversary.episode.safe, &cfg.cluster, cfg.base_seed)?;
            write_json(&out.join("clusters.json"), &report)?;
            let mut csv = String::from("node,cluster\n");
            for (i, c) in report.assignment.iter().enumerate() {
                csv.push_str(&format!("{i},{c}\n"));
            }
            write_atomic(&out.join("assignments.csv"), csv.as_bytes())?;
            println!(
                "{} clusters over {} failures, modularity {:.3}",
                report.cluster_count(),
                traces.len(),
                report.modularity
            );
        }
        Command::Stats { results } => {
            let rs = collect_results(results)?;
            println!("{}", serde_json::to_string_pretty(&pairwise_stats(&rs)?)?);
        }
        Command::Report { results } => {
            let rs = collect_results(results)?;
            if rs.is_empty() {
                bail!("no result.json files under {}", results.display());
            }
            emit_report(results, &rs)?;
            println!("report for {} runs written to {}", rs.len(), results.display());
        }
    }
    Ok(())
}

fn summary_line(r: &dynasto_core::harness::RunResult) -> Value {
    serde_json::json!({
        "method": r.method,
        "seed": r.seed,
        "consumed": r.consumed,
        "all_collisions": r.all_collisions,
        "valid": r.valid,
        "unique": r.unique,
        "clusters": r.clusters,
        "wall_seconds": r.wall_seconds,
    })
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Method;
use super::run::{csv_err, write_atomic, write_json, RunResult};
use crate::error::{Error, Result};
use crate::stats::{compare, summarize, PairComparison, Summary};

/// Per-method distribution of the four counts over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub seeds: usize,
    pub all_collisions: Summary,
    pub valid: Summary,
    pub unique: Summary,
    pub clusters: Summary,
}

pub const METRICS: [&str; 4] = ["all_collisions", "valid", "unique", "clusters"];

fn metric(r: &RunResult, name: &str) -> f64 {
    (match name {
        "all_collisions" => r.all_collisions,
        "valid" => r.valid,
        "unique" => r.unique,
        _ => r.clusters,
    }) as f64
}

fn by_method(results: &[RunResult]) -> BTreeMap<Method, Vec<&RunResult>> {
    let mut out: BTreeMap<Method, Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        out.entry(r.method).or_default().push(r);
    }
    out
}

pub fn summarize_results(results: &[RunResult]) -> Result<BTreeMap<Method, MethodSummary>> {
    by_method(results)
        .into_iter()
        .map(|(m, rs)| {
            let col = |name: &str| summarize(&rs.iter().map(|r| metric(r, name)).collect::<Vec<_>>());
            Ok((
                m,
                MethodSummary {
                    seeds: rs.len(),
                    all_collisions: col("all_collisions")?,
                    valid: col("valid")?,
                    unique: col("unique")?,
                    clusters: col("clusters")?,
                },
            ))
        })
        .collect()
}

/// Every unordered method pair on every metric.
pub fn pairwise_stats(results: &[RunResult]) -> Result<Vec<PairComparison>> {
    let groups: Vec<(Method, Vec<&RunResult>)> = by_method(results).into_iter().collect();
    let mut out = Vec::new();
    for (i, (ma, ra)) in groups.iter().enumerate() {
        for (mb, rb) in &groups[i + 1..] {
            for name in METRICS {
                let xs: Vec<f64> = ra.iter().map(|r| metric(r, name)).collect();
                let ys: Vec<f64> = rb.iter().map(|r| metric(r, name)).collect();
                out.push(compare(ma.name(), mb.name(), name, &xs, &ys)?);
            }
        }
    }
    Ok(out)
}

/// Cumulative curves as CSV, one row per budget index per seed.
pub fn curves_csv(results: &[RunResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "seed", "index", "unique_valid"]).map_err(csv_err)?;
    for r in results {
        for (i, c) in r.curve.iter().enumerate() {
            w.write_record([r.method.name().to_string(), r.seed.to_string(), (i + 1).to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `curves.csv`, `summary.json` and `stats.json` into `dir`.
pub fn emit_report(dir: &Path, results: &[RunResult]) -> Result<()> {
    write_atomic(&dir.join("curves.csv"), &curves_csv(results)?)?;
    write_json(&dir.join("summary.json"), &summarize_results(results)?)?;
    write_json(&dir.join("stats.json"), &pairwise_stats(results)?)
}

/// Reads every `result.json` below `dir`.
pub fn collect_results(dir: &Path) -> Result<Vec<RunResult>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let mut entries: Vec<_> = std::fs::read_dir(&d)?.collect::<std::io::Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n == "result.json") {
                out.push(serde_json::from_slice(&std::fs::read(&p)?)?);
            }
        }
    }
    out.sort_by_key(|r: &RunResult| (r.method, r.seed));
    Ok(out)
}

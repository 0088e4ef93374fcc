//! Failure-mode clustering over event vectors.

use serde::{Deserialize, Serialize};

use super::events::extract_events;
use super::graph::{knn_graph, levenshtein_distances, Metric};
use super::leiden::{leiden_cluster, ClusterPartition};
use crate::error::{Error, Result};
use crate::sim::Trace;
use crate::validity::SafeDistanceParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub k: usize,
    pub resolution: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { k: 10, resolution: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub size: usize,
    /// Pool index of the medoid.
    pub exemplar_trace_id: usize,
    pub event_signature: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub clusters: Vec<ClusterSummary>,
    pub assignment: Vec<usize>,
    pub modularity: f64,
    /// Neighbor count actually used.
    pub k: usize,
    pub metric: Metric,
}

impl ClusterReport {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }
}

/// Member with the smallest summed distance to the rest of its community;
/// lower index on ties.
pub fn medoid(members: &[usize], dist: &[Vec<f64>]) -> usize {
    let cost = |i: usize| members.iter().map(|&j| dist[i][j]).sum::<f64>();
    members
        .iter()
        .copied()
        .min_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b)))
        .expect("communities are non-empty")
}

/// Clusters event vectors: Levenshtein distances, kNN graph with
/// `min(k, n - 1)` neighbors, Leiden, medoid exemplars.
pub fn cluster_events(events: &[Vec<u32>], cfg: &ClusterConfig, seed: u64) -> Result<ClusterReport> {
    if cfg.k == 0 {
        return Err(Error::config("k", "must be at least 1"));
    }
    let n = events.len();
    if n == 0 {
        return Ok(ClusterReport {
            clusters: Vec::new(),
            assignment: Vec::new(),
            modularity: 0.0,
            k: 0,
            metric: Metric::Levenshtein,
        });
    }
    let dist = levenshtein_distances(events);
    let (partition, k) = if n == 1 {
        (
            ClusterPartition {
                assignment: vec![0],
                modularity: 0.0,
            },
            0,
        )
    } else {
        let k = cfg.k.min(n - 1);
        let g = knn_graph(&dist, k)?;
        (leiden_cluster(&g, cfg.resolution, seed)?, k)
    };
    let clusters = partition
        .communities()
        .into_iter()
        .enumerate()
        .map(|(id, members)| {
            let m = medoid(&members, &dist);
            ClusterSummary {
                id,
                size: members.len(),
                exemplar_trace_id: m,
                event_signature: events[m].clone(),
            }
        })
        .collect();
    Ok(ClusterReport {
        clusters,
        assignment: partition.assignment,
        modularity: partition.modularity,
        k,
        metric: Metric::Levenshtein,
    })
}

/// Event extraction followed by [`cluster_events`].
pub fn cluster_failures(
    pool: &[Trace],
    p: &SafeDistanceParams,
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<ClusterReport> {
    let events: Vec<Vec<u32>> = pool.iter().map(|t| extract_events(t, p)).collect();
    cluster_events(&events, cfg, seed)
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract("labelings differ in length".into()));
    }
    let n = a.len() as u64;
    let mut table = std::collections::HashMap::new();
    let mut rows = std::collections::HashMap::new();
    let mut cols = std::collections::HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0u64) += 1;
        *rows.entry(x).or_insert(0u64) += 1;
        *cols.entry(y).or_insert(0u64) += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(n).max(1.0);
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        // both labelings trivial (all one class or all singletons)
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

//! Pairwise distances, kNN similarity graphs and modularity.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::levenshtein::levenshtein;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Levenshtein,
    Euclidean,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Levenshtein => "levenshtein",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "levenshtein" => Ok(Metric::Levenshtein),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::config("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// Symmetric distance matrix, rows computed in parallel.
pub fn distance_matrix<T: Sync>(items: &[T], d: impl Fn(&T, &T) -> f64 + Sync) -> Vec<Vec<f64>> {
    (0..items.len())
        .into_par_iter()
        .map(|i| {
            (0..items.len())
                .map(|j| if i == j { 0.0 } else { d(&items[i], &items[j]) })
                .collect()
        })
        .collect()
}

pub fn levenshtein_distances(events: &[Vec<u32>]) -> Vec<Vec<f64>> {
    distance_matrix(events, |a, b| levenshtein(a, b) as f64)
}

pub fn euclidean_distances(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    distance_matrix(vectors, |a, b| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    })
}

/// Undirected weighted graph without self-loops; neighbor lists are sorted
/// by node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl SimilarityGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut maps: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Contract(format!("edge ({a}, {b}) outside a graph of {n} nodes")));
            }
            if a == b {
                return Err(Error::Contract("self-loops are not allowed".into()));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Contract(format!("edge weight {w} must be positive")));
            }
            maps[a].insert(b, w);
            maps[b].insert(a, w);
        }
        Ok(Self {
            adjacency: maps.into_iter().map(|m| m.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(j, _)| j)
            .ok()
            .map(|k| self.adjacency[a][k].1)
    }

    /// Each undirected edge once, as `(a, b, w)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().filter(move |(b, _)| *b > a).map(move |&(b, w)| (a, b, w)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }
}

/// Connects every node to its `k` nearest neighbors (lower id first on
/// ties) and keeps the union, weighting edges by `1 / (1 + d)`.
pub fn knn_graph(dist: &[Vec<f64>], k: usize) -> Result<SimilarityGraph> {
    let n = dist.len();
    if k == 0 || k >= n {
        return Err(Error::config("k", format!("need 0 < k < n, got k = {k} for {n} nodes")));
    }
    if dist.iter().any(|row| row.len() != n) {
        return Err(Error::Contract("distance matrix is not square".into()));
    }
    let mut edges = Vec::with_capacity(n * k);
    for (i, row) in dist.iter().enumerate() {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for &j in &others[..k] {
            edges.push((i, j, 1.0 / (1.0 + dist[i][j])));
        }
    }
    SimilarityGraph::from_edges(n, edges)
}

/// Checks that `part` covers the graph; returns the number of communities.
pub(crate) fn check_partition(g: &SimilarityGraph, part: &[usize]) -> Result<usize> {
    if part.len() != g.len() {
        return Err(Error::Contract(format!(
            "partition covers {} of {} nodes",
            part.len(),
            g.len()
        )));
    }
    Ok(part.iter().max().map_or(0, |m| m + 1))
}

/// Newman modularity with resolution `gamma`.
pub fn modularity_with_resolution(g: &SimilarityGraph, part: &[usize], gamma: f64) -> Result<f64> {
    let c = check_partition(g, part)?;
    let m = g.total_weight();
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut inner = vec![0.0; c];
    let mut strength = vec![0.0; c];
    for (a, b, w) in g.edges() {
        if part[a] == part[b] {
            inner[part[a]] += w;
        }
    }
    for (i, &ci) in part.iter().enumerate() {
        strength[ci] += g.strength(i);
    }
    Ok(inner
        .iter()
        .zip(&strength)
        .map(|(e, k)| e / m - gamma * (k / (2.0 * m)).powi(2))
        .sum())
}

pub fn modularity(g: &SimilarityGraph, part: &[usize]) -> Result<f64> {
    modularity_with_resolution(g, part, 1.0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn cliques(count: usize, size: usize) -> SimilarityGraph {
        let mut edges = Vec::new();
        for c in 0..count {
            for a in 0..size {
                for b in a + 1..size {
                    edges.push((c * size + a, c * size + b, 1.0));
                }
            }
        }
        SimilarityGraph::from_edges(count * size, edges).unwrap()
    }

    #[test]
    fn three_node_knn() {
        let d = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 6.0], vec![5.0, 6.0, 0.0]];
        let g = knn_graph(&d, 1).unwrap();
        let edges: Vec<(usize, usize)> = g.edges().map(|(a, b, _)| (a, b)).collect();
        assert_eq!(edges, vec![(0, 1), (0, 2)]);
        assert_eq!(g.weight(0, 1), Some(0.5));
    }

    #[test]
    fn duplicates_get_unit_weight_and_ties_go_to_lower_ids() {
        let d = vec![vec![0.0; 4]; 4];
        let g = knn_graph(&d, 1).unwrap();
        assert_eq!(g.weight(0, 1), Some(1.0));
        // node 0 picks 1, everyone else picks 0
        let edges: Vec<(usize, usize)> = g.edges().map(|(a, b, _)| (a, b)).collect();
        assert_eq!(edges, vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn k_must_be_below_n() {
        let d = vec![vec![0.0; 3]; 3];
        assert!(matches!(knn_graph(&d, 3), Err(Error::Config { .. })));
        assert!(matches!(knn_graph(&d, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn modularity_closed_forms() {
        let g = cliques(2, 5);
        assert!(modularity(&g, &[0; 10]).unwrap().abs() < 1e-12);
        let split = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        assert!((modularity(&g, &split).unwrap() - 0.5).abs() < 1e-12);
        let pair = cliques(2, 2);
        assert!((modularity(&pair, &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-12);
        assert!(matches!(modularity(&g, &[0; 9]), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn knn_invariants(pts in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 3..25), k in 1usize..5) {
            prop_assume!(k < pts.len());
            let v: Vec<Vec<f64>> = pts.iter().map(|&(x, y)| vec![x, y]).collect();
            let d = euclidean_distances(&v);
            let g = knn_graph(&d, k).unwrap();
            for i in 0..g.len() {
                prop_assert!(g.degree(i) >= k);
                for &(j, w) in g.neighbors(i) {
                    prop_assert!(j != i);
                    prop_assert!(w > 0.0 && w <= 1.0);
                    prop_assert_eq!(g.weight(j, i), Some(w));
                }
            }
            prop_assert_eq!(g, knn_graph(&d, k).unwrap());
        }
    }
}

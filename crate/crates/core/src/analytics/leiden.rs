//! Leiden community detection for modularity.
//!
//! Fast local moving, refinement within communities, aggregation on the
//! refined partition, repeated until the moving phase leaves every
//! aggregate node alone.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{modularity_with_resolution, SimilarityGraph};
use crate::error::{Error, Result};

/// Randomness of the refinement merge choice.
const THETA: f64 = 0.01;
const MAX_LEVELS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Community of every node; ids are contiguous from 0.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

impl ClusterPartition {
    pub fn community_count(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of every community, sorted by node id.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Weighted graph with self-loops, as produced by aggregation.
struct Net {
    adj: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
    two_m: f64,
}

impl Net {
    fn from_graph(g: &SimilarityGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..g.len()).map(|i| g.neighbors(i).to_vec()).collect();
        let strength: Vec<f64> = (0..g.len()).map(|i| g.strength(i)).collect();
        let two_m = strength.iter().sum();
        Self { adj, strength, two_m }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community of `part` (ids `0..count`) into one node.
    fn aggregate(&self, part: &[usize], count: usize) -> Self {
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        let mut strength = vec![0.0; count];
        for v in 0..self.len() {
            strength[part[v]] += self.strength[v];
            for &(u, w) in &self.adj[v] {
                if part[u] != part[v] {
                    *rows[part[v]].entry(part[u]).or_default() += w;
                }
            }
        }
        Self {
            adj: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
            strength,
            two_m: self.two_m,
        }
    }
}

/// Renumbers community ids by first appearance; returns the count.
fn renumber(part: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in part.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Scratch accumulator of edge weight from one node to communities.
struct Links {
    weight: Vec<f64>,
    touched: Vec<usize>,
}

impl Links {
    fn new(n: usize) -> Self {
        Self {
            weight: vec![0.0; n],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, c: usize, w: f64) {
        if self.weight[c] == 0.0 && !self.touched.contains(&c) {
            self.touched.push(c);
        }
        self.weight[c] += w;
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
        }
        self.touched.clear();
    }
}

/// Queue-based local moving. Returns whether any node changed community.
fn move_nodes(net: &Net, part: &mut [usize], gamma: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = net.len();
    let mut total = vec![0.0; n];
    let mut size = vec![0usize; n];
    for v in 0..n {
        total[part[v]] += net.strength[v];
        size[part[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).filter(|&c| size[c] == 0).collect();
    let mut queue: std::collections::VecDeque<usize> = {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        order.into()
    };
    let mut queued = vec![true; n];
    let mut links = Links::new(n);
    let mut changed = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let own = part[v];
        let k_v = net.strength[v];
        total[own] -= k_v;
        size[own] -= 1;
        if size[own] == 0 {
            empty.push(own);
        }
        for &(u, w) in &net.adj[v] {
            links.add(part[u], w);
        }
        let gain = |c: usize, links: &Links| links.weight[c] - gamma * k_v * total[c] / net.two_m;
        let mut best = own;
        let mut best_gain = gain(own, &links);
        for &c in &links.touched {
            let g = gain(c, &links);
            if g > best_gain + 1e-12 {
                best = c;
                best_gain = g;
            }
        }
        if best_gain < -1e-12 {
            if let Some(&c) = empty.last() {
                best = c;
            }
        }
        links.clear();

        if size[best] == 0 {
            empty.retain(|&c| c != best);
        }
        part[v] = best;
        total[best] += k_v;
        size[best] += 1;
        if best != own {
            changed = true;
            for &(u, _) in &net.adj[v] {
                if !queued[u] && part[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    changed
}

/// Splits each community of `part` into well-connected sub-communities,
/// starting from singletons and merging only within the community.
fn refine(net: &Net, part: &[usize], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = net.len();
    let mut refined: Vec<usize> = (0..n).collect();
    let mut singleton = vec![true; n];
    let mut total: Vec<f64> = net.strength.clone();
    // weight from each refined community to the rest of its parent community
    let mut external = vec![0.0; n];
    let mut parent_total = vec![0.0; n];
    for v in 0..n {
        parent_total[part[v]] += net.strength[v];
        external[v] = net.adj[v]
            .iter()
            .filter(|&&(u, _)| part[u] == part[v])
            .map(|(_, w)| w)
            .sum();
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut links = Links::new(n);
    for v in order {
        if !singleton[v] {
            continue;
        }
        let c = part[v];
        let k_v = net.strength[v];
        if external[v] < gamma * k_v * (parent_total[c] - k_v) / net.two_m {
            continue;
        }
        for &(u, w) in &net.adj[v] {
            if part[u] == c {
                links.add(refined[u], w);
            }
        }
        let own = refined[v];
        let mut candidates = vec![(own, 0.0)];
        for &t in &links.touched {
            if t == own {
                continue;
            }
            let well_connected = external[t] >= gamma * total[t] * (parent_total[c] - total[t]) / net.two_m;
            let gain = links.weight[t] - gamma * k_v * total[t] / net.two_m;
            if well_connected && gain >= 0.0 {
                candidates.push((t, gain));
            }
        }
        let top = candidates.iter().map(|&(_, g)| g).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = candidates.iter().map(|&(_, g)| ((g - top) / THETA).exp()).collect();
        let mut r = rng.gen::<f64>() * weights.iter().sum::<f64>();
        let mut chosen = candidates[candidates.len() - 1].0;
        for (&(t, _), w) in candidates.iter().zip(&weights) {
            if r < *w {
                chosen = t;
                break;
            }
            r -= w;
        }
        if chosen != own {
            let w_vt = links.weight[chosen];
            external[chosen] += external[own] - 2.0 * w_vt;
            total[chosen] += k_v;
            total[own] = 0.0;
            refined[v] = chosen;
            singleton[v] = false;
            for &(u, _) in &net.adj[v] {
                if refined[u] == chosen {
                    singleton[u] = false;
                }
            }
        }
        links.clear();
    }
    refined
}

/// Splits communities that are not connected in `g` into their components.
fn split_disconnected(g: &SimilarityGraph, part: &mut [usize]) {
    let n = g.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        label[s] = next;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(u, _) in g.neighbors(v) {
                if label[u] == usize::MAX && part[u] == part[s] {
                    label[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    part.copy_from_slice(&label);
}

/// Partitions `g` by maximizing modularity at the given resolution.
/// Deterministic for a fixed seed.
pub fn leiden_cluster(g: &SimilarityGraph, resolution: f64, seed: u64) -> Result<ClusterPartition> {
    if g.is_empty() {
        return Err(Error::Contract("cannot cluster an empty graph".into()));
    }
    if !(resolution > 0.0) {
        return Err(Error::config("resolution", "must be positive"));
    }
    let n = g.len();
    if g.total_weight() == 0.0 {
        let assignment: Vec<usize> = (0..n).collect();
        return Ok(ClusterPartition {
            modularity: modularity_with_resolution(g, &assignment, resolution)?,
            assignment,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Net::from_graph(g);
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut part: Vec<usize> = (0..n).collect();
    for _ in 0..MAX_LEVELS {
        move_nodes(&net, &mut part, resolution, &mut rng);
        let count = renumber(&mut part);
        if count == net.len() {
            break;
        }
        let mut refined = refine(&net, &part, resolution, &mut rng);
        let refined_count = renumber(&mut refined);
        let mut next_part = vec![0; refined_count];
        for v in 0..net.len() {
            next_part[refined[v]] = part[v];
        }
        net = net.aggregate(&refined, refined_count);
        for x in node_of.iter_mut() {
            *x = refined[*x];
        }
        part = next_part;
    }
    let mut assignment: Vec<usize> = node_of.iter().map(|&v| part[v]).collect();
    split_disconnected(g, &mut assignment);
    renumber(&mut assignment);
    Ok(ClusterPartition {
        modularity: modularity_with_resolution(g, &assignment, resolution)?,
        assignment,
    })
}

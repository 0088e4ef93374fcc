//! Low-level kinematic fingerprints of failures used for de-duplication.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptiveConfig {
    /// Pre-collision steps kept, collision step included.
    pub n_steps: usize,
    pub x_scale: f64,
    pub y_scale: f64,
    pub v_scale: f64,
    /// Duplicate threshold in normalized units.
    pub s_th: f64,
}

impl Default for DescriptiveConfig {
    fn default() -> Self {
        Self {
            n_steps: 8,
            x_scale: 20.0,
            y_scale: 4.0,
            v_scale: 10.0,
            s_th: 0.5,
        }
    }
}

/// `(dx, dy, dv)` of adversary relative to ego for the last `n_steps`
/// records up to the collision, flattened.
pub fn descriptive_vector(trace: &Trace, cfg: &DescriptiveConfig) -> Result<Vec<f64>> {
    let t_c = match (trace.collided, trace.t_c) {
        (true, Some(t)) => t,
        _ => return Err(Error::Contract("descriptive vectors need a collision trace".into())),
    };
    let last = t_c.min(trace.steps.len() - 1);
    let first = (last + 1).saturating_sub(cfg.n_steps);
    let pad = cfg.n_steps - (last + 1 - first);
    let window = std::iter::repeat(&trace.steps[first])
        .take(pad)
        .chain(&trace.steps[first..=last]);
    Ok(window
        .flat_map(|s| {
            [
                (s.adv.x - s.ego.x) / cfg.x_scale,
                (s.adv.y - s.ego.y) / cfg.y_scale,
                (s.adv.speed() - s.ego.speed()) / cfg.v_scale,
            ]
        })
        .collect())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn is_duplicate(v1: &[f64], v2: &[f64], s_th: f64) -> bool {
    euclidean(v1, v2) < s_th
}

/// Indices of the first-seen representatives: an item is dropped when it
/// duplicates one already kept.
pub fn dedup_indices(vectors: &[Vec<f64>], s_th: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        if !kept.iter().any(|&k| is_duplicate(v, &vectors[k], s_th)) {
            kept.push(i);
        }
    }
    kept
}

/// Labeled pair used to calibrate the duplicate threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub similar: bool,
}

/// Threshold from `grid` that labels the most pairs correctly; the smallest
/// such threshold wins ties. Returns `(threshold, accuracy)`.
pub fn calibrate_threshold(pairs: &[LabeledPair], grid: &[f64]) -> Result<(f64, f64)> {
    if pairs.is_empty() || grid.is_empty() {
        return Err(Error::Contract("calibration needs pairs and a non-empty grid".into()));
    }
    let mut best = (grid[0], -1.0);
    for &s in grid {
        let correct = pairs
            .iter()
            .filter(|p| is_duplicate(&p.a, &p.b, s) == p.similar)
            .count();
        let acc = correct as f64 / pairs.len() as f64;
        if acc > best.1 {
            best = (s, acc);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ScenarioConfig, StepRecord, VehicleState, MetaAction};

    fn rec(t: usize, dx: f64, dy: f64, v_ego: f64, v_adv: f64) -> StepRecord {
        let ego = VehicleState::new(100.0 + t as f64, 0.0, v_ego, 0.0, 0);
        let adv = VehicleState::new(100.0 + t as f64 + dx, dy, v_adv, 0.0, 0);
        StepRecord {
            t,
            ego,
            adv,
            ego_action: MetaAction::Idle,
            adv_action: MetaAction::Idle,
            a_ego: 0.0,
            a_adv: 0.0,
        }
    }

    fn trace(steps: Vec<StepRecord>, collided: bool) -> Trace {
        let n = steps.len();
        Trace {
            seed: 0,
            config: ScenarioConfig::straight(100.0, 110.0, 0, 0, 25.0),
            steps,
            collided,
            t_c: collided.then_some(n - 1),
        }
    }

    #[test]
    fn stationary_relative_motion_repeats() {
        let t = trace((0..12).map(|i| rec(i, 10.0, 0.0, 25.0, 20.0)).collect(), true);
        let v = descriptive_vector(&t, &DescriptiveConfig::default()).unwrap();
        assert_eq!(v.len(), 24);
        for c in v.chunks(3) {
            assert_eq!(c, &[0.5, 0.0, -0.5]);
        }
    }

    #[test]
    fn short_traces_are_front_padded() {
        let t = trace(
            vec![rec(0, 20.0, 4.0, 25.0, 25.0), rec(1, 10.0, 2.0, 25.0, 23.0), rec(2, 4.0, 0.0, 25.0, 21.0)],
            true,
        );
        let v = descriptive_vector(&t, &DescriptiveConfig::default()).unwrap();
        for c in v[..18].chunks(3) {
            assert_eq!(c, &[1.0, 1.0, 0.0]);
        }
        assert_eq!(&v[18..21], &[0.5, 0.5, -0.2]);
        assert!((v[23] - -0.4).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_window() {
        let steps: Vec<StepRecord> = (0..10).map(|i| rec(i, 40.0 - 4.0 * i as f64, 0.0, 25.0, 25.0 - i as f64)).collect();
        let t = trace(steps, true);
        let v = descriptive_vector(&t, &DescriptiveConfig::default()).unwrap();
        // window covers records 2..=9
        for (k, c) in v.chunks(3).enumerate() {
            let i = (k + 2) as f64;
            assert!((c[0] - (40.0 - 4.0 * i) / 20.0).abs() < 1e-12);
            assert!((c[2] - -i / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_collision_is_rejected() {
        let t = trace(vec![rec(0, 10.0, 0.0, 25.0, 25.0)], false);
        assert!(descriptive_vector(&t, &DescriptiveConfig::default()).is_err());
    }

    #[test]
    fn duplicate_rule_is_strict() {
        let a = vec![0.0; 24];
        let mut b = a.clone();
        assert!(is_duplicate(&a, &b, 0.5));
        b[0] = 0.5;
        assert!(!is_duplicate(&a, &b, 0.5));
        b[0] = 0.49;
        assert!(is_duplicate(&a, &b, 0.5));
    }

    #[test]
    fn dedup_keeps_first_seen() {
        let vs = vec![vec![0.0], vec![0.3], vec![0.6], vec![1.2]];
        assert_eq!(dedup_indices(&vs, 0.5), vec![0, 2, 3]);
    }

    #[test]
    fn calibration_picks_the_separating_threshold() {
        let pair = |d: f64, similar| LabeledPair {
            a: vec![0.0],
            b: vec![d],
            similar,
        };
        let pairs = vec![pair(0.1, true), pair(0.3, true), pair(0.7, false), pair(1.5, false)];
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
        let (s, acc) = calibrate_threshold(&pairs, &grid).unwrap();
        assert_eq!(acc, 1.0);
        assert!(s > 0.3 && s <= 0.7);
    }
}

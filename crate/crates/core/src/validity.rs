//! Offline temporal-logic monitor that labels collision traces as valid or
//! invalid failures.
//!
//! Semantics are Boolean. Every rule is an "eventually" over `[0, T_c]` of a
//! conjunction of per-step predicates; [`evaluate_predicates`] computes those
//! predicates once and [`classify_failure`] scans them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RoadConfig, Trace, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeDistanceParams {
    /// Lead vehicle max deceleration magnitude (m/s²).
    pub a_l: f64,
    /// Following vehicle max deceleration magnitude (m/s²).
    pub a_f: f64,
    /// Reaction time (s).
    pub tau_r: f64,
    pub d_min_lon: f64,
    pub a_lat: f64,
    /// Lateral deceleration magnitude (m/s²).
    pub b_lat: f64,
    pub d_min_lat: f64,
    /// Lateral offset below which both vehicles count as sharing a lane.
    pub delta_lat: f64,
    /// Acceleration magnitude that counts as braking or accelerating.
    pub a_min: f64,
    /// Look-ahead window of the eventually-operators, in policy steps.
    pub dt_window: usize,
}

impl Default for SafeDistanceParams {
    fn default() -> Self {
        Self {
            a_l: 5.0,
            a_f: 5.0,
            tau_r: 0.2,
            d_min_lon: 5.0,
            a_lat: 5.0,
            b_lat: 5.0,
            d_min_lat: 2.0,
            delta_lat: 2.0,
            a_min: 1.0,
            dt_window: 2,
        }
    }
}

impl SafeDistanceParams {
    pub fn validate(&self, road: &RoadConfig) -> Result<()> {
        let positive = [
            ("a_l", self.a_l),
            ("a_f", self.a_f),
            ("tau_r", self.tau_r),
            ("d_min_lon", self.d_min_lon),
            ("a_lat", self.a_lat),
            ("b_lat", self.b_lat),
            ("d_min_lat", self.d_min_lat),
            ("delta_lat", self.delta_lat),
            ("a_min", self.a_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::config(name, "must be strictly positive"));
            }
        }
        if self.delta_lat >= road.lane_width {
            return Err(Error::config("delta_lat", "must be smaller than the lane width"));
        }
        Ok(())
    }
}

/// Safe longitudinal gap: follower stopping distance minus leader stopping
/// distance, plus the reaction-time travel and a minimum margin. Never
/// below `d_min_lon`.
pub fn safe_lon_distance(v_l: f64, v_f: f64, p: &SafeDistanceParams) -> f64 {
    let raw = 0.5 * (v_f * v_f / p.a_f - v_l * v_l / p.a_l) + v_f * p.tau_r + p.d_min_lon;
    raw.max(p.d_min_lon)
}

/// Safe lateral gap for a vehicle moving sideways at `v_lat`.
pub fn safe_lat_distance(v_lat: f64, p: &SafeDistanceParams) -> f64 {
    let v = v_lat.abs();
    let reach = v + p.a_lat * p.tau_r;
    v * p.tau_r + 0.5 * p.a_lat * p.tau_r * p.tau_r + reach * reach / (2.0 * p.b_lat) + p.d_min_lat
}

/// Euclidean distance between the two vehicle reference points.
pub fn current_distance(ego: &VehicleState, adv: &VehicleState) -> f64 {
    (ego.x - adv.x).hypot(ego.y - adv.y)
}

pub fn same_lane(ego: &VehicleState, adv: &VehicleState, p: &SafeDistanceParams) -> bool {
    (adv.y - ego.y).abs() < p.delta_lat
}

/// Longitudinal model when the vehicles share a lane (the rear vehicle is
/// the follower), lateral model of the adversary otherwise.
pub fn required_safe_distance(ego: &VehicleState, adv: &VehicleState, p: &SafeDistanceParams) -> f64 {
    if same_lane(ego, adv, p) {
        let (lead, follow) = if adv.x >= ego.x { (adv, ego) } else { (ego, adv) };
        safe_lon_distance(lead.vx.max(0.0), follow.vx.max(0.0), p)
    } else {
        safe_lat_distance(adv.vy, p)
    }
}

/// Per-step truth values of the monitor's atomic and derived predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PredicateVector {
    pub unsafe_distance: bool,
    pub ahead_adv: bool,
    pub ahead_ego: bool,
    pub lane_change_adv: bool,
    pub lane_change_ego: bool,
    pub same_lane: bool,
    /// Longitudinal overlap within one vehicle length.
    pub side_by_side: bool,
    pub brake_adv: bool,
    pub accel_adv: bool,
    pub brake_ego: bool,
    pub accel_ego: bool,
    /// Adversary lane change ending ahead of the ego in its lane, within
    /// the look-ahead window.
    pub cut_in_adv: bool,
}

/// One [`PredicateVector`] per recorded step.
pub fn evaluate_predicates(trace: &Trace, p: &SafeDistanceParams) -> Vec<PredicateVector> {
    let steps = &trace.steps;
    let mut out: Vec<PredicateVector> = steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (ego, adv) = (&s.ego, &s.adv);
            let (lc_adv, lc_ego) = match i.checked_sub(1).map(|j| &steps[j]) {
                Some(prev) => {
                    let adv_moved = prev.adv.lane_index != adv.lane_index;
                    let ego_moved = prev.ego.lane_index != ego.lane_index;
                    (adv_moved && !ego_moved, ego_moved && !adv_moved)
                }
                None => (false, false),
            };
            let d_c = current_distance(ego, adv);
            PredicateVector {
                unsafe_distance: d_c < required_safe_distance(ego, adv, p),
                ahead_adv: adv.x > ego.x,
                ahead_ego: ego.x > adv.x,
                lane_change_adv: lc_adv,
                lane_change_ego: lc_ego,
                same_lane: same_lane(ego, adv, p),
                side_by_side: (adv.x - ego.x).abs() < ego.length,
                brake_adv: s.a_adv <= -p.a_min,
                accel_adv: s.a_adv >= p.a_min,
                brake_ego: s.a_ego <= -p.a_min,
                accel_ego: s.a_ego >= p.a_min,
                cut_in_adv: false,
            }
        })
        .collect();
    let completed: Vec<bool> = out
        .iter()
        .map(|v| v.lane_change_adv && v.ahead_adv && v.same_lane)
        .collect();
    for (t, v) in out.iter_mut().enumerate() {
        let end = (t + p.dt_window).min(completed.len() - 1);
        v.cut_in_adv = completed[t..=end].iter().any(|&b| b);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Valid,
    Invalid,
    NoCollision,
}

/// Rules in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "unsafe-cut-in")]
    UnsafeCutIn,
    #[serde(rename = "unsafe-brake")]
    UnsafeBrake,
    #[serde(rename = "rear-hit")]
    RearHit,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::UnsafeCutIn, Rule::UnsafeBrake, Rule::RearHit];

    pub fn holds(self, v: &PredicateVector) -> bool {
        match self {
            Rule::UnsafeCutIn => v.cut_in_adv && v.unsafe_distance,
            Rule::UnsafeBrake => v.ahead_adv && v.unsafe_distance && v.brake_adv && v.same_lane,
            Rule::RearHit => v.ahead_ego && v.accel_adv && v.same_lane,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    #[serde(rename = "rule")]
    pub violated_rule: Option<Rule>,
    pub t_m: Option<usize>,
}

impl Classification {
    pub const NO_COLLISION: Self = Self {
        label: Label::NoCollision,
        violated_rule: None,
        t_m: None,
    };
    pub const VALID: Self = Self {
        label: Label::Valid,
        violated_rule: None,
        t_m: None,
    };

    pub fn is_valid(&self) -> bool {
        self.label == Label::Valid
    }
}

/// Labels a trace. Collisions are invalid when any rule holds somewhere in
/// `[0, T_c]`; the first rule in precedence order is reported together with
/// its earliest onset step.
pub fn classify_failure(trace: &Trace, p: &SafeDistanceParams) -> Classification {
    let Some(t_c) = trace.t_c.filter(|_| trace.collided) else {
        return Classification::NO_COLLISION;
    };
    let preds = evaluate_predicates(trace, p);
    let horizon = (t_c + 1).min(preds.len());
    for rule in Rule::ALL {
        if let Some(t) = preds[..horizon].iter().position(|v| rule.holds(v)) {
            return Classification {
                label: Label::Invalid,
                violated_rule: Some(rule),
                t_m: Some(trace.steps[t].t),
            };
        }
    }
    Classification::VALID
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{MetaAction, ScenarioConfig, StepRecord};

    fn p() -> SafeDistanceParams {
        SafeDistanceParams::default()
    }

    #[test]
    fn safe_lon_examples() {
        assert!((safe_lon_distance(25.0, 25.0, &p()) - 10.0).abs() < 1e-12);
        assert!((safe_lon_distance(20.0, 25.0, &p()) - 32.5).abs() < 1e-12);
        // Raw value 0.5 * (80 - 125) + 4 + 5 = -13.5 is clamped.
        assert_eq!(safe_lon_distance(25.0, 20.0, &p()), 5.0);
    }

    #[test]
    fn safe_lat_examples() {
        assert!((safe_lat_distance(0.0, &p()) - 2.2).abs() < 1e-12);
        assert!((safe_lat_distance(1.0, &p()) - 2.7).abs() < 1e-12);
        assert!((safe_lat_distance(-1.0, &p()) - 2.7).abs() < 1e-12);
        let zero = SafeDistanceParams {
            tau_r: 0.0,
            d_min_lat: 0.0,
            ..p()
        };
        assert_eq!(safe_lat_distance(0.0, &zero), 0.0);
    }

    fn state(x: f64, y: f64, v: f64) -> VehicleState {
        let mut s = VehicleState::new(x, y, v, 0.0, (y / 4.0).round() as usize);
        s.vx = v;
        s
    }

    #[test]
    fn current_distance_examples() {
        let a = state(0.0, 0.0, 25.0);
        assert_eq!(current_distance(&a, &a), 0.0);
        assert_eq!(current_distance(&a, &state(3.0, 4.0, 25.0)), 5.0);
        assert_eq!(current_distance(&a, &state(10.0, 0.0, 25.0)), 10.0);
    }

    #[test]
    fn required_distance_branches() {
        let ego = state(0.0, 0.0, 25.0);
        assert!((required_safe_distance(&ego, &state(30.0, 0.0, 25.0), &p()) - 10.0).abs() < 1e-12);
        assert!((required_safe_distance(&ego, &state(30.0, 4.0, 25.0), &p()) - 2.2).abs() < 1e-12);
        let eps = 1e-9;
        let near = state(30.0, p().delta_lat - eps, 25.0);
        assert!((required_safe_distance(&ego, &near, &p()) - 10.0).abs() < 1e-12);
        let at = state(30.0, p().delta_lat, 25.0);
        assert!((required_safe_distance(&ego, &at, &p()) - 2.2).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects_wide_lane_threshold() {
        let bad = SafeDistanceParams {
            delta_lat: 4.0,
            ..p()
        };
        assert!(bad.validate(&RoadConfig::default()).is_err());
        assert!(p().validate(&RoadConfig::default()).is_ok());
    }

    fn rec(t: usize, ego: VehicleState, adv: VehicleState, a_adv: f64) -> StepRecord {
        StepRecord {
            t,
            ego,
            adv,
            ego_action: MetaAction::Idle,
            adv_action: MetaAction::Idle,
            a_ego: 0.0,
            a_adv,
        }
    }

    fn trace(steps: Vec<StepRecord>, collided: bool) -> Trace {
        let t_c = collided.then(|| steps.last().unwrap().t);
        Trace {
            seed: 0,
            config: ScenarioConfig::straight(0.0, 0.0, 0, 0, 25.0),
            steps,
            collided,
            t_c,
        }
    }

    #[test]
    fn parallel_traffic_has_no_lane_events() {
        let steps = (0..6)
            .map(|t| {
                let x = 25.0 * t as f64;
                rec(t, state(x, 0.0, 25.0), state(x + 20.0, 4.0, 25.0), 0.0)
            })
            .collect();
        let preds = evaluate_predicates(&trace(steps, false), &p());
        assert!(preds.iter().all(|v| !v.lane_change_adv && !v.cut_in_adv));
    }

    #[test]
    fn cut_in_detected_at_lane_switch() {
        // Adversary in lane 1 until t=4, in the ego lane (ahead) from t=5.
        let steps = (0..8)
            .map(|t| {
                let x = 25.0 * t as f64;
                let y_adv = if t < 5 { 4.0 } else { 0.5 };
                rec(t, state(x, 0.0, 25.0), state(x + 30.0, y_adv, 25.0), 0.0)
            })
            .collect();
        let preds = evaluate_predicates(&trace(steps, false), &p());
        assert!(preds[5].lane_change_adv);
        assert!(preds[5].cut_in_adv);
        // Window of two steps reaches back to the onset.
        assert!(preds[3].cut_in_adv && preds[4].cut_in_adv);
        assert!(!preds[2].cut_in_adv && !preds[6].cut_in_adv);
    }

    #[test]
    fn brake_threshold() {
        let steps = vec![
            rec(0, state(0.0, 0.0, 25.0), state(40.0, 0.0, 25.0), 0.0),
            rec(1, state(25.0, 0.0, 25.0), state(63.0, 0.0, 23.0), -2.0),
        ];
        let preds = evaluate_predicates(&trace(steps, false), &p());
        assert!(preds[1].brake_adv && !preds[1].accel_adv);
        assert!(!preds[0].brake_adv);
    }

    #[test]
    fn no_collision_label() {
        let steps = vec![rec(0, state(0.0, 0.0, 25.0), state(40.0, 0.0, 25.0), 0.0)];
        assert_eq!(classify_failure(&trace(steps, false), &p()), Classification::NO_COLLISION);
    }
}

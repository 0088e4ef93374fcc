//! Semantic event vectors: one integer code per recorded step.

use serde::{Deserialize, Serialize};

use crate::sim::Trace;
use crate::validity::{evaluate_predicates, PredicateVector, SafeDistanceParams};

/// Code appended at the collision step.
pub const COLLISION: u32 = 999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum Event {
    CutInSideEgo = 1,
    CutInEgo = 2,
    CutOutEgo = 3,
    CutInSideAdv = 4,
    CutOutAdv = 5,
    CutInAdv = 6,
    BrakeSameLaneAdv = 7,
    BrakeDifferentLaneAdv = 8,
}

impl Event {
    pub fn code(self) -> u32 {
        self as u32
    }
}

/// Lane-change event at one step. Only one vehicle changes lane per step by
/// construction of the lane-change predicates, and the side-by-side variant
/// takes priority over cut-in/cut-out.
fn lane_event(v: &PredicateVector) -> Option<Event> {
    if v.lane_change_ego {
        if v.same_lane && v.side_by_side {
            Some(Event::CutInSideEgo)
        } else if v.ahead_ego && v.same_lane {
            Some(Event::CutInEgo)
        } else if v.ahead_ego {
            Some(Event::CutOutEgo)
        } else {
            None
        }
    } else if v.lane_change_adv {
        if v.same_lane && v.side_by_side {
            Some(Event::CutInSideAdv)
        } else if v.ahead_adv && !v.same_lane {
            Some(Event::CutOutAdv)
        } else if v.ahead_adv {
            Some(Event::CutInAdv)
        } else {
            None
        }
    } else {
        None
    }
}

fn brake_event(v: &PredicateVector) -> Option<Event> {
    match (v.ahead_adv && v.brake_adv, v.same_lane) {
        (true, true) => Some(Event::BrakeSameLaneAdv),
        (true, false) => Some(Event::BrakeDifferentLaneAdv),
        _ => None,
    }
}

/// Events occurring at one step.
pub fn step_events(v: &PredicateVector) -> Vec<Event> {
    lane_event(v).into_iter().chain(brake_event(v)).collect()
}

/// Event vector of a trace: the summed codes of every record before the
/// collision, then [`COLLISION`]. Non-collision traces get one entry per
/// record and no terminator.
pub fn extract_events(trace: &Trace, p: &SafeDistanceParams) -> Vec<u32> {
    let preds = evaluate_predicates(trace, p);
    let end = match (trace.collided, trace.t_c) {
        (true, Some(t_c)) => t_c.min(preds.len()),
        _ => preds.len(),
    };
    let mut out: Vec<u32> = preds[..end]
        .iter()
        .map(|v| step_events(v).iter().map(|e| e.code()).sum())
        .collect();
    if trace.collided {
        out.push(COLLISION);
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::sim::{MetaAction, ScenarioConfig, StepRecord, VehicleState};

    pub(crate) struct Frame {
        pub ego: (f64, f64, usize),
        pub adv: (f64, f64, usize),
        pub a_adv: f64,
    }

    pub(crate) fn build(frames: &[Frame], collided: bool) -> Trace {
        let steps = frames
            .iter()
            .enumerate()
            .map(|(t, f)| StepRecord {
                t,
                ego: VehicleState::new(f.ego.0, f.ego.1, 25.0, 0.0, f.ego.2),
                adv: VehicleState::new(f.adv.0, f.adv.1, 25.0, 0.0, f.adv.2),
                ego_action: MetaAction::Idle,
                adv_action: MetaAction::Idle,
                a_ego: 0.0,
                a_adv: f.a_adv,
            })
            .collect::<Vec<_>>();
        let n = steps.len();
        Trace {
            seed: 0,
            config: ScenarioConfig::straight(0.0, 0.0, 0, 0, 25.0),
            steps,
            collided,
            t_c: collided.then_some(n - 1),
        }
    }

    /// Ego cruises in lane 1, adversary starts in lane 0 ahead, merges in at
    /// record 3, brakes at records 6 and 7 and is hit at record 8.
    pub(crate) fn cut_in_then_brake() -> Trace {
        let adv_y = [0.0, 0.5, 1.5, 2.5, 3.5, 4.0, 4.0, 4.0, 4.0];
        let frames: Vec<Frame> = adv_y
            .iter()
            .enumerate()
            .map(|(t, &y)| {
                let gap = 14.0 - 1.5 * t as f64;
                Frame {
                    ego: (100.0 + 25.0 * t as f64, 4.0, 1),
                    adv: (100.0 + 25.0 * t as f64 + gap, y, usize::from(y > 2.0)),
                    a_adv: if t == 6 || t == 7 { -4.0 } else { 0.0 },
                }
            })
            .collect();
        build(&frames, true)
    }

    #[test]
    fn cut_in_brake_collision() {
        let ev = extract_events(&cut_in_then_brake(), &SafeDistanceParams::default());
        assert_eq!(ev, vec![0, 0, 0, 6, 0, 0, 7, 7, 999]);
    }

    #[test]
    fn quiet_drive_is_all_zero() {
        let frames: Vec<Frame> = (0..6)
            .map(|t| Frame {
                ego: (25.0 * t as f64, 4.0, 1),
                adv: (60.0 + 25.0 * t as f64, 0.0, 0),
                a_adv: 0.0,
            })
            .collect();
        let ev = extract_events(&build(&frames, false), &SafeDistanceParams::default());
        assert_eq!(ev, vec![0; 6]);
    }

    #[test]
    fn simultaneous_codes_are_summed() {
        let mut t = cut_in_then_brake();
        t.steps[3].a_adv = -3.0;
        let ev = extract_events(&t, &SafeDistanceParams::default());
        assert_eq!(ev[3], 13);
    }

    #[test]
    fn side_by_side_merge_is_the_side_variant() {
        let frames = vec![
            Frame { ego: (100.0, 4.0, 1), adv: (102.0, 1.5, 0), a_adv: 0.0 },
            Frame { ego: (125.0, 4.0, 1), adv: (127.0, 2.5, 1), a_adv: 0.0 },
        ];
        let ev = extract_events(&build(&frames, false), &SafeDistanceParams::default());
        assert_eq!(ev, vec![0, 4]);
    }

    #[test]
    fn ego_events() {
        // ego moves left in front of the adversary: cut-in by the ego
        let frames = vec![
            Frame { ego: (120.0, 2.5, 1), adv: (100.0, 0.0, 0), a_adv: 0.0 },
            Frame { ego: (145.0, 1.5, 0), adv: (125.0, 0.0, 0), a_adv: 0.0 },
        ];
        assert_eq!(extract_events(&build(&frames, false), &SafeDistanceParams::default()), vec![0, 2]);
        // ego leaves the lane ahead of the adversary: cut-out by the ego
        let frames = vec![
            Frame { ego: (120.0, 0.0, 0), adv: (100.0, 0.0, 0), a_adv: 0.0 },
            Frame { ego: (145.0, 2.1, 1), adv: (125.0, 0.0, 0), a_adv: 0.0 },
        ];
        assert_eq!(extract_events(&build(&frames, false), &SafeDistanceParams::default()), vec![0, 3]);
    }

    #[test]
    fn different_lane_brake_and_cut_out() {
        let frames = vec![
            Frame { ego: (100.0, 4.0, 1), adv: (130.0, 4.0, 1), a_adv: 0.0 },
            Frame { ego: (125.0, 4.0, 1), adv: (155.0, 1.9, 0), a_adv: -2.0 },
        ];
        let ev = extract_events(&build(&frames, false), &SafeDistanceParams::default());
        assert_eq!(ev, vec![0, 5 + 8]);
    }
}

//! Meta-action controllers and kinematic integration.

use serde::{Deserialize, Serialize};

use super::observation::ObservationScales;
use super::types::{MetaAction, RoadConfig, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Seconds between policy decisions.
    pub policy_period: f64,
    pub substeps: usize,
    pub speed_step: f64,
    pub min_target_speed: f64,
    pub max_target_speed: f64,
    pub kp_speed: f64,
    pub max_accel: f64,
    pub kp_lateral: f64,
    pub kp_heading: f64,
    pub max_heading: f64,
    pub obs_scales: ObservationScales,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            policy_period: 1.0,
            substeps: 5,
            speed_step: 2.5,
            min_target_speed: 15.0,
            max_target_speed: 30.0,
            kp_speed: 1.0 / 0.6,
            max_accel: 5.0,
            kp_lateral: 1.0 / 0.6,
            kp_heading: 5.0,
            max_heading: std::f64::consts::FRAC_PI_4,
            obs_scales: ObservationScales::default(),
        }
    }
}

impl SimParams {
    pub fn dt(&self) -> f64 {
        self.policy_period / self.substeps as f64
    }
}

/// A simulated vehicle: its state plus the controller set-points.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub state: VehicleState,
    pub speed: f64,
    pub target_speed: f64,
}

impl Vehicle {
    pub fn new(
        x: f64,
        lane: usize,
        target_lane: usize,
        heading: f64,
        speed: f64,
        road: &RoadConfig,
        p: &SimParams,
    ) -> Self {
        let mut state = VehicleState::new(x, road.lane_center(lane), speed, heading, lane);
        state.target_lane = target_lane;
        Self {
            state,
            speed,
            target_speed: speed.clamp(p.min_target_speed, p.max_target_speed),
        }
    }

    /// Updates set-points for `action`. Lane changes past the road edge
    /// degrade to `IDLE`; the effective action is returned.
    pub fn apply_action(&mut self, action: MetaAction, road: &RoadConfig, p: &SimParams) -> MetaAction {
        match action {
            MetaAction::LaneLeft => {
                if self.state.target_lane == 0 {
                    return MetaAction::Idle;
                }
                self.state.target_lane -= 1;
            }
            MetaAction::LaneRight => {
                if self.state.target_lane + 1 >= road.lane_count {
                    return MetaAction::Idle;
                }
                self.state.target_lane += 1;
            }
            MetaAction::Faster => {
                self.target_speed = (self.target_speed + p.speed_step).min(p.max_target_speed);
            }
            MetaAction::Slower => {
                self.target_speed = (self.target_speed - p.speed_step).max(p.min_target_speed);
            }
            MetaAction::Idle => {}
        }
        action
    }

    /// Proportional speed tracking, saturated at `max_accel`.
    pub fn tracking_accel(&self, p: &SimParams) -> f64 {
        (p.kp_speed * (self.target_speed - self.speed)).clamp(-p.max_accel, p.max_accel)
    }

    /// One explicit-Euler substep with longitudinal acceleration `accel`
    /// and the lateral controller steering toward the target lane.
    pub fn integrate(&mut self, accel: f64, dt: f64, road: &RoadConfig, p: &SimParams) {
        let s = &mut self.state;
        let lateral_error = road.lane_center(s.target_lane) - s.y;
        let lateral_cmd = p.kp_lateral * lateral_error / self.speed.max(1.0);
        let heading_ref = lateral_cmd.clamp(-1.0, 1.0).asin().clamp(-p.max_heading, p.max_heading);
        let heading_rate = p.kp_heading * (heading_ref - s.heading);

        let (sin, cos) = s.heading.sin_cos();
        s.x += self.speed * cos * dt;
        s.y += self.speed * sin * dt;
        s.heading += heading_rate * dt;
        self.speed = (self.speed + accel * dt).max(0.0);

        let (sin, cos) = s.heading.sin_cos();
        s.vx = self.speed * cos;
        s.vy = self.speed * sin;
        s.lane_index = road.nearest_lane(s.y);
    }
}

//! Intelligent Driver Model for background traffic.

use serde::{Deserialize, Serialize};

use super::types::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    pub desired_speed: f64,
    /// Desired time headway (s).
    pub time_headway: f64,
    /// Minimum bumper-to-bumper gap (m).
    pub min_gap: f64,
    pub max_accel: f64,
    /// Comfortable deceleration magnitude (m/s²).
    pub comfortable_decel: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 25.0,
            time_headway: 1.5,
            min_gap: 2.0,
            max_accel: 3.0,
            comfortable_decel: 5.0,
            delta: 4.0,
        }
    }
}

impl IdmParams {
    /// Longer headway and gentler acceleration.
    pub fn defensive() -> Self {
        Self {
            time_headway: 2.5,
            min_gap: 5.0,
            max_accel: 1.5,
            comfortable_decel: 3.0,
            ..Self::default()
        }
    }
}

/// IDM acceleration of `follower` behind `leader`. Without a leader only the
/// free-road term applies.
pub fn idm_acceleration(
    follower: &VehicleState,
    leader: Option<&VehicleState>,
    p: &IdmParams,
) -> f64 {
    let v = follower.vx.max(0.0);
    let free = p.max_accel * (1.0 - (v / p.desired_speed).powf(p.delta));
    let Some(leader) = leader else {
        return free;
    };
    let gap = (leader.x - follower.x) - (leader.length + follower.length) / 2.0;
    let gap = gap.max(1e-3);
    let dv = v - leader.vx;
    let s_star = p.min_gap
        + (v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfortable_decel).sqrt()))
            .max(0.0);
    free - p.max_accel * (s_star / gap).powi(2)
}

use serde::{Deserialize, Serialize};

use super::types::VehicleState;

pub const OBS_DIM: usize = 8;

/// Fixed normalization scales applied to policy observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationScales {
    /// Absolute longitudinal position of the observing ego vehicle.
    pub x: f64,
    /// Longitudinal offset of the other vehicle relative to the ego.
    pub rel_x: f64,
    /// Lateral positions and offsets.
    pub y: f64,
    pub speed: f64,
}

impl Default for ObservationScales {
    fn default() -> Self {
        Self {
            x: 500.0,
            rel_x: 100.0,
            y: 8.0,
            speed: 30.0,
        }
    }
}

/// `[x, y, vx, vy]` of the ego followed by the other vehicle's
/// `[dx, dy, dvx, dvy]` relative to the ego, each divided by its scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn new(ego: &VehicleState, other: &VehicleState, s: &ObservationScales) -> Self {
        Observation([
            ego.x / s.x,
            ego.y / s.y,
            ego.vx / s.speed,
            ego.vy / s.speed,
            (other.x - ego.x) / s.rel_x,
            (other.y - ego.y) / s.y,
            (other.vx - ego.vx) / s.speed,
            (other.vy - ego.vy) / s.speed,
        ])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

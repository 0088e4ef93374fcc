use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_VEHICLE_LENGTH: f64 = 5.0;
pub const DEFAULT_VEHICLE_WIDTH: f64 = 2.0;

/// Kinematic state of one vehicle.
///
/// `y` grows to the right; lane 0 is the leftmost lane and its centerline
/// sits at `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub heading: f64,
    pub lane_index: usize,
    pub target_lane: usize,
    pub length: f64,
    pub width: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, speed: f64, heading: f64, lane: usize) -> Self {
        Self {
            x,
            y,
            vx: speed * heading.cos(),
            vy: speed * heading.sin(),
            heading,
            lane_index: lane,
            target_lane: lane,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
        }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }
}

/// Wire form of a vehicle state inside a trace step.
#[derive(Serialize, Deserialize)]
struct StateRecord {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    heading: f64,
    lane: usize,
}

impl Serialize for VehicleState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateRecord {
            x: self.x,
            y: self.y,
            vx: self.vx,
            vy: self.vy,
            heading: self.heading,
            lane: self.lane_index,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VehicleState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = StateRecord::deserialize(d)?;
        Ok(VehicleState {
            x: r.x,
            y: r.y,
            vx: r.vx,
            vy: r.vy,
            heading: r.heading,
            lane_index: r.lane,
            target_lane: r.lane,
            length: DEFAULT_VEHICLE_LENGTH,
            width: DEFAULT_VEHICLE_WIDTH,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadConfig {
    pub lane_count: usize,
    pub lane_width: f64,
    pub road_length: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        Self {
            lane_count: 2,
            lane_width: 4.0,
            road_length: 10_000.0,
        }
    }
}

impl RoadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lane_count < 2 {
            return Err(Error::config("lane_count", "at least two lanes are required"));
        }
        if !(self.lane_width > 0.0) {
            return Err(Error::config("lane_width", "must be positive"));
        }
        if !(self.road_length > 0.0) {
            return Err(Error::config("road_length", "must be positive"));
        }
        Ok(())
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        lane as f64 * self.lane_width
    }

    /// Lane whose centerline is nearest to `y`.
    pub fn nearest_lane(&self, y: f64) -> usize {
        let raw = (y / self.lane_width).round();
        raw.clamp(0.0, (self.lane_count - 1) as f64) as usize
    }

    pub fn rightmost_lane(&self) -> usize {
        self.lane_count - 1
    }
}

/// Discrete high-level driving intention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MetaAction {
    LaneLeft = 0,
    Idle = 1,
    LaneRight = 2,
    Faster = 3,
    Slower = 4,
}

impl MetaAction {
    pub const COUNT: usize = 5;
    pub const ALL: [MetaAction; 5] = [
        MetaAction::LaneLeft,
        MetaAction::Idle,
        MetaAction::LaneRight,
        MetaAction::Faster,
        MetaAction::Slower,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or_else(|| Error::Contract(format!("action code {index} is outside 0..5")))
    }

    pub fn name(self) -> &'static str {
        match self {
            MetaAction::LaneLeft => "LANE_LEFT",
            MetaAction::Idle => "IDLE",
            MetaAction::LaneRight => "LANE_RIGHT",
            MetaAction::Faster => "FASTER",
            MetaAction::Slower => "SLOWER",
        }
    }
}

impl Serialize for MetaAction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for MetaAction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = u8::deserialize(d)?;
        MetaAction::from_index(code as usize).map_err(serde::de::Error::custom)
    }
}

/// Static initial conditions of the ego vehicle and the adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub x_ego: f64,
    pub x_adv: f64,
    pub l_ego: usize,
    pub l_adv: usize,
    pub tl_ego: usize,
    pub tl_adv: usize,
    pub h_ego: f64,
    pub h_adv: f64,
    pub s_ego: f64,
    pub s_adv: f64,
}

impl ScenarioConfig {
    /// Both vehicles centered in `lane`, heading straight, at `speed`.
    pub fn straight(x_ego: f64, x_adv: f64, lane_ego: usize, lane_adv: usize, speed: f64) -> Self {
        Self {
            x_ego,
            x_adv,
            l_ego: lane_ego,
            l_adv: lane_adv,
            tl_ego: lane_ego,
            tl_adv: lane_adv,
            h_ego: 0.0,
            h_adv: 0.0,
            s_ego: speed,
            s_adv: speed,
        }
    }
}

/// One recorded policy step. The actions are the ones that led to this
/// record; the first record of a trace carries `IDLE` for both vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub ego: VehicleState,
    pub adv: VehicleState,
    pub ego_action: MetaAction,
    pub adv_action: MetaAction,
    /// Mean longitudinal acceleration over the period ending at this record.
    pub a_ego: f64,
    pub a_adv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub config: ScenarioConfig,
    pub steps: Vec<StepRecord>,
    pub collided: bool,
    #[serde(rename = "T_c")]
    pub t_c: Option<usize>,
}

impl Trace {
    /// Number of policy steps taken (records minus the initial one).
    pub fn num_steps(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }

    /// Adversary actions in execution order, excluding the initial record.
    pub fn adversary_actions(&self) -> Vec<MetaAction> {
        self.steps.iter().skip(1).map(|s| s.adv_action).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Checks the structural invariants of a recorded trace.
    pub fn check(&self) -> Result<()> {
        for (i, w) in self.steps.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::Contract(format!(
                    "step indices not increasing at position {}",
                    i + 1
                )));
            }
        }
        match (self.collided, self.t_c) {
            (true, Some(tc)) => {
                let last = self.steps.last().map(|s| s.t);
                if last != Some(tc) {
                    return Err(Error::Contract(format!(
                        "collision step {tc} is not the last record ({last:?})"
                    )));
                }
            }
            (false, None) => {}
            _ => {
                return Err(Error::Contract(
                    "`collided` and `T_c` disagree".to_string(),
                ))
            }
        }
        Ok(())
    }
}

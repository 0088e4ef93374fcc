//! Deterministic two-lane highway simulation.
//!
//! Vehicles are driven by discrete meta-actions that move controller
//! set-points; kinematics are integrated at `substeps` per policy period
//! and collisions are checked after every substep.

mod dynamics;
mod geometry;
mod idm;
mod observation;
mod traffic;
mod types;

pub use dynamics::{SimParams, Vehicle};
pub use geometry::collision_check;
pub use idm::{idm_acceleration, IdmParams};
pub use observation::{Observation, ObservationScales, OBS_DIM};
pub use traffic::{BackgroundVehicle, TrafficConfig, TrafficSim, TrafficStep};
pub use types::{
    MetaAction, RoadConfig, ScenarioConfig, StepRecord, Trace, VehicleState,
    DEFAULT_VEHICLE_LENGTH, DEFAULT_VEHICLE_WIDTH,
};

use crate::error::{Error, Result};

/// Maximum episode length in policy steps.
pub const DEFAULT_T_MAX: usize = 40;

/// Maps an observation to an action code in `0..5`.
pub trait Policy {
    fn act(&mut self, obs: &Observation) -> usize;
}

impl<F: FnMut(&Observation) -> usize> Policy for F {
    fn act(&mut self, obs: &Observation) -> usize {
        self(obs)
    }
}

/// Always emits the same action.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPolicy(pub MetaAction);

impl Policy for ConstantPolicy {
    fn act(&mut self, _obs: &Observation) -> usize {
        self.0.index()
    }
}

/// Replays a recorded action sequence, then idles.
#[derive(Debug, Clone)]
pub struct ReplayPolicy {
    actions: Vec<MetaAction>,
    cursor: usize,
}

impl ReplayPolicy {
    pub fn new(actions: Vec<MetaAction>) -> Self {
        Self { actions, cursor: 0 }
    }
}

impl Policy for ReplayPolicy {
    fn act(&mut self, _obs: &Observation) -> usize {
        let a = self.actions.get(self.cursor).copied().unwrap_or(MetaAction::Idle);
        self.cursor += 1;
        a.index()
    }
}

/// A single ego-versus-adversary episode in progress.
#[derive(Debug, Clone)]
pub struct Simulator {
    road: RoadConfig,
    params: SimParams,
    ego: Vehicle,
    adv: Vehicle,
    trace: Trace,
    terminated: bool,
}

fn check_lane(field: &str, lane: usize, road: &RoadConfig) -> Result<()> {
    if lane >= road.lane_count {
        return Err(Error::config(
            field,
            format!("lane {lane} does not exist on a {}-lane road", road.lane_count),
        ));
    }
    Ok(())
}

fn check_range(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !v.is_finite() || v < lo || v > hi {
        return Err(Error::config(field, format!("{v} is outside [{lo}, {hi}]")));
    }
    Ok(())
}

impl Simulator {
    pub fn reset(config: &ScenarioConfig, road: RoadConfig, seed: u64) -> Result<Self> {
        Self::reset_with(config, road, SimParams::default(), seed)
    }

    pub fn reset_with(
        config: &ScenarioConfig,
        road: RoadConfig,
        params: SimParams,
        seed: u64,
    ) -> Result<Self> {
        road.validate()?;
        check_lane("l_ego", config.l_ego, &road)?;
        check_lane("l_adv", config.l_adv, &road)?;
        check_lane("tl_ego", config.tl_ego, &road)?;
        check_lane("tl_adv", config.tl_adv, &road)?;
        check_range("x_ego", config.x_ego, 0.0, road.road_length)?;
        check_range("x_adv", config.x_adv, 0.0, road.road_length)?;
        check_range("h_ego", config.h_ego, -params.max_heading, params.max_heading)?;
        check_range("h_adv", config.h_adv, -params.max_heading, params.max_heading)?;
        check_range("s_ego", config.s_ego, 0.0, params.max_target_speed)?;
        check_range("s_adv", config.s_adv, 0.0, params.max_target_speed)?;

        let ego = Vehicle::new(
            config.x_ego,
            config.l_ego,
            config.tl_ego,
            config.h_ego,
            config.s_ego,
            &road,
            &params,
        );
        let adv = Vehicle::new(
            config.x_adv,
            config.l_adv,
            config.tl_adv,
            config.h_adv,
            config.s_adv,
            &road,
            &params,
        );
        let first = StepRecord {
            t: 0,
            ego: ego.state,
            adv: adv.state,
            ego_action: MetaAction::Idle,
            adv_action: MetaAction::Idle,
            a_ego: 0.0,
            a_adv: 0.0,
        };
        let collided = collision_check(&ego.state, &adv.state);
        let trace = Trace {
            seed,
            config: *config,
            steps: vec![first],
            collided,
            t_c: collided.then_some(0),
        };
        Ok(Self {
            road,
            params,
            ego,
            adv,
            trace,
            terminated: collided,
        })
    }

    pub fn t(&self) -> usize {
        self.trace.steps.len() - 1
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn road(&self) -> &RoadConfig {
        &self.road
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego.state
    }

    pub fn adv(&self) -> &VehicleState {
        &self.adv.state
    }

    pub fn observation(&self) -> Observation {
        Observation::new(&self.ego.state, &self.adv.state, &self.params.obs_scales)
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Advances one policy period.
    pub fn step(&mut self, ego_action: MetaAction, adv_action: MetaAction) -> Result<StepRecord> {
        if self.terminated {
            return Err(Error::State(format!(
                "episode already terminated at step {}",
                self.t()
            )));
        }
        let p = self.params;
        self.ego.apply_action(ego_action, &self.road, &p);
        self.adv.apply_action(adv_action, &self.road, &p);

        let (v0_ego, v0_adv) = (self.ego.speed, self.adv.speed);
        let dt = p.dt();
        let mut elapsed = 0.0;
        let mut collided = false;
        for _ in 0..p.substeps {
            let a_ego = self.ego.tracking_accel(&p);
            let a_adv = self.adv.tracking_accel(&p);
            self.ego.integrate(a_ego, dt, &self.road, &p);
            self.adv.integrate(a_adv, dt, &self.road, &p);
            elapsed += dt;
            if collision_check(&self.ego.state, &self.adv.state) {
                collided = true;
                break;
            }
        }

        let t = self.t() + 1;
        let record = StepRecord {
            t,
            ego: self.ego.state,
            adv: self.adv.state,
            ego_action,
            adv_action,
            a_ego: (self.ego.speed - v0_ego) / elapsed,
            a_adv: (self.adv.speed - v0_adv) / elapsed,
        };
        self.trace.steps.push(record.clone());
        if collided {
            self.terminated = true;
            self.trace.collided = true;
            self.trace.t_c = Some(t);
        }
        Ok(record)
    }
}

/// Runs until collision or `t_max` steps and returns the full trace.
pub fn run_episode(
    mut sim: Simulator,
    ego_policy: &mut dyn Policy,
    adv_policy: &mut dyn Policy,
    t_max: usize,
) -> Result<Trace> {
    while !sim.is_terminated() && sim.t() < t_max {
        let obs = sim.observation();
        let ego = MetaAction::from_index(ego_policy.act(&obs))?;
        let adv = MetaAction::from_index(adv_policy.act(&obs))?;
        sim.step(ego, adv)?;
    }
    Ok(sim.into_trace())
}

//! Ego vehicle among IDM-controlled background traffic. Used only to train
//! the system under test; adversarial testing runs on [`super::Simulator`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::{SimParams, Vehicle};
use super::geometry::collision_check;
use super::idm::{idm_acceleration, IdmParams};
use super::observation::Observation;
use super::types::{MetaAction, RoadConfig, VehicleState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub vehicle_count: usize,
    pub idm: IdmParams,
    /// Background desired speeds are drawn from this interval.
    pub desired_speed: (f64, f64),
    /// Spawn offsets relative to the ego's longitudinal position.
    pub spawn_offset: (f64, f64),
    /// Minimum spawn distance between two vehicles sharing a lane.
    pub spawn_spacing: f64,
    pub ego_x: (f64, f64),
    pub ego_speed: f64,
}

impl TrafficConfig {
    /// One standard IDM vehicle.
    pub fn standard() -> Self {
        Self {
            vehicle_count: 1,
            idm: IdmParams::default(),
            desired_speed: (20.0, 25.0),
            spawn_offset: (15.0, 80.0),
            spawn_spacing: 15.0,
            ego_x: (247.0, 263.0),
            ego_speed: 25.0,
        }
    }

    /// Four defensive IDM vehicles.
    pub fn defensive() -> Self {
        Self {
            vehicle_count: 4,
            idm: IdmParams::defensive(),
            spawn_offset: (-30.0, 120.0),
            ..Self::standard()
        }
    }
}

#[derive(Debug, Clone)]
pub struct BackgroundVehicle {
    pub vehicle: Vehicle,
    pub idm: IdmParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficStep {
    pub collided: bool,
    pub ego: VehicleState,
}

#[derive(Debug, Clone)]
pub struct TrafficSim {
    road: RoadConfig,
    params: SimParams,
    ego: Vehicle,
    others: Vec<BackgroundVehicle>,
    t: usize,
    terminated: bool,
}

impl TrafficSim {
    pub fn new(
        ego: Vehicle,
        others: Vec<BackgroundVehicle>,
        road: RoadConfig,
        params: SimParams,
    ) -> Result<Self> {
        road.validate()?;
        if others.is_empty() {
            return Err(Error::config("vehicle_count", "at least one background vehicle"));
        }
        Ok(Self {
            road,
            params,
            ego,
            others,
            t: 0,
            terminated: false,
        })
    }

    /// Random initial traffic according to `cfg`.
    pub fn sample<R: Rng>(
        cfg: &TrafficConfig,
        road: RoadConfig,
        params: SimParams,
        rng: &mut R,
    ) -> Result<Self> {
        let ego_x = rng.gen_range(cfg.ego_x.0..=cfg.ego_x.1);
        let ego_lane = rng.gen_range(0..road.lane_count);
        let ego = Vehicle::new(ego_x, ego_lane, ego_lane, 0.0, cfg.ego_speed, &road, &params);
        let mut placed: Vec<(f64, usize)> = vec![(ego_x, ego_lane)];
        let mut others = Vec::with_capacity(cfg.vehicle_count);
        while others.len() < cfg.vehicle_count {
            let lane = rng.gen_range(0..road.lane_count);
            let x = ego_x + rng.gen_range(cfg.spawn_offset.0..=cfg.spawn_offset.1);
            let clash = placed
                .iter()
                .any(|&(px, pl)| pl == lane && (px - x).abs() < cfg.spawn_spacing);
            if clash {
                continue;
            }
            placed.push((x, lane));
            let desired = rng.gen_range(cfg.desired_speed.0..=cfg.desired_speed.1);
            let mut vehicle = Vehicle::new(x, lane, lane, 0.0, desired, &road, &params);
            vehicle.target_speed = desired;
            others.push(BackgroundVehicle {
                vehicle,
                idm: IdmParams {
                    desired_speed: desired,
                    ..cfg.idm
                },
            });
        }
        Self::new(ego, others, road, params)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego.state
    }

    pub fn road(&self) -> &RoadConfig {
        &self.road
    }

    pub fn background(&self) -> &[BackgroundVehicle] {
        &self.others
    }

    /// Ego plus the nearest background vehicle.
    pub fn observation(&self) -> Observation {
        let ego = &self.ego.state;
        let nearest = self
            .others
            .iter()
            .map(|o| &o.vehicle.state)
            .min_by(|a, b| {
                let da = (a.x - ego.x).hypot(a.y - ego.y);
                let db = (b.x - ego.x).hypot(b.y - ego.y);
                da.total_cmp(&db)
            })
            .expect("traffic has at least one background vehicle");
        Observation::new(ego, nearest, &self.params.obs_scales)
    }

    /// Nearest vehicle ahead of background vehicle `i` in its lane,
    /// the ego included.
    fn leader_of(&self, i: usize) -> Option<VehicleState> {
        let me = &self.others[i].vehicle.state;
        self.others
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| o.vehicle.state)
            .chain(std::iter::once(self.ego.state))
            .filter(|s| s.lane_index == me.lane_index && s.x > me.x)
            .min_by(|a, b| a.x.total_cmp(&b.x))
    }

    pub fn step(&mut self, ego_action: MetaAction) -> Result<TrafficStep> {
        if self.terminated {
            return Err(Error::State("traffic episode already terminated".into()));
        }
        let p = self.params;
        self.ego.apply_action(ego_action, &self.road, &p);
        let dt = p.dt();
        let mut collided = false;
        for _ in 0..p.substeps {
            let accels: Vec<f64> = (0..self.others.len())
                .map(|i| {
                    let me = &self.others[i];
                    let leader = self.leader_of(i);
                    idm_acceleration(&me.vehicle.state, leader.as_ref(), &me.idm)
                        .clamp(-p.max_accel, p.max_accel)
                })
                .collect();
            let a_ego = self.ego.tracking_accel(&p);
            self.ego.integrate(a_ego, dt, &self.road, &p);
            for (o, a) in self.others.iter_mut().zip(accels) {
                o.vehicle.integrate(a, dt, &self.road, &p);
            }
            if self
                .others
                .iter()
                .any(|o| collision_check(&self.ego.state, &o.vehicle.state))
            {
                collided = true;
                break;
            }
        }
        self.t += 1;
        self.terminated = collided;
        Ok(TrafficStep {
            collided,
            ego: self.ego.state,
        })
    }
}

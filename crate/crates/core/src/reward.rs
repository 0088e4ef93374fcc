//! Validity-aware adversarial reward and the search fitness built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RoadConfig, SimParams, StepRecord, Trace};
use crate::validity::{
    classify_failure, current_distance, required_safe_distance, Classification, Label,
    SafeDistanceParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub valid_bonus: f64,
    pub invalid_divisor: f64,
    pub t_max: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            valid_bonus: 30.0,
            invalid_divisor: 5.0,
            t_max: crate::sim::DEFAULT_T_MAX,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.valid_bonus > 0.0) {
            return Err(Error::config("valid_bonus", "must be positive"));
        }
        if !(self.invalid_divisor > 0.0) {
            return Err(Error::config("invalid_divisor", "must be positive"));
        }
        if self.t_max == 0 {
            return Err(Error::config("t_max", "must be positive"));
        }
        Ok(())
    }
}

/// Road, dynamics, monitor and reward settings shared by every
/// ego-versus-adversary episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub road: RoadConfig,
    pub sim: SimParams,
    pub safe: SafeDistanceParams,
    pub reward: RewardConfig,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.road.validate()?;
        self.safe.validate(&self.road)?;
        self.reward.validate()
    }

    pub fn t_max(&self) -> usize {
        self.reward.t_max
    }
}

/// How a collision is rewarded at the end of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardMode {
    /// Bonus only for valid failures, distance penalty for invalid ones.
    ValidityAware,
    /// Bonus for every collision regardless of its label.
    AnyCollision,
}

/// Fraction of the safe distance already consumed: `0` at or beyond the
/// safe distance, `1` at contact.
pub fn collision_likelihood(d_c: f64, d_safe: f64) -> Result<f64> {
    if !(d_safe > 0.0) {
        return Err(Error::Contract(format!("safe distance must be positive, got {d_safe}")));
    }
    Ok(if d_c < d_safe {
        (d_safe - d_c) / d_safe
    } else {
        0.0
    })
}

/// Shaping term of one recorded step.
pub fn step_shaping(record: &StepRecord, p: &SafeDistanceParams) -> f64 {
    let d_c = current_distance(&record.ego, &record.adv);
    let d_safe = required_safe_distance(&record.ego, &record.adv, p);
    collision_likelihood(d_c, d_safe).expect("safe distances are bounded below by a positive margin")
}

pub fn terminal_bonus(
    cls: &Classification,
    trace: &Trace,
    p: &SafeDistanceParams,
    rc: &RewardConfig,
) -> Result<f64> {
    match cls.label {
        Label::NoCollision => Ok(0.0),
        Label::Valid => Ok(rc.valid_bonus),
        Label::Invalid => {
            let t_m = cls
                .t_m
                .ok_or_else(|| Error::Contract("invalid classification without onset step".into()))?;
            let rec = trace
                .steps
                .iter()
                .find(|s| s.t == t_m)
                .ok_or_else(|| Error::Contract(format!("onset step {t_m} not in trace")))?;
            let d_safe = required_safe_distance(&rec.ego, &rec.adv, p);
            let d_c = current_distance(&rec.ego, &rec.adv);
            Ok(-(d_safe - d_c).max(0.0) / rc.invalid_divisor)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub shaping_sum: f64,
    pub terminal: f64,
    pub total: f64,
}

pub fn reward_breakdown(
    trace: &Trace,
    p: &SafeDistanceParams,
    rc: &RewardConfig,
    mode: RewardMode,
) -> RewardBreakdown {
    let shaping_sum: f64 = trace.steps.iter().skip(1).map(|s| step_shaping(s, p)).sum();
    let terminal = match mode {
        RewardMode::ValidityAware => {
            let cls = classify_failure(trace, p);
            terminal_bonus(&cls, trace, p, rc).expect("classifier always reports an onset step")
        }
        RewardMode::AnyCollision if trace.collided => rc.valid_bonus,
        RewardMode::AnyCollision => 0.0,
    };
    RewardBreakdown {
        shaping_sum,
        terminal,
        total: shaping_sum + terminal,
    }
}

/// Shaping summed over every policy step (the initial record excluded) plus
/// the validity-aware terminal bonus.
pub fn episode_reward(trace: &Trace, p: &SafeDistanceParams, rc: &RewardConfig) -> f64 {
    reward_breakdown(trace, p, rc, RewardMode::ValidityAware).total
}

/// Negated episode reward; lower is better.
pub fn fitness(trace: &Trace, p: &SafeDistanceParams, rc: &RewardConfig) -> f64 {
    -episode_reward(trace, p, rc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{MetaAction, ScenarioConfig, VehicleState};
    use crate::validity::Rule;
    use proptest::prelude::*;

    #[test]
    fn likelihood_examples() {
        assert_eq!(collision_likelihood(10.0, 10.0).unwrap(), 0.0);
        assert_eq!(collision_likelihood(0.0, 10.0).unwrap(), 1.0);
        assert!((collision_likelihood(5.0, 10.0).unwrap() - 0.5).abs() < 1e-12);
        assert!(collision_likelihood(1.0, 0.0).is_err());
    }

    fn rec(t: usize, gap: f64) -> StepRecord {
        StepRecord {
            t,
            ego: VehicleState::new(0.0, 0.0, 25.0, 0.0, 0),
            adv: VehicleState::new(gap, 0.0, 25.0, 0.0, 0),
            ego_action: MetaAction::Idle,
            adv_action: MetaAction::Idle,
            a_ego: 0.0,
            a_adv: 0.0,
        }
    }

    fn trace(gaps: &[f64], collided: bool) -> Trace {
        let steps: Vec<StepRecord> = gaps.iter().enumerate().map(|(t, &g)| rec(t, g)).collect();
        Trace {
            seed: 0,
            config: ScenarioConfig::straight(0.0, 10.0, 0, 0, 25.0),
            t_c: collided.then(|| steps.len() - 1),
            steps,
            collided,
        }
    }

    #[test]
    fn terminal_bonus_cases() {
        let p = SafeDistanceParams::default();
        let rc = RewardConfig::default();
        // Equal speeds in lane: d_safe = 10; gap 4 at the onset step.
        let t = trace(&[40.0, 4.0, 1.0], true);
        let valid = Classification::VALID;
        assert_eq!(terminal_bonus(&valid, &t, &p, &rc).unwrap(), 30.0);
        let invalid = Classification {
            label: Label::Invalid,
            violated_rule: Some(Rule::UnsafeBrake),
            t_m: Some(1),
        };
        assert!((terminal_bonus(&invalid, &t, &p, &rc).unwrap() - (-1.2)).abs() < 1e-12);
        assert_eq!(
            terminal_bonus(&Classification::NO_COLLISION, &t, &p, &rc).unwrap(),
            0.0
        );
        let broken = Classification { t_m: None, ..invalid };
        assert!(terminal_bonus(&broken, &t, &p, &rc).is_err());
    }

    #[test]
    fn zero_shaping_without_collision() {
        let p = SafeDistanceParams::default();
        let t = trace(&[5.0, 30.0, 12.0], false);
        assert_eq!(episode_reward(&t, &p, &RewardConfig::default()), 0.0);
        assert_eq!(fitness(&t, &p, &RewardConfig::default()), 0.0);
    }

    #[test]
    fn valid_collision_sums_components() {
        let p = SafeDistanceParams::default();
        // Gaps 8, 5 and 0 against d_safe = 10 give shaping 0.2, 0.5, 1.0.
        let t = trace(&[40.0, 8.0, 5.0, 0.0], true);
        assert_eq!(classify_failure(&t, &p).label, Label::Valid);
        let r = reward_breakdown(&t, &p, &RewardConfig::default(), RewardMode::ValidityAware);
        assert!((r.shaping_sum - 1.7).abs() < 1e-12);
        assert!((r.total - 31.7).abs() < 1e-12);
        assert!((fitness(&t, &p, &RewardConfig::default()) + 31.7).abs() < 1e-12);
    }

    #[test]
    fn minimizer_ranking() {
        let mut f = vec![0.0, -5.0, -31.7];
        f.sort_by(f64::total_cmp);
        assert_eq!(f[0], -31.7);
    }

    proptest! {
        #[test]
        fn likelihood_bounded_and_monotone(a in 0.0..100.0f64, b in 0.0..100.0f64, d_safe in 0.1..80.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let l_lo = collision_likelihood(lo, d_safe).unwrap();
            let l_hi = collision_likelihood(hi, d_safe).unwrap();
            prop_assert!((0.0..=1.0).contains(&l_lo));
            prop_assert!(l_hi <= l_lo);
        }

        #[test]
        fn reward_bounded(gaps in proptest::collection::vec(0.0..60.0f64, 1..=41), collided in any::<bool>()) {
            let p = SafeDistanceParams::default();
            let rc = RewardConfig::default();
            let t = trace(&gaps, collided);
            let r = episode_reward(&t, &p, &rc);
            prop_assert!(r <= rc.t_max as f64 + rc.valid_bonus);
            prop_assert_eq!(fitness(&t, &p, &rc), -r);
        }
    }
}

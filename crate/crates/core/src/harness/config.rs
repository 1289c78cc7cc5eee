//! Training configuration and its `key = value` text form.
//!
//! ```text
//! # comments and blank lines are ignored
//! lr = 0.0005
//! epsilon.decay_steps = 300000
//! scenario.idm.v0 = 33.33
//! reward.decision.w1 = -0.05
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{AdjustRewardParams, AgentConfig, DecisionRewardParams};
use crate::error::{Error, Result};
use crate::motion::PurePursuitConfig;
use crate::sim::ScenarioConfig;
use crate::value::{EpsilonSchedule, DEFAULT_BOUND_PENALTY, DEFAULT_GAMMA, DEFAULT_TARGET_SYNC};

/// Hard cap on episode length (control steps).
pub const MAX_EPISODE_STEPS: u32 = 600;

/// Agent settings that are not reward weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentTuning {
    pub decision_interval: u32,
    pub adjust_timeout: u32,
    pub align_distance: f64,
    pub align_speed: f64,
    pub execution_time: f64,
    pub pursuit: PurePursuitConfig,
}

impl Default for AgentTuning {
    fn default() -> Self {
        let a = AgentConfig::default();
        Self {
            decision_interval: a.decision_interval,
            adjust_timeout: a.adjust_timeout,
            align_distance: a.align_distance,
            align_speed: a.align_speed,
            execution_time: a.execution_time,
            pursuit: a.pursuit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub decision: DecisionRewardParams,
    pub following: AdjustRewardParams,
    pub gap: AdjustRewardParams,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            decision: DecisionRewardParams::default(),
            following: AdjustRewardParams::CAR_FOLLOWING,
            gap: AdjustRewardParams::GAP_ALIGNMENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Decision-layer ε-greedy schedule.
    pub epsilon: EpsilonSchedule,
    /// Standard deviation of the Gaussian action noise used by the adjustment modules (m/s²).
    pub noise: EpsilonSchedule,
    pub gamma: f64,
    /// Weight of the penalty keeping the quadratic models' `B(s)` inside the action bounds.
    pub bound_penalty: f64,
    pub target_sync_interval: u64,
    pub total_steps: u64,
    pub seed: u64,
    pub max_episode_steps: u32,
    pub eval_episodes: usize,
    pub scenario: ScenarioConfig,
    pub agent: AgentTuning,
    pub reward: RewardConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            buffer_capacity: 5000,
            batch_size: 64,
            epsilon: EpsilonSchedule::default(),
            noise: EpsilonSchedule {
                eps_start: 1.0,
                eps_end: 0.05,
                decay_steps: 300_000,
            },
            gamma: DEFAULT_GAMMA,
            bound_penalty: DEFAULT_BOUND_PENALTY,
            target_sync_interval: DEFAULT_TARGET_SYNC,
            total_steps: 100_000,
            seed: 0,
            max_episode_steps: MAX_EPISODE_STEPS,
            eval_episodes: 100,
            scenario: ScenarioConfig::default(),
            agent: AgentTuning::default(),
            reward: RewardConfig::default(),
        }
    }
}

trait ConfigValue: Sized {
    fn parse_value(raw: &str) -> std::result::Result<Self, String>;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(raw: &str) -> std::result::Result<Self, String> {
                <$t as FromStr>::from_str(raw).map_err(|e| e.to_string())
            }
        }
    )*};
}
from_str_value!(u32, u64, usize, bool);

impl ConfigValue for f64 {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        let v = raw.parse::<f64>().map_err(|e| e.to_string())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err("value must be finite".into())
        }
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+),* $(,)?) => {
        /// Every addressable key, in file order.
        pub const CONFIG_KEYS: &[&str] = &[$($key),*];

        fn set_key(cfg: &mut TrainConfig, key: &str, raw: &str) -> std::result::Result<(), String> {
            match key {
                $($key => cfg.$($field).+ = ConfigValue::parse_value(raw)?,)*
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        }

        fn get_key(cfg: &TrainConfig, key: &str) -> Option<String> {
            match key {
                $($key => Some(cfg.$($field).+.to_string()),)*
                _ => None,
            }
        }
    };
}

config_keys! {
    "lr" => lr,
    "buffer_capacity" => buffer_capacity,
    "batch_size" => batch_size,
    "gamma" => gamma,
    "bound_penalty" => bound_penalty,
    "target_sync_interval" => target_sync_interval,
    "total_steps" => total_steps,
    "seed" => seed,
    "max_episode_steps" => max_episode_steps,
    "eval_episodes" => eval_episodes,
    "epsilon.start" => epsilon.eps_start,
    "epsilon.end" => epsilon.eps_end,
    "epsilon.decay_steps" => epsilon.decay_steps,
    "noise.start" => noise.eps_start,
    "noise.end" => noise.eps_end,
    "noise.decay_steps" => noise.decay_steps,
    "scenario.lane_count" => scenario.geometry.lane_count,
    "scenario.lane_width" => scenario.geometry.lane_width,
    "scenario.segment_length" => scenario.geometry.segment_length,
    "scenario.dt" => scenario.dt,
    "scenario.ego_lane" => scenario.ego_lane,
    "scenario.target_lane" => scenario.target_lane,
    "scenario.speed_min" => scenario.speed_min,
    "scenario.speed_max" => scenario.speed_max,
    "scenario.spawn_delay_min" => scenario.spawn_delay_min,
    "scenario.spawn_delay_max" => scenario.spawn_delay_max,
    "scenario.with_target_vehicles" => scenario.with_target_vehicles,
    "scenario.follower_gap_min" => scenario.follower_gap_min,
    "scenario.follower_gap_max" => scenario.follower_gap_max,
    "scenario.target_gap_min" => scenario.target_gap_min,
    "scenario.target_gap_max" => scenario.target_gap_max,
    "scenario.ambient_per_lane" => scenario.ambient_per_lane,
    "scenario.ambient_gap_min" => scenario.ambient_gap_min,
    "scenario.ambient_gap_max" => scenario.ambient_gap_max,
    "scenario.vehicle_length" => scenario.vehicle_length,
    "scenario.vehicle_width" => scenario.vehicle_width,
    "scenario.idm.v0" => scenario.idm.v0,
    "scenario.idm.time_headway" => scenario.idm.time_headway,
    "scenario.idm.a_max" => scenario.idm.a_max,
    "scenario.idm.b_comf" => scenario.idm.b_comf,
    "scenario.idm.delta" => scenario.idm.delta,
    "scenario.idm.s0" => scenario.idm.s0,
    "scenario.idm.b_hard" => scenario.idm.b_hard,
    "scenario.ego.wheelbase" => scenario.ego_limits.wheelbase,
    "scenario.ego.max_accel" => scenario.ego_limits.max_accel,
    "scenario.ego.steer_limit" => scenario.ego_limits.steer_limit,
    "agent.decision_interval" => agent.decision_interval,
    "agent.adjust_timeout" => agent.adjust_timeout,
    "agent.align_distance" => agent.align_distance,
    "agent.align_speed" => agent.align_speed,
    "agent.execution_time" => agent.execution_time,
    "agent.pursuit.wheelbase" => agent.pursuit.wheelbase,
    "agent.pursuit.lookahead_gain" => agent.pursuit.lookahead_gain,
    "agent.pursuit.lookahead_min" => agent.pursuit.lookahead_min,
    "agent.pursuit.steer_limit" => agent.pursuit.steer_limit,
    "agent.pursuit.sample_step" => agent.pursuit.sample_step,
    "agent.pursuit.speed_gain" => agent.pursuit.speed_gain,
    "reward.decision.w1" => reward.decision.w1,
    "reward.decision.w2" => reward.decision.w2,
    "reward.decision.w3" => reward.decision.w3,
    "reward.decision.w4" => reward.decision.w4,
    "reward.decision.tau" => reward.decision.tau,
    "reward.decision.d0" => reward.decision.d0,
    "reward.decision.dt_safe" => reward.decision.dt_safe,
    "reward.decision.a_cap" => reward.decision.a_cap,
    "reward.decision.t_lc" => reward.decision.t_lc,
    "reward.decision.collision_penalty" => reward.decision.collision_penalty,
    "reward.following.w_dis" => reward.following.w_dis,
    "reward.following.w_dv" => reward.following.w_dv,
    "reward.following.w_accel" => reward.following.w_accel,
    "reward.gap.w_dis" => reward.gap.w_dis,
    "reward.gap.w_dv" => reward.gap.w_dv,
    "reward.gap.w_accel" => reward.gap.w_accel,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 || self.target_sync_interval == 0 {
            return Err(Error::Config("buffer_capacity, batch_size and target_sync_interval must be positive".into()));
        }
        if self.batch_size > self.buffer_capacity {
            return Err(Error::Config(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.bound_penalty >= 0.0 && self.bound_penalty.is_finite()) {
            return Err(Error::Config(format!("bound_penalty must be finite and non-negative, got {}", self.bound_penalty)));
        }
        if !(1..=MAX_EPISODE_STEPS).contains(&self.max_episode_steps) {
            return Err(Error::Config(format!(
                "max_episode_steps must lie in 1..={MAX_EPISODE_STEPS}, got {}",
                self.max_episode_steps
            )));
        }
        self.epsilon.validate()?;
        EpsilonSchedule::noise(self.noise.eps_start, self.noise.eps_end, self.noise.decay_steps)?;
        self.scenario.validate()?;
        self.agent_config().validate()
    }

    /// Agent settings for full hierarchical episodes.
    pub fn agent_config(&self) -> AgentConfig {
        let t = &self.agent;
        AgentConfig {
            decision_interval: t.decision_interval,
            adjust_timeout: t.adjust_timeout,
            align_distance: t.align_distance,
            align_speed: t.align_speed,
            target_lane: self.scenario.target_lane,
            execution_time: t.execution_time,
            decision: self.reward.decision,
            following: self.reward.following,
            gap: self.reward.gap,
            pursuit: t.pursuit,
            scripted_decision: None,
            execution_enabled: true,
        }
    }

    /// Applies `key = value` lines on top of `self`, then validates.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, found {line:?}", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            set_key(&mut self, key, value).map_err(|e| Error::Config(format!("line {}: {key}: {e}", n + 1)))?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::default().apply_text(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one dotted key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        set_key(self, key, value).map_err(|e| Error::Config(format!("{key}: {e}")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        get_key(self, key)
    }

    /// Every key with its current value; parses back to an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in CONFIG_KEYS {
            writeln!(s, "{key} = {}", get_key(self, key).expect("listed key")).unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::epsilon_at;
    use proptest::prelude::*;

    #[test]
    fn defaults_carry_the_published_hyperparameters() {
        let c = TrainConfig::default();
        assert_eq!(c.lr, 0.0005);
        assert_eq!(c.buffer_capacity, 5000);
        assert_eq!(c.batch_size, 64);
        assert_eq!(epsilon_at(&c.epsilon, 0), 1.0);
        assert_eq!(epsilon_at(&c.epsilon, 300_000), 0.1);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let c = TrainConfig::default();
        assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(TrainConfig::parse("").unwrap(), c);
    }

    #[test]
    fn overrides_apply() {
        let c = TrainConfig::parse("lr = 0.001 # faster\n\nscenario.idm.v0=30\nreward.gap.w_dv = 0.3\n").unwrap();
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.scenario.idm.v0, 30.0);
        assert_eq!(c.reward.gap.w_dv, 0.3);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "nonsense",
            "lr = fast",
            "unknown.key = 1",
            "batch_size = 0",
            "batch_size = 6000",
            "gamma = 1",
            "lr = inf",
            "max_episode_steps = 601",
            "scenario.target_lane = 0",
            "reward.decision.tau = 0",
        ] {
            assert!(matches!(TrainConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn every_key_is_readable() {
        let c = TrainConfig::default();
        for key in CONFIG_KEYS {
            assert!(c.get(key).is_some(), "{key}");
        }
        let mut keys = CONFIG_KEYS.to_vec();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), CONFIG_KEYS.len());
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = TrainConfig::load(Path::new("/nonexistent/lanehrl.conf")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/lanehrl.conf"));
    }

    proptest! {
        #[test]
        fn float_values_round_trip(lr in 1e-8f64..1.0, v0 in 1.0f64..60.0, w in -10.0f64..-1e-6) {
            let mut c = TrainConfig { lr, ..TrainConfig::default() };
            c.scenario.idm.v0 = v0;
            c.reward.decision.w3 = w;
            prop_assert_eq!(TrainConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}

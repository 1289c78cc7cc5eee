use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::idm::IdmParams;
use super::world::{EgoLimits, LaneGeometry, Role, Vehicle, WorldState, DEFAULT_DT, VEHICLE_LENGTH, VEHICLE_WIDTH};
use crate::error::{Error, Result};

pub const KMH: f64 = 1.0 / 3.6;

/// Speed, gap and distance for the fixed evaluation scenario.
pub const CANONICAL_LEADER_SPEED: f64 = 35.5;
pub const CANONICAL_EGO_SPEED: f64 = 17.0;
pub const CANONICAL_GAP: f64 = 68.0;

/// Everything needed to generate a randomized lane-change scene.
///
/// Target-lane placement is expressed as bumper gaps relative to the ego: the target follower's
/// front sits `follower_gap` behind the ego's rear bumper, and the target leader's rear sits
/// `target_gap` ahead of the follower's front bumper.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: LaneGeometry,
    pub dt: f64,
    pub ego_lane: usize,
    pub target_lane: usize,
    pub speed_min: f64,
    pub speed_max: f64,
    pub spawn_delay_min: f64,
    pub spawn_delay_max: f64,
    pub with_target_vehicles: bool,
    pub follower_gap_min: f64,
    pub follower_gap_max: f64,
    pub target_gap_min: f64,
    pub target_gap_max: f64,
    pub ambient_per_lane: usize,
    pub ambient_gap_min: f64,
    pub ambient_gap_max: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub idm: IdmParams,
    pub ego_limits: EgoLimits,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            geometry: LaneGeometry::default(),
            dt: DEFAULT_DT,
            ego_lane: 0,
            target_lane: 1,
            speed_min: 75.0 * KMH,
            speed_max: 136.0 * KMH,
            spawn_delay_min: 0.1,
            spawn_delay_max: 7.0,
            with_target_vehicles: true,
            follower_gap_min: -10.0,
            follower_gap_max: 30.0,
            target_gap_min: 15.0,
            target_gap_max: 80.0,
            ambient_per_lane: 0,
            ambient_gap_min: 30.0,
            ambient_gap_max: 80.0,
            vehicle_length: VEHICLE_LENGTH,
            vehicle_width: VEHICLE_WIDTH,
            idm: IdmParams::default(),
            ego_limits: EgoLimits::default(),
        }
    }
}

fn check_range(name: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Config(format!("{name}: empty or non-finite range [{lo}, {hi}]")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.idm.validate()?;
        let lanes = self.geometry.lane_count;
        if self.ego_lane >= lanes || self.target_lane >= lanes {
            return Err(Error::Config(format!(
                "ego_lane {} / target_lane {} out of range for {lanes} lanes",
                self.ego_lane, self.target_lane
            )));
        }
        if self.ego_lane.abs_diff(self.target_lane) != 1 {
            return Err(Error::Config("target_lane must be adjacent to ego_lane".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return Err(Error::Config("vehicle dimensions must be positive".into()));
        }
        if !(self.speed_min >= 0.0) {
            return Err(Error::Config("speed_min must be non-negative".into()));
        }
        check_range("speed", self.speed_min, self.speed_max)?;
        check_range("spawn_delay", self.spawn_delay_min, self.spawn_delay_max)?;
        check_range("follower_gap", self.follower_gap_min, self.follower_gap_max)?;
        check_range("target_gap", self.target_gap_min, self.target_gap_max)?;
        check_range("ambient_gap", self.ambient_gap_min, self.ambient_gap_max)?;
        if !(self.spawn_delay_min > 0.0) || !(self.target_gap_min > 0.0) || !(self.ambient_gap_min > 0.0) {
            return Err(Error::Config("spawn delay and spawn gaps must be positive".into()));
        }
        let e = &self.ego_limits;
        if !(e.wheelbase > 0.0 && e.max_accel > 0.0 && e.steer_limit > 0.0 && e.steer_limit < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Config("ego limits must be positive with steer_limit < pi/2".into()));
        }
        Ok(())
    }

    fn vehicle(&self, id: u32, role: Role, lane: usize, x: f64, v: f64) -> Vehicle {
        let mut veh = Vehicle::on_lane(id, role, &self.geometry, lane, x, v);
        veh.length = self.vehicle_length;
        veh.width = self.vehicle_width;
        veh
    }

    fn finish(&self, vehicles: Vec<Vehicle>, rng: ChaCha8Rng, spawn_delay: f64) -> WorldState {
        let mut w = WorldState::new(self.geometry, vehicles, self.dt, self.idm, rng);
        w.ego_limits = self.ego_limits;
        w.spawn_delay = spawn_delay;
        w
    }

    fn place_target_lane(&self, rng: &mut ChaCha8Rng, ego: &Vehicle, next_id: &mut u32, out: &mut Vec<Vehicle>) {
        let follower_gap = rng.random_range(self.follower_gap_min..=self.follower_gap_max);
        let follower_v = rng.random_range(self.speed_min..=self.speed_max);
        let target_gap = rng.random_range(self.target_gap_min..=self.target_gap_max);
        let leader_v = rng.random_range(self.speed_min..=self.speed_max);
        let follower_x = ego.rear() - follower_gap;
        let leader_x = follower_x + target_gap + self.vehicle_length;
        out.push(self.vehicle(*next_id, Role::TargetLeader, self.target_lane, leader_x, leader_v));
        out.push(self.vehicle(*next_id + 1, Role::TargetFollower, self.target_lane, follower_x, follower_v));
        *next_id += 2;
    }

    fn place_ambient(&self, rng: &mut ChaCha8Rng, next_id: &mut u32, out: &mut Vec<Vehicle>) {
        for lane in 0..self.geometry.lane_count {
            let mut front = out
                .iter()
                .filter(|v| v.lane == lane)
                .map(|v| v.x)
                .fold(f64::NEG_INFINITY, f64::max);
            if front == f64::NEG_INFINITY {
                front = 0.0;
            }
            for _ in 0..self.ambient_per_lane {
                let gap = rng.random_range(self.ambient_gap_min..=self.ambient_gap_max);
                let v = rng.random_range(self.speed_min..=self.speed_max);
                front += gap + self.vehicle_length;
                out.push(self.vehicle(*next_id, Role::Ambient, lane, front, v));
                *next_id += 1;
            }
        }
    }
}

/// Randomized scene: the leader enters the lane first, the ego follows `t_e ~ U(min, max)` later.
///
/// While the ego waits the leader holds its spawn speed, so the bumper gap between them at
/// the ego's entry is `v_leader * t_e`.
pub fn spawn_scenario(seed: u64, cfg: &ScenarioConfig) -> Result<WorldState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leader_v = rng.random_range(cfg.speed_min..=cfg.speed_max);
    let ego_v = rng.random_range(cfg.speed_min..=cfg.speed_max);
    let spawn_delay = rng.random_range(cfg.spawn_delay_min..=cfg.spawn_delay_max);

    let ego = cfg.vehicle(1, Role::Ego, cfg.ego_lane, cfg.vehicle_length, ego_v);
    let leader_rear = ego.x + leader_v * spawn_delay;
    let leader = cfg.vehicle(0, Role::Leader, cfg.ego_lane, leader_rear + cfg.vehicle_length, leader_v);

    let mut vehicles = vec![leader, ego];
    let mut next_id = 2;
    if cfg.with_target_vehicles {
        cfg.place_target_lane(&mut rng, &ego, &mut next_id, &mut vehicles);
    }
    cfg.place_ambient(&mut rng, &mut next_id, &mut vehicles);
    Ok(cfg.finish(vehicles, rng, spawn_delay))
}

/// The fixed evaluation scene: leader at 35.5 m/s, 68 m ahead of an ego at 17 m/s.
///
/// When target vehicles are enabled they sit at fixed offsets: follower 15 m behind the ego's
/// rear bumper and a 50 m gap, both at 30 m/s.
pub fn canonical_scenario(cfg: &ScenarioConfig) -> Result<WorldState> {
    cfg.validate()?;
    let ego = cfg.vehicle(1, Role::Ego, cfg.ego_lane, cfg.vehicle_length, CANONICAL_EGO_SPEED);
    let leader = cfg.vehicle(
        0,
        Role::Leader,
        cfg.ego_lane,
        ego.x + CANONICAL_GAP + cfg.vehicle_length,
        CANONICAL_LEADER_SPEED,
    );
    let mut vehicles = vec![leader, ego];
    if cfg.with_target_vehicles {
        let follower_x = ego.rear() - 15.0;
        let leader_x = follower_x + 50.0 + cfg.vehicle_length;
        vehicles.push(cfg.vehicle(2, Role::TargetLeader, cfg.target_lane, leader_x, 30.0));
        vehicles.push(cfg.vehicle(3, Role::TargetFollower, cfg.target_lane, follower_x, 30.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut next_id = vehicles.len() as u32;
    cfg.place_ambient(&mut rng, &mut next_id, &mut vehicles);
    Ok(cfg.finish(vehicles, rng, CANONICAL_GAP / CANONICAL_LEADER_SPEED))
}

/// A single-lane platoon of `n` IDM vehicles (no ego) with near-equilibrium random spacing.
pub fn spawn_platoon(seed: u64, n: usize, cfg: &ScenarioConfig) -> Result<WorldState> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::Config("platoon needs at least one vehicle".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vehicles = Vec::with_capacity(n);
    let mut x = 0.0;
    for id in 0..n as u32 {
        let v: f64 = rng.random_range(cfg.speed_min..=cfg.speed_max);
        vehicles.push(cfg.vehicle(id, Role::Ambient, cfg.ego_lane, x, v));
        // gap for the next vehicle back, scaled around its own time headway
        let headway = rng.random_range(0.8..1.5) * cfg.idm.time_headway;
        x -= cfg.vehicle_length + cfg.idm.s0 + cfg.speed_max * headway;
    }
    Ok(cfg.finish(vehicles, rng, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_world() {
        let cfg = ScenarioConfig::default();
        assert_eq!(spawn_scenario(42, &cfg).unwrap(), spawn_scenario(42, &cfg).unwrap());
        assert_ne!(spawn_scenario(42, &cfg).unwrap(), spawn_scenario(43, &cfg).unwrap());
    }

    #[test]
    fn speeds_within_configured_range() {
        let cfg = ScenarioConfig {
            ambient_per_lane: 3,
            ..Default::default()
        };
        for seed in 0..200 {
            let w = spawn_scenario(seed, &cfg).unwrap();
            for v in &w.vehicles {
                assert!(v.v >= 20.83 && v.v <= 37.78, "{v:?}");
            }
        }
    }

    #[test]
    fn leader_gap_is_integral_of_leader_speed() {
        let cfg = ScenarioConfig::default();
        for seed in 0..50 {
            let w = spawn_scenario(seed, &cfg).unwrap();
            let leader = w.by_role(Role::Leader).unwrap();
            let ego = w.ego().unwrap();
            assert!(w.spawn_delay >= 0.1 && w.spawn_delay <= 7.0);
            // trapezoidal quadrature of the leader's speed profile while the ego waits
            let n = 1000;
            let h = w.spawn_delay / n as f64;
            let speed = |_t: f64| leader.v;
            let integral: f64 = (0..n).map(|i| 0.5 * h * (speed(i as f64 * h) + speed((i + 1) as f64 * h))).sum();
            let gap = leader.rear() - ego.x;
            assert!((gap - integral).abs() < 1e-9, "seed {seed}: {gap} vs {integral}");
        }
    }

    #[test]
    fn degenerate_configs_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.geometry.lane_count = 0;
        assert!(matches!(spawn_scenario(1, &cfg), Err(Error::Config(_))));
        let cfg = ScenarioConfig {
            target_lane: 0,
            ..Default::default()
        };
        assert!(spawn_scenario(1, &cfg).is_err());
        let cfg = ScenarioConfig {
            speed_min: 40.0,
            speed_max: 30.0,
            ..Default::default()
        };
        assert!(spawn_scenario(1, &cfg).is_err());
        assert!(spawn_platoon(1, 0, &ScenarioConfig::default()).is_err());
    }

    #[test]
    fn canonical_scene_matches_reported_initial_condition() {
        let w = canonical_scenario(&ScenarioConfig::default()).unwrap();
        let leader = w.by_role(Role::Leader).unwrap();
        let ego = w.ego().unwrap();
        assert_eq!(leader.v, 35.5);
        assert_eq!(ego.v, 17.0);
        assert!((leader.rear() - ego.x - 68.0).abs() < 1e-12);
    }

    #[test]
    fn platoon_starts_with_positive_gaps() {
        let w = spawn_platoon(3, 20, &ScenarioConfig::default()).unwrap();
        assert_eq!(w.vehicles.len(), 20);
        for pair in w.vehicles.windows(2) {
            assert!(pair[0].rear() - pair[1].x > 0.0);
        }
    }
}

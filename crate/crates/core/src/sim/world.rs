use rand_chacha::ChaCha8Rng;

use super::collision::check_collision;
use super::idm::{idm_acceleration, IdmParams};
use crate::error::{Error, Result};
use crate::motion::bicycle_step;

pub const DEFAULT_DT: f64 = 0.1;
pub const VEHICLE_LENGTH: f64 = 5.0;
pub const VEHICLE_WIDTH: f64 = 1.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneGeometry {
    pub lane_count: usize,
    pub lane_width: f64,
    pub segment_length: f64,
}

impl Default for LaneGeometry {
    fn default() -> Self {
        Self {
            lane_count: 2,
            lane_width: 3.75,
            segment_length: 1000.0,
        }
    }
}

impl LaneGeometry {
    pub fn new(lane_count: usize, lane_width: f64, segment_length: f64) -> Result<Self> {
        let g = Self {
            lane_count,
            lane_width,
            segment_length,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lane_count < 2 {
            return Err(Error::Config(format!(
                "lane_count must be at least 2, got {}",
                self.lane_count
            )));
        }
        if !(self.lane_width > 0.0) || !(self.segment_length > 0.0) {
            return Err(Error::Config(format!(
                "lane_width and segment_length must be positive, got {} and {}",
                self.lane_width, self.segment_length
            )));
        }
        Ok(())
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width
    }

    /// Lane whose band contains `y`, saturated to the road edges.
    pub fn lane_at(&self, y: f64) -> usize {
        let k = (y / self.lane_width).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.lane_count - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Ego,
    Leader,
    TargetLeader,
    TargetFollower,
    Ambient,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Ego => "ego",
            Role::Leader => "leader",
            Role::TargetLeader => "target_leader",
            Role::TargetFollower => "target_follower",
            Role::Ambient => "ambient",
        }
    }
}

/// A vehicle on the segment. `x` is the front bumper, `y` the lateral centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub a: f64,
    pub length: f64,
    pub width: f64,
    pub lane: usize,
    pub role: Role,
}

impl Vehicle {
    /// Lane-bound vehicle centered on `lane`.
    pub fn on_lane(id: u32, role: Role, geometry: &LaneGeometry, lane: usize, x: f64, v: f64) -> Self {
        Self {
            id,
            x,
            y: geometry.lane_center(lane),
            heading: 0.0,
            v,
            a: 0.0,
            length: VEHICLE_LENGTH,
            width: VEHICLE_WIDTH,
            lane,
            role,
        }
    }

    /// Longitudinal position of the rear bumper.
    pub fn rear(&self) -> f64 {
        self.x - self.length * self.heading.cos()
    }

    fn occupies_lane(&self, geometry: &LaneGeometry, lane: usize) -> bool {
        let lo = lane as f64 * geometry.lane_width;
        let hi = lo + geometry.lane_width;
        self.y + 0.5 * self.width > lo && self.y - 0.5 * self.width < hi
    }
}

/// Actuator model of the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoLimits {
    pub wheelbase: f64,
    /// Saturation bound on |acceleration| (m/s²).
    pub max_accel: f64,
    /// Saturation bound on |steering angle| (rad).
    pub steer_limit: f64,
}

impl Default for EgoLimits {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            max_accel: 8.0,
            steer_limit: 0.6,
        }
    }
}

/// The whole simulated world. Cloning it snapshots the generator as well.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub geometry: LaneGeometry,
    pub vehicles: Vec<Vehicle>,
    /// Number of steps taken; simulation time is `step * dt`.
    pub step: u64,
    pub dt: f64,
    pub idm: IdmParams,
    pub ego_limits: EgoLimits,
    /// Delay between leader and ego spawn (s).
    pub spawn_delay: f64,
    pub(crate) rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(geometry: LaneGeometry, vehicles: Vec<Vehicle>, dt: f64, idm: IdmParams, rng: ChaCha8Rng) -> Self {
        Self {
            geometry,
            vehicles,
            step: 0,
            dt,
            idm,
            ego_limits: EgoLimits::default(),
            spawn_delay: 0.0,
            rng,
        }
    }

    pub fn t(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn ego(&self) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.role == Role::Ego)
    }

    pub fn by_role(&self, role: Role) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.role == role)
    }

    /// Nearest vehicle ahead of `idx` that overlaps its lane, with the bumper gap to it.
    pub fn leader_of(&self, idx: usize) -> Option<(usize, f64)> {
        let me = &self.vehicles[idx];
        self.vehicles
            .iter()
            .enumerate()
            .filter(|&(j, other)| j != idx && other.x > me.x && other.occupies_lane(&self.geometry, me.lane))
            .map(|(j, other)| (j, other.rear() - me.x))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Advance every vehicle by one `dt`. Ego inputs saturate at the actuator limits.
    pub fn step(&mut self, ego_accel: f64, ego_steer: f64) {
        let dt = self.dt;
        let accels: Vec<f64> = (0..self.vehicles.len())
            .map(|i| {
                let me = &self.vehicles[i];
                if me.role == Role::Ego {
                    return 0.0;
                }
                match self.leader_of(i) {
                    Some((j, gap)) => {
                        let lead_v = self.vehicles[j].v;
                        // overlap means a collision already happened; brake as hard as allowed
                        idm_acceleration(gap, me.v, lead_v, &self.idm).unwrap_or(-self.idm.b_hard)
                    }
                    None => idm_acceleration(f64::INFINITY, me.v, me.v, &self.idm).expect("free road"),
                }
            })
            .collect();

        let limits = self.ego_limits;
        for (veh, a) in self.vehicles.iter_mut().zip(accels) {
            if veh.role == Role::Ego {
                let accel = ego_accel.clamp(-limits.max_accel, limits.max_accel);
                let steer = ego_steer.clamp(-limits.steer_limit, limits.steer_limit);
                let (pose, v) = bicycle_step((veh.x, veh.y, veh.heading), veh.v, accel, steer, limits.wheelbase, dt);
                veh.x = pose.0;
                veh.y = pose.1;
                veh.heading = pose.2;
                veh.v = v;
                veh.a = accel;
                veh.lane = self.geometry.lane_at(veh.y);
            } else {
                advance_ballistic(veh, a, dt);
            }
        }

        let end = self.geometry.segment_length;
        self.vehicles.retain(|v| v.role == Role::Ego || v.rear() <= end);
        self.step += 1;
    }

    pub fn collided(&self) -> bool {
        check_collision(self)
    }
}

fn advance_ballistic(veh: &mut Vehicle, a: f64, dt: f64) {
    let v_next = veh.v + a * dt;
    if v_next < 0.0 {
        // stops inside the step
        veh.x += -veh.v * veh.v / (2.0 * a);
        veh.v = 0.0;
    } else {
        veh.x += veh.v * dt + 0.5 * a * dt * dt;
        veh.v = v_next;
    }
    veh.a = a;
}

/// Functional form of [`WorldState::step`].
pub fn step_world(w: &WorldState, ego_accel: f64, ego_steer: f64) -> WorldState {
    let mut next = w.clone();
    next.step(ego_accel, ego_steer);
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn world(vehicles: Vec<Vehicle>) -> WorldState {
        WorldState::new(
            LaneGeometry::default(),
            vehicles,
            DEFAULT_DT,
            IdmParams::default(),
            ChaCha8Rng::seed_from_u64(0),
        )
    }

    #[test]
    fn lane_centers() {
        let g = LaneGeometry::default();
        assert_eq!(g.lane_center(0), 1.875);
        assert_eq!(g.lane_center(1), 5.625);
        assert_eq!(g.lane_at(1.875), 0);
        assert_eq!(g.lane_at(5.0), 1);
        assert_eq!(g.lane_at(-1.0), 0);
        assert_eq!(g.lane_at(100.0), 1);
    }

    #[test]
    fn geometry_validation() {
        assert!(LaneGeometry::new(1, 3.75, 1000.0).is_err());
        assert!(LaneGeometry::new(0, 3.75, 1000.0).is_err());
        assert!(LaneGeometry::new(2, 0.0, 1000.0).is_err());
        assert!(LaneGeometry::new(2, 3.75, -5.0).is_err());
        assert!(LaneGeometry::new(3, 3.5, 500.0).is_ok());
    }

    #[test]
    fn ego_straight_line_kinematics() {
        let g = LaneGeometry::default();
        let mut w = world(vec![Vehicle::on_lane(0, Role::Ego, &g, 0, 10.0, 10.0)]);
        w.step(0.0, 0.0);
        let ego = w.ego().unwrap();
        assert!((ego.x - 11.0).abs() < 1e-12);
        assert_eq!(ego.y, g.lane_center(0));
        assert_eq!(w.step, 1);
        assert!((w.t() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_platoon_keeps_speeds() {
        let g = LaneGeometry::default();
        let idm = IdmParams::default();
        let v = 25.0;
        let gap = idm.equilibrium_gap(v);
        let mut vehicles = vec![Vehicle::on_lane(0, Role::Ego, &g, 0, 500.0, v)];
        let mut x = 500.0;
        for id in 1..5 {
            x -= VEHICLE_LENGTH + gap;
            vehicles.push(Vehicle::on_lane(id, Role::Ambient, &g, 0, x, v));
        }
        // a free vehicle cruising at v0 in the other lane
        vehicles.push(Vehicle::on_lane(9, Role::Ambient, &g, 1, 300.0, idm.v0));
        let mut w = world(vehicles);
        for _ in 0..10 {
            w.step(0.0, 0.0);
        }
        for veh in &w.vehicles {
            let expected = if veh.id == 9 { idm.v0 } else { v };
            assert!((veh.v - expected).abs() < 1e-9, "{veh:?}");
        }
    }

    #[test]
    fn vehicles_past_the_end_are_retired() {
        let g = LaneGeometry::default();
        let mut w = world(vec![
            Vehicle::on_lane(0, Role::Ego, &g, 0, 10.0, 10.0),
            Vehicle::on_lane(1, Role::Ambient, &g, 1, 1004.9, 30.0),
        ]);
        w.step(0.0, 0.0);
        assert_eq!(w.vehicles.len(), 1);
        assert!(w.vehicles.iter().all(|v| v.x <= g.segment_length + v.length || v.role == Role::Ego));
    }

    #[test]
    fn ego_inputs_saturate() {
        let g = LaneGeometry::default();
        let mut w = world(vec![Vehicle::on_lane(0, Role::Ego, &g, 0, 10.0, 10.0)]);
        w.step(100.0, 5.0);
        let ego = w.ego().unwrap();
        assert_eq!(ego.a, w.ego_limits.max_accel);
        let expected_heading = 10.0 / 2.7 * 0.6f64.tan() * 0.1;
        assert!((ego.heading - expected_heading).abs() < 1e-12);
    }

    #[test]
    fn ambient_vehicles_follow_the_ego_when_it_enters_their_lane() {
        let g = LaneGeometry::default();
        let mut ego = Vehicle::on_lane(0, Role::Ego, &g, 0, 100.0, 20.0);
        ego.y = g.lane_width; // straddling the lane boundary
        let w = world(vec![ego, Vehicle::on_lane(1, Role::TargetFollower, &g, 1, 80.0, 20.0)]);
        let (j, gap) = w.leader_of(1).unwrap();
        assert_eq!(w.vehicles[j].role, Role::Ego);
        assert!((gap - 15.0).abs() < 1e-12);
    }
}

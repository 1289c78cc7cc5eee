use std::f64::consts::PI;

use super::quintic::QuinticTrajectory;

/// Planar pose: position and heading.
pub type Pose = (f64, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurePursuitConfig {
    /// Wheelbase L (m).
    pub wheelbase: f64,
    /// Speed gain k in `l_d = max(l_min, k·v)` (s).
    pub lookahead_gain: f64,
    /// Minimum look-ahead distance (m).
    pub lookahead_min: f64,
    pub steer_limit: f64,
    /// Time step of the dense look-ahead search (s).
    pub sample_step: f64,
    /// Proportional gain of the speed correction added to the reference acceleration (1/s).
    pub speed_gain: f64,
}

impl Default for PurePursuitConfig {
    fn default() -> Self {
        Self {
            wheelbase: 2.7,
            lookahead_gain: 0.5,
            lookahead_min: 3.0,
            steer_limit: 0.6,
            sample_step: 0.01,
            speed_gain: 0.5,
        }
    }
}

impl PurePursuitConfig {
    pub fn lookahead(&self, v: f64) -> f64 {
        self.lookahead_min.max(self.lookahead_gain * v)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// First densely-sampled trajectory point at least `l_d` from the pose, searching forward from
/// the sample nearest the pose. Falls back to the trajectory endpoint.
pub fn find_lookahead_point(traj: &QuinticTrajectory, pose: Pose, l_d: f64, sample_step: f64) -> (f64, f64) {
    let points: Vec<(f64, f64)> = traj
        .sample_times(sample_step)
        .map(|t| {
            let s = traj.eval(t);
            (s.x, s.y)
        })
        .collect();
    let dist = |p: &(f64, f64)| (p.0 - pose.0).hypot(p.1 - pose.1);
    let nearest = points
        .iter()
        .enumerate()
        .min_by(|a, b| dist(a.1).total_cmp(&dist(b.1)))
        .map_or(0, |(i, _)| i);
    points[nearest..]
        .iter()
        .find(|p| dist(p) >= l_d)
        .copied()
        .unwrap_or(*points.last().expect("trajectory has samples"))
}

/// Steering angle `atan(2·L·sin α / l_d)` toward `waypoint`, clamped to the steering limit.
pub fn pure_pursuit_steering(pose: Pose, waypoint: (f64, f64), cfg: &PurePursuitConfig, l_d: f64) -> f64 {
    let bearing = (waypoint.1 - pose.1).atan2(waypoint.0 - pose.0);
    let alpha = wrap_angle(bearing - pose.2);
    let delta = (2.0 * cfg.wheelbase * alpha.sin() / l_d).atan();
    delta.clamp(-cfg.steer_limit, cfg.steer_limit)
}

/// Tracks a committed trajectory: Pure Pursuit laterally, reference acceleration plus
/// proportional speed correction longitudinally.
#[derive(Debug, Clone, Copy)]
pub struct PursuitController {
    pub cfg: PurePursuitConfig,
}

impl PursuitController {
    pub fn new(cfg: PurePursuitConfig) -> Self {
        Self { cfg }
    }

    /// `(accel, steer)` at time `t` on the trajectory's clock.
    pub fn control(&self, traj: &QuinticTrajectory, t: f64, pose: Pose, v: f64) -> (f64, f64) {
        let reference = traj.eval(t);
        let v_ref = reference.vx.hypot(reference.vy);
        let accel = reference.ax + self.cfg.speed_gain * (v_ref - v);
        let l_d = self.cfg.lookahead(v);
        let waypoint = find_lookahead_point(traj, pose, l_d, self.cfg.sample_step);
        (accel, pure_pursuit_steering(pose, waypoint, &self.cfg, l_d))
    }
}

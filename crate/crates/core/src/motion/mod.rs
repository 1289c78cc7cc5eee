//! Execution step: quintic reference trajectories, Pure Pursuit tracking, bicycle kinematics.

mod bicycle;
mod pursuit;
mod quintic;

pub use bicycle::bicycle_step;
pub use pursuit::{find_lookahead_point, pure_pursuit_steering, Pose, PurePursuitConfig, PursuitController};
pub use quintic::{
    plan_lane_change, solve_quintic, time_matrix, BoundaryState, QuinticTrajectory, TrajectorySample, MIN_HORIZON,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingPoint {
    pub t: f64,
    pub pose: Pose,
    pub v: f64,
    pub steer: f64,
    /// Centripetal acceleration `v²·tan(δ)/L` (m/s²).
    pub lateral_accel: f64,
}

/// Closed-loop run of [`PursuitController`] + [`bicycle_step`] over the whole trajectory window.
/// The returned trace includes the initial state and the state at `t_t`.
pub fn track_trajectory(traj: &QuinticTrajectory, start: Pose, v0: f64, cfg: &PurePursuitConfig, dt: f64) -> Vec<TrackingPoint> {
    let controller = PursuitController::new(*cfg);
    let steps = (traj.duration() / dt).round() as usize;
    let mut pose = start;
    let mut v = v0;
    let mut trace = Vec::with_capacity(steps + 1);
    for k in 0..steps {
        let t = traj.t_i + k as f64 * dt;
        let (accel, steer) = controller.control(traj, t, pose, v);
        trace.push(TrackingPoint {
            t,
            pose,
            v,
            steer,
            lateral_accel: v * v * steer.tan() / cfg.wheelbase,
        });
        (pose, v) = bicycle_step(pose, v, accel, steer, cfg.wheelbase, dt);
    }
    trace.push(TrackingPoint {
        t: traj.t_i + steps as f64 * dt,
        pose,
        v,
        steer: 0.0,
        lateral_accel: 0.0,
    });
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{LaneGeometry, Role, Vehicle};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tracking_closes_on_any_lane_change(v in 15.0f64..38.0, duration in 4.0f64..8.0, up in any::<bool>(), dy in -0.3f64..0.3) {
            let g = LaneGeometry { lane_count: 3, ..Default::default() };
            let mut ego = Vehicle::on_lane(1, Role::Ego, &g, 1, 50.0, v);
            ego.y += dy;
            let target = if up { 2 } else { 0 };
            let traj = plan_lane_change(&ego, target, duration, &g).unwrap();
            let cfg = PurePursuitConfig::default();
            let trace = track_trajectory(&traj, (ego.x, ego.y, ego.heading), ego.v, &cfg, 0.1);
            let end = trace.last().unwrap();
            prop_assert!((end.pose.1 - g.lane_center(target)).abs() < 0.15, "lateral error {}", end.pose.1 - g.lane_center(target));
            prop_assert!(end.pose.2.abs() < 2f64.to_radians(), "heading {}", end.pose.2);
            prop_assert!(trace.iter().all(|p| p.steer.abs() <= cfg.steer_limit));
        }
    }
}

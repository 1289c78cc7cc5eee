use super::world::{Role, Vehicle, WorldState};
use crate::error::{Error, Result};

/// Distance reported for a neighbor that is not on the road.
pub const MISSING_DISTANCE: f64 = 200.0;

pub const STATE_DIM: usize = 7;

/// Observation shared by the decision and adjustment layers.
///
/// Distances are bumper-to-bumper; relative speeds are `v_ego - v_other`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionState {
    pub dx_leader: f64,
    pub dx_target: f64,
    pub dx_follow: f64,
    pub dv_leader: f64,
    pub dv_target: f64,
    pub v_ego: f64,
    pub a_ego: f64,
}

// Fixed feature scales; keeps every network input O(1).
const FEATURE_SCALE: [f64; STATE_DIM] = [100.0, 100.0, 100.0, 10.0, 10.0, 30.0, 4.0];

impl DecisionState {
    pub fn as_array(&self) -> [f64; STATE_DIM] {
        [
            self.dx_leader,
            self.dx_target,
            self.dx_follow,
            self.dv_leader,
            self.dv_target,
            self.v_ego,
            self.a_ego,
        ]
    }

    /// Network input: each component divided by a fixed scale.
    pub fn features(&self) -> [f64; STATE_DIM] {
        let mut f = self.as_array();
        for (x, s) in f.iter_mut().zip(FEATURE_SCALE) {
            *x /= s;
        }
        f
    }

    /// Input for the continuous adjustment models: `features` with the previous acceleration
    /// zeroed. The actuator has no lag, so `a_ego` in the next state equals the action just
    /// taken; feeding it back lets the value head fit a linear-in-action term that the
    /// quadratic form can only absorb by flattening its curvature, and the policy latches.
    pub fn adjust_features(&self) -> [f64; STATE_DIM] {
        let mut f = self.features();
        f[STATE_DIM - 1] = 0.0;
        f
    }

    pub fn v_leader(&self) -> f64 {
        self.v_ego - self.dv_leader
    }

    pub fn v_target(&self) -> f64 {
        self.v_ego - self.dv_target
    }

    /// Clear distance between the target follower's front and the target leader's rear.
    pub fn target_gap(&self, ego_length: f64) -> f64 {
        self.dx_target + ego_length + self.dx_follow
    }
}

fn in_lane(w: &WorldState, role: Role, lane: usize) -> Option<&Vehicle> {
    w.vehicles.iter().find(|v| v.role == role && v.lane == lane)
}

pub fn observe_decision_state(w: &WorldState, target_lane: usize) -> Result<DecisionState> {
    let ego = w
        .ego()
        .ok_or_else(|| Error::Contract("observation requested for a world without an ego vehicle".into()))?;
    let ahead = |other: Option<&Vehicle>| match other {
        Some(o) => (o.rear() - ego.x, ego.v - o.v),
        None => (MISSING_DISTANCE, 0.0),
    };
    let (dx_leader, dv_leader) = ahead(w.by_role(Role::Leader));
    let (dx_target, dv_target) = ahead(in_lane(w, Role::TargetLeader, target_lane));
    let dx_follow = match in_lane(w, Role::TargetFollower, target_lane) {
        Some(f) => ego.rear() - f.x,
        None => MISSING_DISTANCE,
    };
    Ok(DecisionState {
        dx_leader,
        dx_target,
        dx_follow,
        dv_leader,
        dv_target,
        v_ego: ego.v,
        a_ego: ego.a,
    })
}

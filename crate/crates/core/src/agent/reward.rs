use crate::error::{Error, Result};
use crate::sim::DecisionState;

/// Decision-layer reward parameters. The weights are negative so every term is a penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRewardParams {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    /// Reaction time (s).
    pub tau: f64,
    /// Minimum distance (m).
    pub d0: f64,
    /// Safety threshold (m).
    pub dt_safe: f64,
    /// Maximum acceleration used by the stopping-distance term (m/s²).
    pub a_cap: f64,
    /// Total lane-change time (s).
    pub t_lc: f64,
    pub collision_penalty: f64,
}

impl Default for DecisionRewardParams {
    fn default() -> Self {
        Self {
            w1: -0.05,
            w2: -0.1,
            w3: -0.05,
            w4: -0.1,
            tau: 1.0,
            d0: 2.0,
            dt_safe: 2.0,
            a_cap: 3.0,
            t_lc: 5.0,
            collision_penalty: -100.0,
        }
    }
}

impl DecisionRewardParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("d0", self.d0),
            ("dt_safe", self.dt_safe),
            ("a_cap", self.a_cap),
            ("t_lc", self.t_lc),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("decision reward {name} must be positive, got {v}")));
        }
        if [self.w1, self.w2, self.w3, self.w4, self.collision_penalty].iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("decision reward weights must be finite".into()));
        }
        Ok(())
    }
}

/// Car-following or gap-alignment reward weights, applied with leading minus signs.
///
/// Each module has its own set; see [`AdjustRewardParams::CAR_FOLLOWING`] and
/// [`AdjustRewardParams::GAP_ALIGNMENT`]. Without the comfort cost the learned curvature
/// stays near zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustRewardParams {
    /// 1/m.
    pub w_dis: f64,
    /// s/m.
    pub w_dv: f64,
    /// Comfort cost on the commanded acceleration (s⁴/m²). Gives the quadratic value model a
    /// direct curvature signal in the action; 0 disables it.
    pub w_accel: f64,
}

impl AdjustRewardParams {
    /// The following-distance error reaches ~200 m at highway speed, so its weight is small
    /// enough that speed matching dominates.
    pub const CAR_FOLLOWING: Self = Self {
        w_dis: 0.001,
        w_dv: 0.2,
        w_accel: 0.2,
    };

    /// Gap offsets are tens of meters; positioning matters as much as speed.
    pub const GAP_ALIGNMENT: Self = Self {
        w_dis: 0.05,
        w_dv: 0.2,
        w_accel: 0.2,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.w_dis > 0.0 && self.w_dv > 0.0 && self.w_dis.is_finite() && self.w_dv.is_finite()) {
            return Err(Error::Config("adjustment reward weights must be positive".into()));
        }
        if !(self.w_accel >= 0.0 && self.w_accel.is_finite()) {
            return Err(Error::Config("adjustment w_accel must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Desired following distance: reaction distance + stopping distance + safety threshold.
pub fn desired_distance_ego(v_ego: f64, p: &DecisionRewardParams) -> f64 {
    v_ego * p.tau + v_ego * v_ego / (2.0 * p.a_cap) + p.dt_safe
}

/// Desired clear distance in the target lane for a lane change starting now.
pub fn desired_distance_target(v_ego: f64, v_target: f64, offset: f64, p: &DecisionRewardParams) -> f64 {
    v_ego * p.t_lc + offset + p.tau * (v_target - v_ego) + p.d0
}

/// Target-gap geometry seen by the decision layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapMeasurement {
    /// Clear distance between the target follower's front and the target leader's rear (m).
    pub d_gap: f64,
    pub d_target: f64,
    pub d_ego: f64,
}

impl GapMeasurement {
    /// Gap from one observation; `offset` for the target term is the bumper distance to the
    /// target leader.
    pub fn measure(s: &DecisionState, ego_length: f64, p: &DecisionRewardParams) -> Self {
        Self {
            d_gap: s.target_gap(ego_length).max(0.0),
            d_target: desired_distance_target(s.v_ego, s.v_target(), s.dx_target, p),
            d_ego: desired_distance_ego(s.v_ego, p),
        }
    }
}

pub fn decision_reward(s: &DecisionState, a_l: usize, gap: &GapMeasurement, collided: bool, p: &DecisionRewardParams) -> f64 {
    if collided {
        return p.collision_penalty;
    }
    if a_l == 0 {
        p.w1 * (gap.d_ego - s.dx_leader).abs() + p.w2 * s.dv_leader.abs()
    } else {
        p.w3 * (gap.d_target - gap.d_gap).max(0.0) + p.w4 * s.dv_target.abs()
    }
}

pub fn car_following_reward(x_leader: f64, x_ego: f64, v_leader: f64, v_ego: f64, d_ego: f64, p: &AdjustRewardParams) -> f64 {
    let r_dis = -p.w_dis * (x_leader - x_ego - d_ego).abs();
    let r_dv = -p.w_dv * (v_ego - v_leader).abs();
    r_dis + r_dv
}

/// `−w_accel·a²`, added to both adjustment rewards.
pub fn action_cost(accel: f64, p: &AdjustRewardParams) -> f64 {
    -p.w_accel * accel * accel
}

/// Aim for the midpoint between the target follower and the nearer front vehicle, at the
/// slower front speed.
pub fn gap_adjust_reward(s: &DecisionState, v_leader: f64, v_target: f64, p: &AdjustRewardParams) -> f64 {
    let r_dis = -p.w_dis * (s.dx_leader.min(s.dx_target) - s.dx_follow).abs();
    let r_dv = -p.w_dv * (s.v_ego - v_leader.min(v_target)).abs();
    r_dis + r_dv
}

//! Deterministic multi-lane highway: IDM traffic, scenario generation, observation, collisions.

mod collision;
mod idm;
mod observe;
mod scenario;
mod world;

pub use collision::{check_collision, Footprint};
pub use idm::{idm_acceleration, IdmParams};
pub use observe::{observe_decision_state, DecisionState, MISSING_DISTANCE, STATE_DIM};
pub use scenario::{
    canonical_scenario, spawn_platoon, spawn_scenario, ScenarioConfig, CANONICAL_EGO_SPEED, CANONICAL_GAP,
    CANONICAL_LEADER_SPEED, KMH,
};
pub use world::{
    step_world, EgoLimits, LaneGeometry, Role, Vehicle, WorldState, DEFAULT_DT, VEHICLE_LENGTH, VEHICLE_WIDTH,
};

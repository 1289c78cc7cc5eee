//! Hierarchical lane-change agent: decision layer, adjustment modules, execution handoff.

mod hierarchy;
mod reward;

pub use hierarchy::{
    hierarchical_step, is_aligned, legal_transition, AgentConfig, AgentModels, AgentPhase, Emitted, Exploration,
    HierarchicalAgent, StepDecision, StepFeedback, CHANGE, STAY,
};
pub use reward::{
    action_cost, car_following_reward, decision_reward, desired_distance_ego, desired_distance_target, gap_adjust_reward,
    AdjustRewardParams, DecisionRewardParams, GapMeasurement,
};

use rand::Rng;

use super::reward::{
    action_cost, car_following_reward, decision_reward, desired_distance_ego, gap_adjust_reward, AdjustRewardParams,
    DecisionRewardParams, GapMeasurement,
};
use crate::error::{Error, Result};
use crate::motion::{plan_lane_change, PurePursuitConfig, PursuitController, QuinticTrajectory};
use crate::sim::{observe_decision_state, DecisionState, WorldState, STATE_DIM};
use crate::value::{select_continuous, select_discrete, DqnModel, QuadraticQModel, Transition};

pub const STAY: usize = 0;
pub const CHANGE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Control steps between decisions while following.
    pub decision_interval: u32,
    /// Control steps allowed for gap alignment before the decision is revisited.
    pub adjust_timeout: u32,
    /// Alignment tolerance on `|min(dx_leader, dx_target) - dx_follow|` (m).
    pub align_distance: f64,
    /// Alignment tolerance on `|v_ego - min(v_leader, v_target)|` (m/s).
    pub align_speed: f64,
    pub target_lane: usize,
    /// Duration of the planned lateral maneuver (s).
    pub execution_time: f64,
    pub decision: DecisionRewardParams,
    pub following: AdjustRewardParams,
    pub gap: AdjustRewardParams,
    pub pursuit: PurePursuitConfig,
    /// Replaces the decision network with a fixed choice.
    pub scripted_decision: Option<usize>,
    /// When false, reaching alignment ends the maneuver instead of executing it.
    pub execution_enabled: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            decision_interval: 10,
            adjust_timeout: 80,
            align_distance: 2.0,
            align_speed: 1.0,
            target_lane: 1,
            execution_time: 5.0,
            decision: DecisionRewardParams::default(),
            following: AdjustRewardParams::CAR_FOLLOWING,
            gap: AdjustRewardParams::GAP_ALIGNMENT,
            pursuit: PurePursuitConfig::default(),
            scripted_decision: None,
            execution_enabled: true,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.decision_interval == 0 || self.adjust_timeout == 0 {
            return Err(Error::Config("decision interval and adjustment timeout must be positive".into()));
        }
        if !(self.align_distance > 0.0 && self.align_speed > 0.0 && self.execution_time > 0.0) {
            return Err(Error::Config("alignment tolerances and execution time must be positive".into()));
        }
        if self.scripted_decision.is_some_and(|a| a > CHANGE) {
            return Err(Error::Config("scripted decision must be 0 or 1".into()));
        }
        self.decision.validate()?;
        self.following.validate()?;
        self.gap.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentPhase {
    Deciding,
    AdjustingFollow { steps: u32 },
    AdjustingGap { steps: u32 },
    Executing { trajectory: QuinticTrajectory, steps: u32 },
    Done,
    Aborted,
}

impl AgentPhase {
    pub fn name(&self) -> &'static str {
        match self {
            AgentPhase::Deciding => "deciding",
            AgentPhase::AdjustingFollow { .. } => "adjusting_follow",
            AgentPhase::AdjustingGap { .. } => "adjusting_gap",
            AgentPhase::Executing { .. } => "executing",
            AgentPhase::Done => "done",
            AgentPhase::Aborted => "aborted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, AgentPhase::Done | AgentPhase::Aborted)
    }
}

/// Whether `from → to` is a legal phase change. Collisions may abort from any live phase.
pub fn legal_transition(from: &AgentPhase, to: &AgentPhase) -> bool {
    use AgentPhase::*;
    if from.name() == to.name() {
        return !from.is_terminal();
    }
    match (from, to) {
        (Done, _) | (Aborted, _) => false,
        (_, Aborted) => true,
        (Deciding, AdjustingFollow { .. } | AdjustingGap { .. }) => true,
        (AdjustingGap { .. }, Executing { .. } | Deciding | Done) => true,
        (Executing { .. }, Done) => true,
        (AdjustingFollow { .. }, Deciding) => true,
        _ => false,
    }
}

/// The three learned components, borrowed for one step.
#[derive(Debug, Clone, Copy)]
pub struct AgentModels<'a> {
    pub dqn: &'a DqnModel,
    pub following: &'a QuadraticQModel,
    pub lane_change: &'a QuadraticQModel,
}

/// Exploration applied to each component; zero means greedy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Exploration {
    pub decision_eps: f64,
    pub following_noise: f64,
    pub lane_change_noise: f64,
}

impl Exploration {
    pub const GREEDY: Self = Self {
        decision_eps: 0.0,
        following_noise: 0.0,
        lane_change_noise: 0.0,
    };
}

/// Output of one pass through the phase machine.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub accel: f64,
    pub steer: f64,
    /// Phase in which the action is taken.
    pub phase: AgentPhase,
    /// Decision in force for this step.
    pub a_l: usize,
    /// A new decision was taken at this step.
    pub decided: bool,
    /// Gap alignment ran out of time at this step.
    pub timed_out: bool,
}

pub fn is_aligned(s: &DecisionState, cfg: &AgentConfig) -> bool {
    let front = s.dx_leader.min(s.dx_target);
    let v_front = s.v_leader().min(s.v_target());
    (front - s.dx_follow).abs() < cfg.align_distance && (s.v_ego - v_front).abs() < cfg.align_speed
}

/// Runs the phase machine up to the point where an action is chosen.
///
/// `a_l` is the decision currently in force (ignored in `deciding`). Ego inputs come from the
/// component that owns the resulting phase; only `executing` steers.
pub fn hierarchical_step<R: Rng>(
    phase: &AgentPhase,
    a_l: usize,
    world: &WorldState,
    models: AgentModels<'_>,
    cfg: &AgentConfig,
    explore: &Exploration,
    rng: &mut R,
) -> Result<StepDecision> {
    let s = observe_decision_state(world, cfg.target_lane)?;
    let features = s.features();
    let adjust = s.adjust_features();
    let ego = world.ego().ok_or_else(|| Error::Contract("world has no ego vehicle".into()))?;
    let mut phase = phase.clone();
    let (mut a_l, mut decided, mut timed_out) = (a_l, false, false);
    loop {
        phase = match phase {
            AgentPhase::Done | AgentPhase::Aborted => {
                return Err(Error::Contract(format!("no action in terminal phase {}", phase.name())));
            }
            AgentPhase::Deciding => {
                if decided {
                    return Err(Error::Contract("decision loop did not settle".into()));
                }
                a_l = match cfg.scripted_decision {
                    Some(a) => a,
                    None => select_discrete(models.dqn, &features, explore.decision_eps, rng)?,
                };
                decided = true;
                if a_l == STAY {
                    AgentPhase::AdjustingFollow { steps: 0 }
                } else {
                    AgentPhase::AdjustingGap { steps: 0 }
                }
            }
            AgentPhase::AdjustingFollow { steps } if steps >= cfg.decision_interval => AgentPhase::Deciding,
            AgentPhase::AdjustingFollow { steps } => {
                let accel = select_continuous(models.following, &adjust, explore.following_noise, rng)?;
                return Ok(StepDecision {
                    accel,
                    steer: 0.0,
                    phase: AgentPhase::AdjustingFollow { steps },
                    a_l,
                    decided,
                    timed_out,
                });
            }
            AgentPhase::AdjustingGap { .. } if cfg.execution_enabled && is_aligned(&s, cfg) => {
                let trajectory = plan_lane_change(ego, cfg.target_lane, cfg.execution_time, &world.geometry)?;
                AgentPhase::Executing { trajectory, steps: 0 }
            }
            AgentPhase::AdjustingGap { steps } if steps >= cfg.adjust_timeout => {
                timed_out = true;
                AgentPhase::Deciding
            }
            AgentPhase::AdjustingGap { steps } => {
                let accel = select_continuous(models.lane_change, &adjust, explore.lane_change_noise, rng)?;
                return Ok(StepDecision {
                    accel,
                    steer: 0.0,
                    phase: AgentPhase::AdjustingGap { steps },
                    a_l,
                    decided,
                    timed_out,
                });
            }
            AgentPhase::Executing { trajectory, steps } => {
                let t = trajectory.t_i + f64::from(steps) * world.dt;
                let (accel, steer) =
                    PursuitController::new(cfg.pursuit).control(&trajectory, t, (ego.x, ego.y, ego.heading), ego.v);
                return Ok(StepDecision {
                    accel,
                    steer,
                    phase: AgentPhase::Executing { trajectory, steps },
                    a_l,
                    decided,
                    timed_out,
                });
            }
        };
    }
}

/// Which learner a transition belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emitted {
    Following(Transition<f64>),
    LaneChange(Transition<f64>),
    Decision(Transition<usize>),
}

/// Rewards and transitions produced by one world step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFeedback {
    pub r_decision: f64,
    /// Reward of the adjustment module that acted; zero while executing.
    pub r_adjust: f64,
    pub collided: bool,
    pub emitted: Vec<Emitted>,
}

#[derive(Debug, Clone)]
struct PendingDecision {
    s: [f64; STATE_DIM],
    a_l: usize,
    reward: f64,
}

/// Phase machine plus the bookkeeping that turns steps into learner transitions.
#[derive(Debug, Clone)]
pub struct HierarchicalAgent {
    pub cfg: AgentConfig,
    phase: AgentPhase,
    a_l: usize,
    last: Option<(DecisionState, StepDecision)>,
    pending: Option<PendingDecision>,
}

impl HierarchicalAgent {
    pub fn new(cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            phase: AgentPhase::Deciding,
            a_l: STAY,
            last: None,
            pending: None,
        })
    }

    pub fn phase(&self) -> &AgentPhase {
        &self.phase
    }

    pub fn decision(&self) -> usize {
        self.a_l
    }

    /// Chooses this step's ego inputs. Emits the previous decision's transition when a new
    /// decision is taken.
    pub fn act<R: Rng>(
        &mut self,
        world: &WorldState,
        models: AgentModels<'_>,
        explore: &Exploration,
        rng: &mut R,
    ) -> Result<(StepDecision, Vec<Emitted>)> {
        if self.last.is_some() {
            return Err(Error::Contract("act called twice without feedback".into()));
        }
        let step = hierarchical_step(&self.phase, self.a_l, world, models, &self.cfg, explore, rng)?;
        let s = observe_decision_state(world, self.cfg.target_lane)?;
        let mut emitted = Vec::new();
        if step.decided {
            if let Some(p) = self.pending.take() {
                emitted.push(Emitted::Decision(Transition {
                    s: p.s,
                    a: p.a_l,
                    r: p.reward,
                    s_next: s.features(),
                    terminal: false,
                }));
            }
            self.pending = Some(PendingDecision {
                s: s.features(),
                a_l: step.a_l,
                reward: 0.0,
            });
        }
        self.a_l = step.a_l;
        self.phase = step.phase.clone();
        self.last = Some((s, step.clone()));
        Ok((step, emitted))
    }

    /// Scores the step just simulated and advances phase timers.
    pub fn feedback(&mut self, world: &WorldState) -> Result<StepFeedback> {
        let (s, step) = self
            .last
            .take()
            .ok_or_else(|| Error::Contract("feedback without a preceding action".into()))?;
        let s_next = observe_decision_state(world, self.cfg.target_lane)?;
        let ego_length = world.ego().map_or(0.0, |e| e.length);
        let collided = world.collided();
        let p = &self.cfg.decision;
        let gap = GapMeasurement::measure(&s_next, ego_length, p);
        let r_decision = decision_reward(&s_next, step.a_l, &gap, collided, p);
        if let Some(pending) = &mut self.pending {
            pending.reward += r_decision;
        }

        let mut emitted = Vec::new();
        let transition = |r: f64, terminal: bool| Transition {
            s: s.adjust_features(),
            a: step.accel,
            r,
            s_next: s_next.adjust_features(),
            terminal,
        };
        let r_adjust = match &step.phase {
            AgentPhase::AdjustingFollow { .. } => {
                let r = if collided {
                    p.collision_penalty
                } else {
                    let d_ego = desired_distance_ego(s_next.v_ego, p);
                    car_following_reward(s_next.dx_leader, 0.0, s_next.v_leader(), s_next.v_ego, d_ego, &self.cfg.following)
                        + action_cost(step.accel, &self.cfg.following)
                };
                emitted.push(Emitted::Following(transition(r, collided)));
                r
            }
            AgentPhase::AdjustingGap { .. } => {
                let r = if collided {
                    p.collision_penalty
                } else {
                    gap_adjust_reward(&s_next, s_next.v_leader(), s_next.v_target(), &self.cfg.gap)
                        + action_cost(step.accel, &self.cfg.gap)
                };
                let finished = !self.cfg.execution_enabled && is_aligned(&s_next, &self.cfg);
                emitted.push(Emitted::LaneChange(transition(r, collided || finished)));
                r
            }
            _ => 0.0,
        };

        self.phase = match step.phase {
            _ if collided => AgentPhase::Aborted,
            AgentPhase::AdjustingFollow { steps } => AgentPhase::AdjustingFollow { steps: steps + 1 },
            AgentPhase::AdjustingGap { .. } if !self.cfg.execution_enabled && is_aligned(&s_next, &self.cfg) => {
                AgentPhase::Done
            }
            AgentPhase::AdjustingGap { steps } => AgentPhase::AdjustingGap { steps: steps + 1 },
            AgentPhase::Executing { trajectory, steps } => {
                let steps = steps + 1;
                if f64::from(steps) * world.dt >= trajectory.duration() - 1e-9 {
                    AgentPhase::Done
                } else {
                    AgentPhase::Executing { trajectory, steps }
                }
            }
            other => other,
        };
        if self.phase.is_terminal() {
            emitted.extend(self.finish_decision(&s_next, true));
        }
        Ok(StepFeedback {
            r_decision,
            r_adjust,
            collided,
            emitted,
        })
    }

    /// Closes the open decision interval at a truncated episode end.
    pub fn truncate(&mut self, world: &WorldState) -> Result<Vec<Emitted>> {
        let s = observe_decision_state(world, self.cfg.target_lane)?;
        Ok(self.finish_decision(&s, false).into_iter().collect())
    }

    fn finish_decision(&mut self, s_next: &DecisionState, terminal: bool) -> Option<Emitted> {
        self.pending.take().map(|p| {
            Emitted::Decision(Transition {
                s: p.s,
                a: p.a_l,
                r: p.reward,
                s_next: s_next.features(),
                terminal,
            })
        })
    }
}

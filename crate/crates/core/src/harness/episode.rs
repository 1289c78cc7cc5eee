use rand::Rng;

use super::config::TrainConfig;
use crate::agent::{AgentConfig, AgentModels, AgentPhase, Emitted, Exploration, HierarchicalAgent, CHANGE, STAY};
use crate::error::{Error, Result};
use crate::sim::{observe_decision_state, Role, Vehicle, WorldState};

/// Which part of the hierarchy an episode exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Decision pinned to "stay"; only the car-following module acts.
    CarFollowing,
    /// Decision pinned to "change", execution disabled; ends at alignment or timeout.
    LaneChange,
    /// Decision network, both adjustment modules and execution.
    Full,
}

impl Purpose {
    pub fn agent_config(self, cfg: &TrainConfig) -> AgentConfig {
        let base = cfg.agent_config();
        match self {
            Purpose::CarFollowing => AgentConfig {
                scripted_decision: Some(STAY),
                ..base
            },
            Purpose::LaneChange => AgentConfig {
                scripted_decision: Some(CHANGE),
                execution_enabled: false,
                ..base
            },
            Purpose::Full => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalCause {
    Collision,
    Done,
    Timeout,
    SegmentEnd,
}

impl TerminalCause {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalCause::Collision => "collision",
            TerminalCause::Done => "done",
            TerminalCause::Timeout => "timeout",
            TerminalCause::SegmentEnd => "segment_end",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::Collision, Self::Done, Self::Timeout, Self::SegmentEnd]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

/// One line of the per-step metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Time at which the action was taken (s).
    pub t: f64,
    pub phase: &'static str,
    pub a_l: usize,
    pub accel: f64,
    pub steer: f64,
    pub r_decision: f64,
    pub r_adjust: f64,
}

/// Snapshot of one vehicle at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub vehicle: Vehicle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub seed: u64,
    /// Sum of `r_decision` for full episodes, of `r_adjust` otherwise.
    pub cumulative_reward: f64,
    pub steps: u32,
    pub cause: TerminalCause,
    /// Mean `|v_ego - v_leader|` over the last 50 steps.
    pub mean_abs_dv_tail: f64,
    /// Lane change finished (full episodes) or gap alignment reached (lane-change episodes).
    pub completed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub metrics: EpisodeMetrics,
    pub rows: Vec<MetricsRow>,
    /// `|v_ego - v_leader|` after every step.
    pub abs_dv: Vec<f64>,
    /// Empty unless recording was requested; includes the initial state.
    pub trajectory: Vec<TrajectoryRow>,
}

const DV_TAIL: usize = 50;

/// Steps one episode at a time so a trainer can update models between steps.
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    world: WorldState,
    agent: HierarchicalAgent,
    purpose: Purpose,
    max_steps: u32,
    record_trajectory: bool,
    steps: u32,
    reward: f64,
    rows: Vec<MetricsRow>,
    abs_dv: Vec<f64>,
    trajectory: Vec<TrajectoryRow>,
    cause: Option<TerminalCause>,
}

fn snapshot(world: &WorldState, out: &mut Vec<TrajectoryRow>) {
    let t = world.t();
    out.extend(world.vehicles.iter().map(|&vehicle| TrajectoryRow { t, vehicle }));
}

impl EpisodeRunner {
    pub fn new(world: WorldState, cfg: &TrainConfig, purpose: Purpose, record_trajectory: bool) -> Result<Self> {
        if world.ego().is_none() {
            return Err(Error::Contract("episode world has no ego vehicle".into()));
        }
        let agent = HierarchicalAgent::new(purpose.agent_config(cfg))?;
        let mut trajectory = Vec::new();
        if record_trajectory {
            snapshot(&world, &mut trajectory);
        }
        Ok(Self {
            world,
            agent,
            purpose,
            max_steps: cfg.max_episode_steps,
            record_trajectory,
            steps: 0,
            reward: 0.0,
            rows: Vec::new(),
            abs_dv: Vec::new(),
            trajectory,
            cause: None,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn phase(&self) -> &AgentPhase {
        self.agent.phase()
    }

    pub fn cause(&self) -> Option<TerminalCause> {
        self.cause
    }

    fn segment_ended(&self) -> bool {
        let ego = self.world.ego().expect("ego checked at construction");
        ego.x >= self.world.geometry.segment_length
            || (self.purpose == Purpose::CarFollowing && self.world.by_role(Role::Leader).is_none())
    }

    /// Lane-change episodes stop when alignment runs out of time instead of re-deciding.
    fn gap_timed_out(&self) -> bool {
        let timeout = self.agent.cfg.adjust_timeout;
        self.purpose == Purpose::LaneChange
            && matches!(self.agent.phase(), AgentPhase::AdjustingGap { steps } if *steps >= timeout)
    }

    fn truncate(&mut self, cause: TerminalCause) -> Result<Vec<Emitted>> {
        self.cause = Some(cause);
        self.agent.truncate(&self.world)
    }

    /// Advances one control step; returns the learner transitions it produced.
    pub fn step<R: Rng>(&mut self, models: AgentModels<'_>, explore: &Exploration, rng: &mut R) -> Result<Vec<Emitted>> {
        if self.cause.is_some() {
            return Err(Error::Contract("episode already finished".into()));
        }
        let t = self.world.t();
        let (decision, mut emitted) = self.agent.act(&self.world, models, explore, rng)?;
        self.world.step(decision.accel, decision.steer);
        let fb = self.agent.feedback(&self.world)?;
        emitted.extend(fb.emitted);
        self.steps += 1;
        let r = match self.purpose {
            Purpose::Full => fb.r_decision,
            _ => fb.r_adjust,
        };
        self.reward += r;
        self.rows.push(MetricsRow {
            t,
            phase: decision.phase.name(),
            a_l: decision.a_l,
            accel: decision.accel,
            steer: decision.steer,
            r_decision: fb.r_decision,
            r_adjust: fb.r_adjust,
        });
        let s = observe_decision_state(&self.world, self.agent.cfg.target_lane)?;
        self.abs_dv.push(s.dv_leader.abs());
        if self.record_trajectory {
            snapshot(&self.world, &mut self.trajectory);
        }

        if fb.collided {
            self.cause = Some(TerminalCause::Collision);
        } else if *self.agent.phase() == AgentPhase::Done {
            self.cause = Some(TerminalCause::Done);
        } else if self.gap_timed_out() || self.steps >= self.max_steps {
            emitted.extend(self.truncate(TerminalCause::Timeout)?);
        } else if self.segment_ended() {
            emitted.extend(self.truncate(TerminalCause::SegmentEnd)?);
        }
        Ok(emitted)
    }

    pub fn is_finished(&self) -> bool {
        self.cause.is_some()
    }

    /// Closes the episode. An unfinished episode is recorded as a timeout.
    pub fn finish(self, episode: usize, seed: u64) -> EpisodeRecord {
        let cause = self.cause.unwrap_or(TerminalCause::Timeout);
        let tail = &self.abs_dv[self.abs_dv.len().saturating_sub(DV_TAIL)..];
        let mean_abs_dv_tail = if tail.is_empty() {
            0.0
        } else {
            tail.iter().sum::<f64>() / tail.len() as f64
        };
        EpisodeRecord {
            metrics: EpisodeMetrics {
                episode,
                seed,
                cumulative_reward: self.reward,
                steps: self.steps,
                cause,
                mean_abs_dv_tail,
                completed: cause == TerminalCause::Done,
            },
            rows: self.rows,
            abs_dv: self.abs_dv,
            trajectory: self.trajectory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpisodeMode {
    /// Exploratory actions; transitions are returned.
    Train(Exploration),
    /// Greedy actions; no transitions.
    Eval,
}

/// Runs a whole episode with fixed models.
pub fn run_episode<R: Rng>(
    world: WorldState,
    cfg: &TrainConfig,
    purpose: Purpose,
    models: AgentModels<'_>,
    mode: EpisodeMode,
    rng: &mut R,
    record_trajectory: bool,
) -> Result<(EpisodeRecord, Vec<Emitted>)> {
    let explore = match mode {
        EpisodeMode::Train(e) => e,
        EpisodeMode::Eval => Exploration::GREEDY,
    };
    let mut runner = EpisodeRunner::new(world, cfg, purpose, record_trajectory)?;
    let mut transitions = Vec::new();
    while !runner.is_finished() {
        let emitted = runner.step(models, &explore, rng)?;
        if matches!(mode, EpisodeMode::Train(_)) {
            transitions.extend(emitted);
        }
    }
    Ok((runner.finish(0, 0), transitions))
}

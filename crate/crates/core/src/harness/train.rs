//! Curriculum stages: adjustment modules first, then the decision network with both
//! adjustment modules frozen.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::episode::{EpisodeMetrics, EpisodeRunner, Purpose};
use crate::agent::{AgentModels, Emitted, Exploration};
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::sim::{spawn_scenario, STATE_DIM};
use crate::value::{
    epsilon_at, sync_target, train_step_dqn, train_step_quadratic, DqnModel, QuadraticAdam, QuadraticQModel,
    ReplayBuffer,
};

/// Loss above which training is considered diverged.
pub const DIVERGENCE_LOSS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjustModule {
    CarFollowing,
    LaneChange,
}

impl AdjustModule {
    pub fn name(self) -> &'static str {
        match self {
            AdjustModule::CarFollowing => "car_following",
            AdjustModule::LaneChange => "lane_change",
        }
    }

    pub fn purpose(self) -> Purpose {
        match self {
            AdjustModule::CarFollowing => Purpose::CarFollowing,
            AdjustModule::LaneChange => Purpose::LaneChange,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingCurves {
    /// `(control step, pre-update loss)` for every gradient step.
    pub losses: Vec<(u64, f64)>,
    /// Completed episodes only.
    pub episodes: Vec<EpisodeMetrics>,
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len() as f64;
    xs.sum::<f64>() / n
}

impl TrainingCurves {
    pub fn episode_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.cumulative_reward).collect()
    }

    /// Mean episode reward over the first and the last `frac` of episodes.
    pub fn reward_trend(&self, frac: f64) -> Option<(f64, f64)> {
        let r = self.episode_rewards();
        let k = ((r.len() as f64 * frac).floor() as usize).max(1);
        if r.len() < 2 * k {
            return None;
        }
        Some((mean(r[..k].iter().copied()), mean(r[r.len() - k..].iter().copied())))
    }

    /// Moving-average loss over the first and the last `window` gradient steps.
    pub fn loss_trend(&self, window: usize) -> Option<(f64, f64)> {
        let l = &self.losses;
        if window == 0 || l.len() < 2 * window {
            return None;
        }
        Some((
            mean(l[..window].iter().map(|p| p.1)),
            mean(l[l.len() - window..].iter().map(|p| p.1)),
        ))
    }
}

#[derive(Debug, Clone)]
pub struct AdjustmentRun {
    pub model: QuadraticQModel,
    pub curves: TrainingCurves,
}

#[derive(Debug, Clone)]
pub struct DecisionRun {
    pub model: DqnModel,
    pub curves: TrainingCurves,
}

const INIT_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;
const EPISODE_STREAM: u64 = 2;

/// Independent generator streams derived from one seed.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Training scenario seeds have the top bit clear; evaluation seeds have it set.
fn train_seed<R: Rng>(rng: &mut R) -> u64 {
    rng.random::<u64>() >> 1
}

fn guard(step: u64, loss: f64, finite: bool) -> Result<()> {
    if !loss.is_finite() || loss > DIVERGENCE_LOSS || !finite {
        return Err(Error::Divergence(format!(
            "control step {step}: loss {loss:e}, parameters finite: {finite}"
        )));
    }
    Ok(())
}

/// Trains one adjustment module from its pinned initialization.
///
/// `on_episode` sees every completed episode, e.g. for progress reporting.
pub fn train_adjustment(
    module: AdjustModule,
    cfg: &TrainConfig,
    on_episode: &mut dyn FnMut(&EpisodeMetrics),
) -> Result<AdjustmentRun> {
    cfg.validate()?;
    let mut init = stream(cfg.seed, INIT_STREAM);
    let mut policy = stream(cfg.seed, POLICY_STREAM);
    let mut episodes = stream(cfg.seed, EPISODE_STREAM);
    let mut model = QuadraticQModel::new(STATE_DIM, &mut init)?;
    // never queried: the decision is scripted in adjustment episodes
    let idle_dqn = DqnModel::new(STATE_DIM, &mut init)?;
    let mut target = model.clone();
    let mut adam = QuadraticAdam::new(&model, cfg.lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, episodes.random());
    let mut curves = TrainingCurves::default();

    let mut step = 0u64;
    while step < cfg.total_steps {
        let seed = train_seed(&mut episodes);
        let mut runner = EpisodeRunner::new(spawn_scenario(seed, &cfg.scenario)?, cfg, module.purpose(), false)?;
        while !runner.is_finished() && step < cfg.total_steps {
            let noise = epsilon_at(&cfg.noise, step);
            let explore = match module {
                AdjustModule::CarFollowing => Exploration {
                    following_noise: noise,
                    ..Exploration::GREEDY
                },
                AdjustModule::LaneChange => Exploration {
                    lane_change_noise: noise,
                    ..Exploration::GREEDY
                },
            };
            let view = AgentModels {
                dqn: &idle_dqn,
                following: &model,
                lane_change: &model,
            };
            for e in runner.step(view, &explore, &mut policy)? {
                match (module, e) {
                    (AdjustModule::CarFollowing, Emitted::Following(t))
                    | (AdjustModule::LaneChange, Emitted::LaneChange(t)) => buffer.push(t),
                    _ => {}
                }
            }
            if let Some(batch) = buffer.sample(cfg.batch_size) {
                let loss = train_step_quadratic(&mut model, &target, &batch, cfg.gamma, cfg.bound_penalty, &mut adam)?;
                guard(step, loss, model.is_finite())?;
                curves.losses.push((step, loss));
            }
            step += 1;
            if step.is_multiple_of(cfg.target_sync_interval) {
                sync_target(&model, &mut target);
            }
        }
        if runner.is_finished() {
            let record = runner.finish(curves.episodes.len(), seed);
            on_episode(&record.metrics);
            curves.episodes.push(record.metrics);
        }
    }
    Ok(AdjustmentRun { model, curves })
}

/// Trains the decision network over full hierarchical episodes; the adjustment modules
/// act greedily and are never modified.
pub fn train_decision(
    cfg: &TrainConfig,
    following: &QuadraticQModel,
    lane_change: &QuadraticQModel,
    on_episode: &mut dyn FnMut(&EpisodeMetrics),
) -> Result<DecisionRun> {
    cfg.validate()?;
    let frozen = (following.checksum(), lane_change.checksum());
    let mut init = stream(cfg.seed, INIT_STREAM);
    let mut policy = stream(cfg.seed, POLICY_STREAM);
    let mut episodes = stream(cfg.seed, EPISODE_STREAM);
    let mut dqn = DqnModel::new(STATE_DIM, &mut init)?;
    let mut target = dqn.clone();
    let mut adam = AdamState::new(&dqn.net.spec, cfg.lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, episodes.random());
    let mut curves = TrainingCurves::default();

    let mut step = 0u64;
    while step < cfg.total_steps {
        let seed = train_seed(&mut episodes);
        let mut runner = EpisodeRunner::new(spawn_scenario(seed, &cfg.scenario)?, cfg, Purpose::Full, false)?;
        while !runner.is_finished() && step < cfg.total_steps {
            let explore = Exploration {
                decision_eps: epsilon_at(&cfg.epsilon, step),
                ..Exploration::GREEDY
            };
            let view = AgentModels {
                dqn: &dqn,
                following,
                lane_change,
            };
            for e in runner.step(view, &explore, &mut policy)? {
                if let Emitted::Decision(t) = e {
                    buffer.push(t);
                }
            }
            if let Some(batch) = buffer.sample(cfg.batch_size) {
                let loss = train_step_dqn(&mut dqn, &target, &batch, cfg.gamma, &mut adam)?;
                guard(step, loss, dqn.net.params.is_finite())?;
                curves.losses.push((step, loss));
            }
            step += 1;
            if step.is_multiple_of(cfg.target_sync_interval) {
                sync_target(&dqn, &mut target);
            }
        }
        if runner.is_finished() {
            let record = runner.finish(curves.episodes.len(), seed);
            on_episode(&record.metrics);
            curves.episodes.push(record.metrics);
        }
    }
    if frozen != (following.checksum(), lane_change.checksum()) {
        return Err(Error::Contract("frozen adjustment models changed during decision training".into()));
    }
    Ok(DecisionRun { model: dqn, curves })
}

use super::config::TrainConfig;
use super::episode::{EpisodeMode, EpisodeRecord, Purpose, TerminalCause, run_episode};
use super::train::stream;
use crate::agent::{AgentModels, Exploration};
use crate::error::Result;
use crate::sim::{canonical_scenario, spawn_scenario};

/// `|Δv|` below which car following counts as settled (m/s).
pub const SETTLE_THRESHOLD: f64 = 2.0;

const EVAL_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioChoice {
    /// The fixed evaluation scene; every episode starts identically.
    Canonical,
    /// Randomized scenes from seeds disjoint from the training seeds.
    Random,
}

/// Scenario seed of evaluation episode `episode`. The top bit is set, so these never collide
/// with training seeds.
pub fn eval_seed(seed: u64, episode: usize) -> u64 {
    (1 << 63) | (seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(episode as u64) >> 1)
}

/// Number of steps until `|Δv|` first drops below `threshold`.
pub fn settling_step(abs_dv: &[f64], threshold: f64) -> Option<usize> {
    abs_dv.iter().position(|&d| d < threshold).map(|k| k + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeRecord>,
    pub collision_rate: f64,
    pub completion_rate: f64,
    /// Mean time to first `|Δv| < SETTLE_THRESHOLD` over the episodes that got there (s).
    pub mean_settling_time: Option<f64>,
}

impl EvalReport {
    fn from_episodes(episodes: Vec<EpisodeRecord>, dt: f64) -> Self {
        let n = episodes.len();
        let rate = |pred: &dyn Fn(&EpisodeRecord) -> bool| {
            if n == 0 {
                0.0
            } else {
                episodes.iter().filter(|e| pred(e)).count() as f64 / n as f64
            }
        };
        let collision_rate = rate(&|e| e.metrics.cause == TerminalCause::Collision);
        let completion_rate = rate(&|e| e.metrics.completed);
        let settled: Vec<f64> = episodes
            .iter()
            .filter_map(|e| settling_step(&e.abs_dv, SETTLE_THRESHOLD))
            .map(|k| k as f64 * dt)
            .collect();
        let mean_settling_time = (!settled.is_empty()).then(|| settled.iter().sum::<f64>() / settled.len() as f64);
        Self {
            episodes,
            collision_rate,
            completion_rate,
            mean_settling_time,
        }
    }
}

/// Runs `n_episodes` with the given exploration (use [`Exploration::GREEDY`] for plain
/// evaluation, or `decision_eps = 1` for a uniform-random decision baseline).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy(
    models: AgentModels<'_>,
    cfg: &TrainConfig,
    purpose: Purpose,
    scenario: ScenarioChoice,
    n_episodes: usize,
    seed: u64,
    explore: Exploration,
    record_trajectory: bool,
) -> Result<EvalReport> {
    let mut rng = stream(seed, EVAL_STREAM);
    let mode = if explore == Exploration::GREEDY {
        EpisodeMode::Eval
    } else {
        EpisodeMode::Train(explore)
    };
    let mut episodes = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        let (world, scenario_seed) = match scenario {
            ScenarioChoice::Canonical => (canonical_scenario(&cfg.scenario)?, 0),
            ScenarioChoice::Random => {
                let s = eval_seed(seed, i);
                (spawn_scenario(s, &cfg.scenario)?, s)
            }
        };
        let (mut record, _) = run_episode(world, cfg, purpose, models, mode, &mut rng, record_trajectory)?;
        record.metrics.episode = i;
        record.metrics.seed = scenario_seed;
        episodes.push(record);
    }
    Ok(EvalReport::from_episodes(episodes, cfg.scenario.dt))
}

/// Greedy evaluation.
pub fn evaluate(
    models: AgentModels<'_>,
    cfg: &TrainConfig,
    purpose: Purpose,
    scenario: ScenarioChoice,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_policy(models, cfg, purpose, scenario, n_episodes, seed, Exploration::GREEDY, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ModelSet;

    #[test]
    fn empty_report() {
        let m = ModelSet::fresh(0).unwrap();
        let r = evaluate(m.view(), &TrainConfig::default(), Purpose::Full, ScenarioChoice::Random, 0, 1).unwrap();
        assert!(r.episodes.is_empty());
        assert_eq!((r.collision_rate, r.completion_rate, r.mean_settling_time), (0.0, 0.0, None));
    }

    #[test]
    fn canonical_trace_starts_at_the_published_condition() {
        let m = ModelSet::fresh(0).unwrap();
        let cfg = TrainConfig::default();
        let r = evaluate(m.view(), &cfg, Purpose::CarFollowing, ScenarioChoice::Canonical, 1, 0).unwrap();
        let e = &r.episodes[0];
        assert!(!e.abs_dv.is_empty());
        // one step of leader IDM braking and a zero ego action from 35.5 vs 17 m/s
        assert!((e.abs_dv[0] - 18.5).abs() < 0.1, "{}", e.abs_dv[0]);
    }

    #[test]
    fn rates_match_episode_rows() {
        let m = ModelSet::fresh(5).unwrap();
        let cfg = TrainConfig::default();
        let r = evaluate(m.view(), &cfg, Purpose::Full, ScenarioChoice::Random, 12, 3).unwrap();
        let collisions = r.episodes.iter().filter(|e| e.metrics.cause == TerminalCause::Collision).count();
        assert_eq!(r.collision_rate, collisions as f64 / 12.0);
        let seeds: Vec<u64> = r.episodes.iter().map(|e| e.metrics.seed).collect();
        assert!(seeds.iter().all(|s| s >> 63 == 1));
    }

    #[test]
    fn settling_is_first_crossing() {
        assert_eq!(settling_step(&[5.0, 3.0, 1.9, 2.5], 2.0), Some(3));
        assert_eq!(settling_step(&[5.0], 2.0), None);
    }
}

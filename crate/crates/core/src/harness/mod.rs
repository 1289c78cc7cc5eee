//! Training curriculum, evaluation, configuration and run artifacts.

mod config;
mod episode;
mod eval;
mod export;
mod models;
mod train;

pub use config::{AgentTuning, RewardConfig, TrainConfig, CONFIG_KEYS, MAX_EPISODE_STEPS};
pub use episode::{
    run_episode, EpisodeMetrics, EpisodeMode, EpisodeRecord, EpisodeRunner, MetricsRow, Purpose, TerminalCause,
    TrajectoryRow,
};
pub use eval::{eval_seed, evaluate, evaluate_policy, settling_step, EvalReport, ScenarioChoice, SETTLE_THRESHOLD};
pub use export::{
    export, read_episodes_csv, rollout, write_csv_file, write_curves, write_episode, write_episodes_csv,
    write_loss_csv, write_metrics_csv, write_trajectory_csv, ExportKind, EPISODES_HEADER, LOSS_HEADER,
    METRICS_HEADER, TRAJECTORY_HEADER,
};
pub use models::{ModelSet, DECISION_DIR, FOLLOWING_DIR, LANE_CHANGE_DIR};
pub use train::{
    train_adjustment, train_decision, AdjustModule, AdjustmentRun, DecisionRun, TrainingCurves, DIVERGENCE_LOSS,
};

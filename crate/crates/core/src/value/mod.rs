//! Value learners: the quadratic continuous-action Q model, the discrete decision network,
//! replay, exploration schedules and TD training steps.

mod dqn;
mod persist;
mod quadratic;
mod replay;
mod schedule;
mod train;

pub use dqn::{argmax_decision, select_discrete, DqnModel, N_DECISIONS};
pub use persist::{load_dqn, load_quadratic, read_manifest, save_dqn, save_quadratic, ModelKind, ModelManifest, MANIFEST_FILE};
pub use quadratic::{
    greedy_action, max_q, quadratic_q_value, select_continuous, QuadraticHeads, QuadraticQModel,
    DEFAULT_ACTION_BOUNDS, PINNED_A_BIAS, PINNED_C,
};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::{epsilon_at, EpsilonSchedule};
pub use train::{
    dqn_loss_and_grads, quadratic_loss_and_grads, sync_target, td_target_continuous, td_target_discrete,
    train_step_dqn, train_step_quadratic, QuadraticAdam, QuadraticGrads, DEFAULT_BOUND_PENALTY, DEFAULT_GAMMA, DEFAULT_TARGET_SYNC,
};

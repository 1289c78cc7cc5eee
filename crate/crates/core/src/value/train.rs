use super::dqn::{DqnModel, N_DECISIONS};
use super::quadratic::{max_q, QuadraticQModel};
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::nn::{adam_update, AdamState, MlpParams};
use crate::sim::STATE_DIM;

pub const DEFAULT_GAMMA: f64 = 0.99;
pub const DEFAULT_TARGET_SYNC: u64 = 1000;

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Domain(format!("discount {gamma} outside [0, 1)")));
    }
    Ok(())
}

/// `r + γ·max_a Q_target(s', a)`, or `r` at a terminal transition.
pub fn td_target_continuous(r: f64, s_next: &[f64], terminal: bool, gamma: f64, target: &QuadraticQModel) -> Result<f64> {
    check_gamma(gamma)?;
    if terminal || gamma == 0.0 {
        return Ok(r);
    }
    Ok(r + gamma * max_q(target, s_next)?)
}

pub fn td_target_discrete(r: f64, s_next: &[f64], terminal: bool, gamma: f64, target: &DqnModel) -> Result<f64> {
    check_gamma(gamma)?;
    if terminal || gamma == 0.0 {
        return Ok(r);
    }
    let q = target.q_values(s_next)?;
    Ok(r + gamma * q[0].max(q[1]))
}

/// Target network becomes a deep copy of the online network.
pub fn sync_target<M: Clone>(online: &M, target: &mut M) {
    target.clone_from(online);
}

/// Adam moments for the three heads of a [`QuadraticQModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticAdam {
    pub a: AdamState,
    pub b: AdamState,
    pub c: AdamState,
}

impl QuadraticAdam {
    pub fn new(m: &QuadraticQModel, lr: f64) -> Self {
        Self {
            a: AdamState::new(&m.net_a.spec, lr),
            b: AdamState::new(&m.net_b.spec, lr),
            c: AdamState::new(&m.net_c.spec, lr),
        }
    }
}

/// Gradients of the three heads, in the order A, B, C.
pub type QuadraticGrads = [MlpParams; 3];

fn stack<A>(batch: &[Transition<A>], pick: impl Fn(&Transition<A>) -> &[f64; STATE_DIM]) -> Vec<f64> {
    batch.iter().flat_map(|t| pick(t).iter().copied()).collect()
}

/// Weight of the soft penalty on `B(s)` leaving the action bounds.
///
/// Without it, `B` can run far outside the bounds while `A → 0`, using `A·(B − a)²` as a
/// bias term for `C`; the greedy action then sticks to one bound in every state.
pub const DEFAULT_BOUND_PENALTY: f64 = 1.0;

/// Squared distance from `b` to the interval `[lo, hi]`, and its derivative.
fn bound_excess(b: f64, (lo, hi): (f64, f64)) -> (f64, f64) {
    let e = if b > hi {
        b - hi
    } else if b < lo {
        b - lo
    } else {
        0.0
    };
    (e * e, 2.0 * e)
}

/// Mean squared TD error over `batch`, plus `bound_penalty` times the mean squared excursion
/// of `B(s)` outside the action bounds, and its gradient with respect to every head.
pub fn quadratic_loss_and_grads(
    m: &QuadraticQModel,
    target: &QuadraticQModel,
    batch: &[Transition<f64>],
    gamma: f64,
    bound_penalty: f64,
) -> Result<(f64, QuadraticGrads)> {
    if !(bound_penalty >= 0.0 && bound_penalty.is_finite()) {
        return Err(Error::Domain(format!("bound penalty {bound_penalty} must be finite and non-negative")));
    }
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    check_gamma(gamma)?;
    let s = stack(batch, |t| &t.s);
    let next = target.heads_batch(&stack(batch, |t| &t.s_next))?;
    let (a, cache_a) = m.net_a.forward_batch(&s)?;
    let (b, cache_b) = m.net_b.forward_batch(&s)?;
    let (c, cache_c) = m.net_c.forward_batch(&s)?;

    let n = batch.len();
    let scale = 2.0 / n as f64;
    let (mut ga_out, mut gb_out, mut gc_out) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut loss = 0.0;
    for (k, t) in batch.iter().enumerate() {
        let y = if t.terminal || gamma == 0.0 {
            t.r
        } else {
            t.r + gamma * target.max_q_of(&next[k])
        };
        let d = b[k] - t.a;
        let err = a[k] * d * d + c[k] - y;
        loss += err * err;
        let g = scale * err;
        let (excess, d_excess) = bound_excess(b[k], m.action_bounds);
        loss += bound_penalty * excess;
        ga_out[k] = g * d * d;
        gb_out[k] = g * 2.0 * a[k] * d + bound_penalty * d_excess / n as f64;
        gc_out[k] = g;
    }
    let mut grads = [
        MlpParams::zeros(&m.net_a.spec),
        MlpParams::zeros(&m.net_b.spec),
        MlpParams::zeros(&m.net_c.spec),
    ];
    let [ga, gb, gc] = &mut grads;
    m.net_a.backward_batch_into(&cache_a, &ga_out, ga)?;
    m.net_b.backward_batch_into(&cache_b, &gb_out, gb)?;
    m.net_c.backward_batch_into(&cache_c, &gc_out, gc)?;
    Ok((loss / n as f64, grads))
}

/// One Adam step on [`quadratic_loss_and_grads`]. Returns the pre-update loss.
pub fn train_step_quadratic(
    m: &mut QuadraticQModel,
    target: &QuadraticQModel,
    batch: &[Transition<f64>],
    gamma: f64,
    bound_penalty: f64,
    adam: &mut QuadraticAdam,
) -> Result<f64> {
    let (loss, [ga, gb, gc]) = quadratic_loss_and_grads(m, target, batch, gamma, bound_penalty)?;
    adam_update(&mut m.net_a.params, &ga, &mut adam.a)?;
    adam_update(&mut m.net_b.params, &gb, &mut adam.b)?;
    adam_update(&mut m.net_c.params, &gc, &mut adam.c)?;
    Ok(loss)
}

pub fn dqn_loss_and_grads(
    dqn: &DqnModel,
    target: &DqnModel,
    batch: &[Transition<usize>],
    gamma: f64,
) -> Result<(f64, MlpParams)> {
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    if let Some(t) = batch.iter().find(|t| t.a >= N_DECISIONS) {
        return Err(Error::Contract(format!("decision {} out of range", t.a)));
    }
    check_gamma(gamma)?;
    let next = target.q_values_batch(&stack(batch, |t| &t.s_next))?;
    let (q, cache) = dqn.net.forward_batch(&stack(batch, |t| &t.s))?;
    let n = batch.len();
    let scale = 2.0 / n as f64;
    let mut out_grads = vec![0.0; n * N_DECISIONS];
    let mut loss = 0.0;
    for (k, t) in batch.iter().enumerate() {
        let y = if t.terminal || gamma == 0.0 {
            t.r
        } else {
            t.r + gamma * next[N_DECISIONS * k].max(next[N_DECISIONS * k + 1])
        };
        let err = q[N_DECISIONS * k + t.a] - y;
        loss += err * err;
        out_grads[N_DECISIONS * k + t.a] = scale * err;
    }
    let mut grads = MlpParams::zeros(&dqn.net.spec);
    dqn.net.backward_batch_into(&cache, &out_grads, &mut grads)?;
    Ok((loss / n as f64, grads))
}

pub fn train_step_dqn(
    dqn: &mut DqnModel,
    target: &DqnModel,
    batch: &[Transition<usize>],
    gamma: f64,
    adam: &mut AdamState,
) -> Result<f64> {
    let (loss, grads) = dqn_loss_and_grads(dqn, target, batch, gamma)?;
    adam_update(&mut dqn.net.params, &grads, adam)?;
    Ok(loss)
}

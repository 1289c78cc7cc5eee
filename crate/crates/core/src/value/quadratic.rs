use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpSpec, OutputTransform};

pub const DEFAULT_ACTION_BOUNDS: (f64, f64) = (-4.0, 2.0);

/// Pre-activation bias of the A head at initialization; `-softplus(-10) ≈ -4.5e-5`.
pub const PINNED_A_BIAS: f64 = -10.0;
pub const PINNED_C: f64 = -60.0;

/// Head values `(A, B, C)` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticHeads {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticHeads {
    pub fn q(&self, action: f64) -> f64 {
        let d = self.b - action;
        self.a * d * d + self.c
    }
}

/// Continuous-action value `Q(s, a) = A(s)·(B(s) − a)² + C(s)` with `A < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticQModel {
    pub net_a: Mlp,
    pub net_b: Mlp,
    pub net_c: Mlp,
    pub action_bounds: (f64, f64),
}

impl QuadraticQModel {
    /// Networks with hidden sizes 150 (A), 200×200 (B), 150 (C), pinned so that at every state
    /// `A ≈ 0`, `B = 0` and `C = -60`.
    pub fn new<R: Rng>(input_dim: usize, rng: &mut R) -> Result<Self> {
        let spec = |sizes: Vec<usize>, out| MlpSpec::new(sizes, Activation::Relu, out);
        let mut m = Self {
            net_a: Mlp::new(spec(vec![input_dim, 150, 1], OutputTransform::NegatedSoftplus)?, rng),
            net_b: Mlp::new(spec(vec![input_dim, 200, 200, 1], OutputTransform::Identity)?, rng),
            net_c: Mlp::new(spec(vec![input_dim, 150, 1], OutputTransform::Identity)?, rng),
            action_bounds: DEFAULT_ACTION_BOUNDS,
        };
        m.pin_initial_values();
        Ok(m)
    }

    pub fn from_nets(net_a: Mlp, net_b: Mlp, net_c: Mlp, action_bounds: (f64, f64)) -> Result<Self> {
        let input = net_a.spec.input_size();
        let heads = [&net_a, &net_b, &net_c];
        if heads.iter().any(|n| n.spec.input_size() != input || n.spec.output_size() != 1) {
            return Err(Error::Contract("quadratic heads must share the input size and have one output".into()));
        }
        if net_a.spec.output_transform != OutputTransform::NegatedSoftplus {
            return Err(Error::Contract("the A head must end in a negated softplus".into()));
        }
        let (lo, hi) = action_bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("action bounds [{lo}, {hi}] are not an interval")));
        }
        Ok(Self {
            net_a,
            net_b,
            net_c,
            action_bounds,
        })
    }

    pub fn pin_initial_values(&mut self) {
        self.net_a.pin_output(&[PINNED_A_BIAS]);
        self.net_b.pin_output(&[0.0]);
        self.net_c.pin_output(&[PINNED_C]);
    }

    pub fn input_size(&self) -> usize {
        self.net_a.spec.input_size()
    }

    pub fn heads(&self, s: &[f64]) -> Result<QuadraticHeads> {
        Ok(QuadraticHeads {
            a: self.net_a.predict(s)?[0],
            b: self.net_b.predict(s)?[0],
            c: self.net_c.predict(s)?[0],
        })
    }

    /// Heads at every row of a row-major state matrix.
    pub fn heads_batch(&self, states: &[f64]) -> Result<Vec<QuadraticHeads>> {
        let a = self.net_a.predict_batch(states)?;
        let b = self.net_b.predict_batch(states)?;
        let c = self.net_c.predict_batch(states)?;
        Ok(a.into_iter()
            .zip(b)
            .zip(c)
            .map(|((a, b), c)| QuadraticHeads { a, b, c })
            .collect())
    }

    /// `max_a Q` at each head, exact vertex value when unclamped.
    pub fn max_q_of(&self, h: &QuadraticHeads) -> f64 {
        let a = self.clamp_action(h.b);
        if a == h.b {
            h.c
        } else {
            h.q(a)
        }
    }

    pub fn clamp_action(&self, a: f64) -> f64 {
        a.clamp(self.action_bounds.0, self.action_bounds.1)
    }

    /// Deterministic checksum over all three heads.
    pub fn checksum(&self) -> u64 {
        [&self.net_a, &self.net_b, &self.net_c]
            .iter()
            .fold(0u64, |h, n| h.rotate_left(21) ^ n.params.checksum())
    }

    pub fn is_finite(&self) -> bool {
        [&self.net_a, &self.net_b, &self.net_c].iter().all(|n| n.params.is_finite())
    }
}

pub fn quadratic_q_value(m: &QuadraticQModel, s: &[f64], action: f64) -> Result<f64> {
    Ok(m.heads(s)?.q(action))
}

/// `clamp(B(s))`: the maximizer of a concave parabola over the action interval.
pub fn greedy_action(m: &QuadraticQModel, s: &[f64]) -> Result<f64> {
    Ok(m.clamp_action(m.net_b.predict(s)?[0]))
}

pub fn max_q(m: &QuadraticQModel, s: &[f64]) -> Result<f64> {
    Ok(m.max_q_of(&m.heads(s)?))
}

pub fn select_continuous<R: Rng>(m: &QuadraticQModel, s: &[f64], noise_std: f64, rng: &mut R) -> Result<f64> {
    if !(noise_std >= 0.0) {
        return Err(Error::Domain(format!("exploration noise {noise_std} must be non-negative")));
    }
    let greedy = greedy_action(m, s)?;
    if noise_std == 0.0 {
        return Ok(greedy);
    }
    let noise = Normal::new(0.0, noise_std)
        .map_err(|e| Error::Domain(format!("exploration noise {noise_std}: {e}")))?
        .sample(rng);
    Ok(m.clamp_action(greedy + noise))
}

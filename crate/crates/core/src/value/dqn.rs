use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, MlpSpec, OutputTransform};

pub const N_DECISIONS: usize = 2;

/// Discrete decision values: output 0 is "stay", output 1 is "change lane".
#[derive(Debug, Clone, PartialEq)]
pub struct DqnModel {
    pub net: Mlp,
}

impl DqnModel {
    pub fn new<R: Rng>(input_dim: usize, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::new(vec![input_dim, 128, 128, N_DECISIONS], Activation::Relu, OutputTransform::Identity)?;
        Ok(Self { net: Mlp::new(spec, rng) })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net.spec.output_size() != N_DECISIONS {
            return Err(Error::Contract(format!(
                "decision network must have {N_DECISIONS} outputs, found {}",
                net.spec.output_size()
            )));
        }
        Ok(Self { net })
    }

    pub fn q_values(&self, s: &[f64]) -> Result<[f64; N_DECISIONS]> {
        let q = self.net.predict(s)?;
        Ok([q[0], q[1]])
    }

    /// Row-major `rows × 2` values for a row-major state matrix.
    pub fn q_values_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        self.net.predict_batch(states)
    }

    pub fn checksum(&self) -> u64 {
        self.net.params.checksum()
    }
}

/// Index of the larger value; ties go to 0 (stay).
pub fn argmax_decision(q: [f64; N_DECISIONS]) -> usize {
    usize::from(q[1] > q[0])
}

pub fn select_discrete<R: Rng>(dqn: &DqnModel, s: &[f64], eps: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0, 1]")));
    }
    if eps > 0.0 && rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..N_DECISIONS));
    }
    Ok(argmax_decision(dqn.q_values(s)?))
}

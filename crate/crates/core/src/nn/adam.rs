use super::mlp::{MlpParams, MlpSpec};
use crate::error::{Error, Result};

/// Adam optimizer state for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(spec: &MlpSpec, lr: f64) -> Self {
        Self {
            m: MlpParams::zeros(spec),
            v: MlpParams::zeros(spec),
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(params: &mut MlpParams, grads: &MlpParams, state: &mut AdamState) -> Result<()> {
    let same_shape = |a: &MlpParams, b: &MlpParams| {
        a.layers().len() == b.layers().len()
            && a.layers()
                .iter()
                .zip(b.layers())
                .all(|(x, y)| x.weights.len() == y.weights.len() && x.biases.len() == y.biases.len())
    };
    if !same_shape(params, grads) || !same_shape(params, &state.m) {
        return Err(Error::Contract("Adam: parameter, gradient and moment shapes differ".into()));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powf(state.step as f64);
    let bc2 = 1.0 - b2.powf(state.step as f64);
    let step_size = state.lr / bc1;
    let (eps, bc2_sqrt) = (state.eps, bc2.sqrt());

    let (m_layers, v_layers) = (state.m.layers_mut(), state.v.layers_mut());
    for (((p, g), m), v) in params.layers_mut().iter_mut().zip(grads.layers()).zip(m_layers).zip(v_layers) {
        let slices = [
            (&mut p.weights, &g.weights, &mut m.weights, &mut v.weights),
            (&mut p.biases, &g.biases, &mut m.biases, &mut v.biases),
        ];
        for (p, g, m, v) in slices {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step_size * *m / (v.sqrt() / bc2_sqrt + eps);
            }
        }
    }
    Ok(())
}

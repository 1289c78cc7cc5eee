//! Minibatch forward and backward passes on row-major matrices, built on a blocked GEMM.

use super::mlp::{fresh_version, MlpParams, MlpSpec};
use crate::error::{Error, Result};

/// Intermediates of a batched forward pass; matrices are row-major `rows × width`.
#[derive(Debug, Clone)]
pub struct BatchCache {
    rows: usize,
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    version: u64,
}

impl BatchCache {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Strided view of an `r × c` matrix: element `(i, j)` lives at `i·rs + j·cs`.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rs: usize,
    cs: usize,
}

impl View<'_> {
    fn covers(&self, r: usize, c: usize) -> bool {
        r == 0 || c == 0 || (r - 1) * self.rs + (c - 1) * self.cs < self.data.len()
    }
}

/// `C ← A·B + beta·C` for `A: m × k`, `B: k × n` and row-major `C: m × n`.
fn gemm(m: usize, k: usize, n: usize, a: View, b: View, beta: f64, c: &mut [f64]) {
    assert!(a.covers(m, k) && b.covers(k, n) && c.len() >= m * n, "gemm operands out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the assertion above keeps every strided access inside the borrowed slices, and
    // `c` is exclusively borrowed so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_batch(spec: &MlpSpec, params: &MlpParams, inputs: &[f64]) -> Result<usize> {
    let width = spec.input_size();
    if !inputs.len().is_multiple_of(width) {
        return Err(Error::Contract(format!(
            "batch of {} values is not a whole number of {width}-wide rows",
            inputs.len()
        )));
    }
    if !params.matches(spec) {
        return Err(Error::Contract("parameter shapes do not match the network spec".into()));
    }
    Ok(inputs.len() / width)
}

/// Pre-activations of every layer plus the network output.
fn run_forward(spec: &MlpSpec, params: &MlpParams, inputs: &[f64], rows: usize, keep: bool) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = spec.n_layers();
    let (mut layer_inputs, mut pre) = (Vec::new(), Vec::new());
    let mut x = inputs.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let (inp, out) = (layer.inputs, layer.outputs);
        let mut z: Vec<f64> = (0..rows).flat_map(|_| layer.biases.iter().copied()).collect();
        // Z = X·Wᵀ + bias
        gemm(
            rows,
            inp,
            out,
            View { data: &x, rs: inp, cs: 1 },
            View { data: &layer.weights, rs: 1, cs: inp },
            1.0,
            &mut z,
        );
        let next = if i + 1 == n {
            z.iter().map(|&v| spec.output_transform.apply(v)).collect()
        } else {
            z.iter().map(|&v| spec.hidden_activation.apply(v)).collect()
        };
        if keep {
            layer_inputs.push(std::mem::replace(&mut x, next));
            pre.push(z);
        } else {
            x = next;
        }
    }
    (x, layer_inputs, pre)
}

/// Batched forward pass over row-major `inputs`; returns row-major outputs.
pub fn mlp_forward_batch(spec: &MlpSpec, params: &MlpParams, inputs: &[f64]) -> Result<(Vec<f64>, BatchCache)> {
    let rows = check_batch(spec, params, inputs)?;
    let (y, inputs, pre) = run_forward(spec, params, inputs, rows, true);
    Ok((
        y,
        BatchCache {
            rows,
            inputs,
            pre,
            version: params.version,
        },
    ))
}

pub fn mlp_predict_batch(spec: &MlpSpec, params: &MlpParams, inputs: &[f64]) -> Result<Vec<f64>> {
    let rows = check_batch(spec, params, inputs)?;
    Ok(run_forward(spec, params, inputs, rows, false).0)
}

/// Accumulates the gradient of `Σ_rows output_row · gradient_row` into `grads`.
pub fn mlp_backward_batch_into(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &BatchCache,
    output_gradients: &[f64],
    grads: &mut MlpParams,
) -> Result<()> {
    if cache.version != params.version {
        return Err(Error::Contract("forward cache is stale for these parameters".into()));
    }
    let rows = cache.rows;
    if output_gradients.len() != rows * spec.output_size() || !grads.matches(spec) {
        return Err(Error::Contract("gradient shape does not match the network spec".into()));
    }
    grads.version = fresh_version();
    let n = spec.n_layers();
    let mut delta: Vec<f64> = output_gradients
        .iter()
        .zip(&cache.pre[n - 1])
        .map(|(g, &z)| g * spec.output_transform.derivative(z))
        .collect();
    for i in (0..n).rev() {
        let layer = &params.layers[i];
        let (inp, out) = (layer.inputs, layer.outputs);
        let g = &mut grads.layers[i];
        // dW += Δᵀ·X
        gemm(
            out,
            rows,
            inp,
            View { data: &delta, rs: 1, cs: out },
            View { data: &cache.inputs[i], rs: inp, cs: 1 },
            1.0,
            &mut g.weights,
        );
        for row in delta.chunks_exact(out) {
            for (b, d) in g.biases.iter_mut().zip(row) {
                *b += d;
            }
        }
        if i == 0 {
            break;
        }
        // U = Δ·W
        let mut upstream = vec![0.0; rows * inp];
        gemm(
            rows,
            out,
            inp,
            View { data: &delta, rs: out, cs: 1 },
            View { data: &layer.weights, rs: inp, cs: 1 },
            0.0,
            &mut upstream,
        );
        delta = upstream
            .into_iter()
            .zip(&cache.pre[i - 1])
            .map(|(u, &z)| u * spec.hidden_activation.derivative(z))
            .collect();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_backward_into, mlp_forward, Activation, OutputTransform};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Summation order differs from the row-at-a-time path; only rounding may differ.
    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn batch_matches_rows(
            seed in any::<u64>(),
            rows in 1usize..11,
            hidden in 1usize..13,
            width in 1usize..10,
            relu in any::<bool>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let act = if relu { Activation::Relu } else { Activation::Tanh };
            let spec = MlpSpec::new(vec![width, hidden, hidden + 1, 2], act, OutputTransform::NegatedSoftplus).unwrap();
            let params = MlpParams::init(&spec, &mut rng);
            let inputs: Vec<f64> = (0..rows * width).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out_grads: Vec<f64> = (0..rows * 2).map(|_| rng.random_range(-1.0..1.0)).collect();

            let (y, cache) = mlp_forward_batch(&spec, &params, &inputs).unwrap();
            prop_assert_eq!(&y, &mlp_predict_batch(&spec, &params, &inputs).unwrap());
            let mut g_batch = MlpParams::zeros(&spec);
            mlp_backward_batch_into(&spec, &params, &cache, &out_grads, &mut g_batch).unwrap();

            let mut g_rows = MlpParams::zeros(&spec);
            for r in 0..rows {
                let (yr, c) = mlp_forward(&spec, &params, &inputs[r * width..(r + 1) * width]).unwrap();
                for (a, b) in yr.iter().zip(&y[r * 2..r * 2 + 2]) {
                    prop_assert!(close(*a, *b), "{a} vs {b}");
                }
                mlp_backward_into(&spec, &params, &c, &out_grads[r * 2..r * 2 + 2], &mut g_rows).unwrap();
            }
            for (a, b) in g_batch.values().zip(g_rows.values()) {
                prop_assert!(close(a, b), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn ragged_batch_is_rejected() {
        let spec = MlpSpec::new(vec![3, 2], Activation::Relu, OutputTransform::Identity).unwrap();
        let params = MlpParams::zeros(&spec);
        assert!(mlp_forward_batch(&spec, &params, &[0.0; 7]).is_err());
        assert_eq!(mlp_predict_batch(&spec, &params, &[]).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn stale_batch_cache_is_rejected() {
        let spec = MlpSpec::new(vec![2, 2], Activation::Relu, OutputTransform::Identity).unwrap();
        let mut params = MlpParams::init(&spec, &mut ChaCha8Rng::seed_from_u64(0));
        let (_, cache) = mlp_forward_batch(&spec, &params, &[1.0, 2.0]).unwrap();
        params.layers_mut()[0].biases[0] = 1.0;
        let mut g = MlpParams::zeros(&spec);
        assert!(mlp_backward_batch_into(&spec, &params, &cache, &[1.0, 1.0], &mut g).is_err());
    }
}

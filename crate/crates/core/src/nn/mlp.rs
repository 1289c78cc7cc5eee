use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softplus,
    Tanh,
}

/// Transform applied to the last layer's affine output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputTransform {
    Identity,
    /// `-log(1 + eˣ)`: strictly negative output.
    NegatedSoftplus,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "softplus" => Some(Activation::Softplus),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub(super) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    pub(super) fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

impl OutputTransform {
    pub fn name(self) -> &'static str {
        match self {
            OutputTransform::Identity => "identity",
            OutputTransform::NegatedSoftplus => "negated_softplus",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(OutputTransform::Identity),
            "negated_softplus" => Some(OutputTransform::NegatedSoftplus),
            _ => None,
        }
    }

    pub(super) fn apply(self, z: f64) -> f64 {
        match self {
            OutputTransform::Identity => z,
            OutputTransform::NegatedSoftplus => -softplus(z),
        }
    }

    pub(super) fn derivative(self, z: f64) -> f64 {
        match self {
            OutputTransform::Identity => 1.0,
            OutputTransform::NegatedSoftplus => -sigmoid(z),
        }
    }
}

/// Numerically stable `log(1 + eˣ)`.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_transform: OutputTransform,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, hidden_activation: Activation, output_transform: OutputTransform) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Contract(format!("invalid layer sizes {layer_sizes:?}")));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_transform,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// One affine layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

pub(super) fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Weights and biases of every layer. The version tag changes on every mutation so a forward
/// cache can be checked against the parameters it came from.
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub(super) layers: Vec<Dense>,
    pub(super) version: u64,
}

impl PartialEq for MlpParams {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl MlpParams {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let layers = spec
            .layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Self::from_layers(layers)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut p = Self::zeros(spec);
        for layer in &mut p.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        p
    }

    pub fn from_layers(layers: Vec<Dense>) -> Self {
        Self {
            layers,
            version: fresh_version(),
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.version = fresh_version();
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn matches(&self, spec: &MlpSpec) -> bool {
        self.layers.len() == spec.n_layers()
            && self
                .layers
                .iter()
                .zip(spec.layer_sizes.windows(2))
                .all(|(l, w)| {
                    l.inputs == w[0] && l.outputs == w[1] && l.weights.len() == w[0] * w[1] && l.biases.len() == w[1]
                })
    }

    pub fn fill_zero(&mut self) {
        for x in self.values_mut() {
            *x = 0.0;
        }
    }

    /// `self += scale * other`, shapes assumed equal.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) {
        self.version = fresh_version();
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(&mut a.weights, scale, &b.weights);
            axpy(&mut a.biases, scale, &b.biases);
        }
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in self.values() {
            for byte in x.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Intermediate values of a forward pass needed by [`mlp_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (the first is the network input).
    inputs: Vec<Vec<f64>>,
    /// Affine output of each layer before its activation/transform.
    pre: Vec<Vec<f64>>,
    version: u64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(super) fn check_input(spec: &MlpSpec, params: &MlpParams, input: &[f64]) -> Result<()> {
    if input.len() != spec.input_size() {
        return Err(Error::Contract(format!(
            "input has {} components, network expects {}",
            input.len(),
            spec.input_size()
        )));
    }
    if !params.matches(spec) {
        return Err(Error::Contract("parameter shapes do not match the network spec".into()));
    }
    Ok(())
}

fn affine(layer: &Dense, x: &[f64]) -> Vec<f64> {
    (0..layer.outputs).map(|o| dot(layer.row(o), x) + layer.biases[o]).collect()
}

pub fn mlp_forward(spec: &MlpSpec, params: &MlpParams, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    check_input(spec, params, input)?;
    let n = spec.n_layers();
    let mut inputs = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n);
    let mut x = input.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = affine(layer, &x);
        inputs.push(x);
        x = if i + 1 == n {
            z.iter().map(|&v| spec.output_transform.apply(v)).collect()
        } else {
            z.iter().map(|&v| spec.hidden_activation.apply(v)).collect()
        };
        pre.push(z);
    }
    Ok((
        x,
        ForwardCache {
            inputs,
            pre,
            version: params.version,
        },
    ))
}

/// Forward pass without keeping intermediates.
pub fn mlp_predict(spec: &MlpSpec, params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    check_input(spec, params, input)?;
    let n = spec.n_layers();
    let mut x = input.to_vec();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = affine(layer, &x);
        x = if i + 1 == n {
            z.into_iter().map(|v| spec.output_transform.apply(v)).collect()
        } else {
            z.into_iter().map(|v| spec.hidden_activation.apply(v)).collect()
        };
    }
    Ok(x)
}

/// Accumulate `d(output · output_gradient)/dθ` into `grads`.
pub fn mlp_backward_into(
    spec: &MlpSpec,
    params: &MlpParams,
    cache: &ForwardCache,
    output_gradient: &[f64],
    grads: &mut MlpParams,
) -> Result<()> {
    if cache.version != params.version {
        return Err(Error::Contract("forward cache is stale for these parameters".into()));
    }
    if output_gradient.len() != spec.output_size() || !grads.matches(spec) {
        return Err(Error::Contract("gradient shape does not match the network spec".into()));
    }
    grads.version = fresh_version();
    let n = spec.n_layers();
    let mut delta: Vec<f64> = output_gradient
        .iter()
        .zip(&cache.pre[n - 1])
        .map(|(g, &z)| g * spec.output_transform.derivative(z))
        .collect();
    for i in (0..n).rev() {
        let layer = &params.layers[i];
        let g = &mut grads.layers[i];
        let x = &cache.inputs[i];
        for (o, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(&mut g.weights[o * layer.inputs..(o + 1) * layer.inputs], d, x);
            }
            g.biases[o] += d;
        }
        if i == 0 {
            break;
        }
        let mut upstream = vec![0.0; layer.inputs];
        for (o, &d) in delta.iter().enumerate() {
            if d != 0.0 {
                axpy(&mut upstream, d, layer.row(o));
            }
        }
        delta = upstream
            .into_iter()
            .zip(&cache.pre[i - 1])
            .map(|(u, &z)| u * spec.hidden_activation.derivative(z))
            .collect();
    }
    Ok(())
}

/// Exact reverse-mode gradient of `output · output_gradient` for every parameter.
pub fn mlp_backward(spec: &MlpSpec, params: &MlpParams, cache: &ForwardCache, output_gradient: &[f64]) -> Result<MlpParams> {
    let mut grads = MlpParams::zeros(spec);
    mlp_backward_into(spec, params, cache, output_gradient, &mut grads)?;
    Ok(grads)
}

/// A network together with its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new<R: Rng>(spec: MlpSpec, rng: &mut R) -> Self {
        let params = MlpParams::init(&spec, rng);
        Self { spec, params }
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        mlp_predict(&self.spec, &self.params, input)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        mlp_forward(&self.spec, &self.params, input)
    }

    pub fn backward_into(&self, cache: &ForwardCache, output_gradient: &[f64], grads: &mut MlpParams) -> Result<()> {
        mlp_backward_into(&self.spec, &self.params, cache, output_gradient, grads)
    }

    pub fn predict_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        super::batch::mlp_predict_batch(&self.spec, &self.params, inputs)
    }

    pub fn forward_batch(&self, inputs: &[f64]) -> Result<(Vec<f64>, super::batch::BatchCache)> {
        super::batch::mlp_forward_batch(&self.spec, &self.params, inputs)
    }

    pub fn backward_batch_into(
        &self,
        cache: &super::batch::BatchCache,
        output_gradients: &[f64],
        grads: &mut MlpParams,
    ) -> Result<()> {
        super::batch::mlp_backward_batch_into(&self.spec, &self.params, cache, output_gradients, grads)
    }

    /// Zero the last layer's weights and set its biases, pinning the output for every input.
    pub fn pin_output(&mut self, biases: &[f64]) {
        let last = self.params.layers_mut().last_mut().expect("at least one layer");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.biases.copy_from_slice(biases);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent forward pass: plain nested loops, activations written out longhand.
    #[allow(clippy::needless_range_loop)]
    fn oracle_forward(spec: &MlpSpec, params: &MlpParams, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        let layers = params.layers();
        for (li, layer) in layers.iter().enumerate() {
            let mut out = vec![0.0; layer.outputs];
            for o in 0..layer.outputs {
                let mut s = layer.biases[o];
                for i in 0..layer.inputs {
                    s += layer.weights[o * layer.inputs + i] * x[i];
                }
                out[o] = if li + 1 == layers.len() {
                    match spec.output_transform {
                        OutputTransform::Identity => s,
                        OutputTransform::NegatedSoftplus => -(1.0 + s.exp()).ln(),
                    }
                } else {
                    match spec.hidden_activation {
                        Activation::Relu => {
                            if s > 0.0 {
                                s
                            } else {
                                0.0
                            }
                        }
                        Activation::Softplus => (1.0 + s.exp()).ln(),
                        Activation::Tanh => (s.exp() - (-s).exp()) / (s.exp() + (-s).exp()),
                    }
                };
            }
            x = out;
        }
        x
    }

    fn random_net(rng: &mut ChaCha8Rng, sizes: Vec<usize>, act: Activation, out: OutputTransform) -> Mlp {
        let spec = MlpSpec::new(sizes, act, out).unwrap();
        let mut net = Mlp::new(spec, rng);
        for b in net.params.values_mut() {
            *b += rng.random_range(-0.3..0.3);
        }
        net
    }

    fn scalar_objective(net: &Mlp, x: &[f64], g: &[f64]) -> f64 {
        net.predict(x).unwrap().iter().zip(g).map(|(a, b)| a * b).sum()
    }

    const ACTS: [Activation; 3] = [Activation::Relu, Activation::Softplus, Activation::Tanh];
    const OUTS: [OutputTransform; 2] = [OutputTransform::Identity, OutputTransform::NegatedSoftplus];

    #[test]
    fn identity_layer_passes_input_through() {
        let spec = MlpSpec::new(vec![3, 3], Activation::Relu, OutputTransform::Identity).unwrap();
        let mut params = MlpParams::zeros(&spec);
        for k in 0..3 {
            params.layers_mut()[0].weights[k * 3 + k] = 1.0;
        }
        let (y, _) = mlp_forward(&spec, &params, &[1.5, -2.0, 0.25]).unwrap();
        assert_eq!(y, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn negated_softplus_is_strictly_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = random_net(&mut rng, vec![4, 8, 3], Activation::Relu, OutputTransform::NegatedSoftplus);
        for _ in 0..200 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-50.0..50.0)).collect();
            assert!(net.predict(&x).unwrap().iter().all(|&y| y < 0.0));
        }
        assert!(OutputTransform::NegatedSoftplus.apply(30.0) < 0.0);
        assert!(OutputTransform::NegatedSoftplus.apply(-700.0) < 0.0);
    }

    #[test]
    fn forward_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for act in ACTS {
            for out in OUTS {
                let net = random_net(&mut rng, vec![3, 4, 2], act, out);
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let y = net.predict(&x).unwrap();
                let (y2, _) = net.forward(&x).unwrap();
                let o = oracle_forward(&net.spec, &net.params, &x);
                assert_eq!(y, y2);
                for (a, b) in y.iter().zip(&o) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = random_net(&mut rng, vec![3, 5, 2], Activation::Tanh, OutputTransform::Identity);
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = mlp_backward(&net.spec, &net.params, &cache, &[0.0, 0.0]).unwrap();
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn linear_layer_gradient_is_input() {
        let spec = MlpSpec::new(vec![3, 1], Activation::Relu, OutputTransform::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = MlpParams::init(&spec, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let (_, cache) = mlp_forward(&spec, &params, &x).unwrap();
        let g = mlp_backward(&spec, &params, &cache, &[1.0]).unwrap();
        assert_eq!(g.layers()[0].weights, x.to_vec());
        assert_eq!(g.layers()[0].biases, vec![1.0]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for case in 0..100 {
            let act = ACTS[case % 3];
            let out = OUTS[(case / 3) % 2];
            let sizes = vec![rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..5), rng.random_range(1..3)];
            let mut net = random_net(&mut rng, sizes, act, out);
            let x: Vec<f64> = (0..net.spec.input_size()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g: Vec<f64> = (0..net.spec.output_size()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, cache) = net.forward(&x).unwrap();
            let analytic: Vec<f64> = mlp_backward(&net.spec, &net.params, &cache, &g).unwrap().values().collect();
            assert_eq!(analytic.len(), net.params.num_params());
            for (k, &a) in analytic.iter().enumerate() {
                let base = net.params.values().nth(k).unwrap();
                *net.params.values_mut().nth(k).unwrap() = base + h;
                let plus = scalar_objective(&net, &x, &g);
                *net.params.values_mut().nth(k).unwrap() = base - h;
                let minus = scalar_objective(&net, &x, &g);
                *net.params.values_mut().nth(k).unwrap() = base;
                let fd = (plus - minus) / (2.0 * h);
                // relu kinks make finite differences meaningless right at zero pre-activation
                let err = (fd - a).abs() / a.abs().max(fd.abs()).max(1e-2);
                assert!(err < 1e-4, "case {case} param {k}: analytic {a} fd {fd}");
            }
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = random_net(&mut rng, vec![2, 3, 1], Activation::Relu, OutputTransform::Identity);
        let (_, cache) = net.forward(&[1.0, 2.0]).unwrap();
        net.params.layers_mut()[0].biases[0] += 1.0;
        assert!(matches!(
            mlp_backward(&net.spec, &net.params, &cache, &[1.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = random_net(&mut rng, vec![2, 3, 1], Activation::Relu, OutputTransform::Identity);
        assert!(matches!(net.predict(&[1.0]), Err(Error::Contract(_))));
        assert!(MlpSpec::new(vec![3], Activation::Relu, OutputTransform::Identity).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::Relu, OutputTransform::Identity).is_err());
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = random_net(&mut rng, vec![4, 16, 16, 2], Activation::Softplus, OutputTransform::Identity);
        let x = [0.3, -0.2, 0.9, 1.1];
        let a = net.predict(&x).unwrap();
        let b = net.predict(&x).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{Activation, Mode};
use crate::{Error, Result};

/// One affine layer followed by an activation. `weights` is `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
}

/// Activation trace of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `values[0]` is the input batch, `values[l + 1]` the output of layer `l`.
    values: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    slopes: Vec<Option<Array2<f64>>>,
}

impl ForwardCache {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.values.last().expect("cache holds at least the input").view()
    }

    pub fn batch_size(&self) -> usize {
        self.values[0].nrows()
    }
}

/// Exact gradients of `Σ_rows upstream · y` with respect to the parameters
/// (summed over the batch) and to each input row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl DenseNet {
    /// Uniform fan-in initialization (`±1/√fan_in`) with zero biases.
    pub fn init(layer_sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        check_architecture(layer_sizes, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weights =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..=bound));
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn zeros(layer_sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        check_architecture(layer_sizes, activations)?;
        let layers = layer_sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Dense {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
                activation,
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    /// Builds a network from explicit layers, validating shapes and finiteness.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("network needs at least one layer".into()))?;
        let mut sizes = vec![first.fan_in()];
        for (l, layer) in layers.iter().enumerate() {
            if layer.fan_in() != *sizes.last().unwrap() {
                return Err(Error::Config(format!(
                    "layer {l} expects {} inputs but previous width is {}",
                    layer.fan_in(),
                    sizes.last().unwrap()
                )));
            }
            if layer.bias.len() != layer.fan_out() {
                return Err(Error::Config(format!("layer {l} bias length mismatch")));
            }
            sizes.push(layer.fan_out());
        }
        let acts: Vec<_> = layers.iter().map(|l| l.activation).collect();
        check_architecture(&sizes, &acts)?;
        let net = Self {
            layer_sizes: sizes,
            layers: layers
                .into_iter()
                .map(|mut l| {
                    // keep standard layout so parameter slices are contiguous
                    l.weights = l.weights.as_standard_layout().into_owned();
                    l
                })
                .collect(),
        };
        if !net.is_finite() {
            return Err(Error::Numeric("network parameters must be finite".into()));
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn same_architecture(&self, other: &DenseNet) -> bool {
        self.layer_sizes == other.layer_sizes && self.activations() == other.activations()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Parameter blocks in canonical order: `w0, b0, w1, b1, …`.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_blocks().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for block in self.param_blocks_mut() {
            block.copy_from_slice(&flat[offset..offset + block.len()]);
            offset += block.len();
        }
        Ok(())
    }

    /// Batched forward pass. Each row of `x` is one sample.
    pub fn forward(&self, x: ArrayView2<'_, f64>, mut mode: Mode<'_>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(x)?;
        let depth = self.layers.len();
        let mut values = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        let mut slopes = Vec::with_capacity(depth);
        values.push(x.to_owned());
        for layer in &self.layers {
            let mut z = values.last().unwrap().dot(&layer.weights.t());
            z += &layer.bias;
            let (post, s) = layer.activation.apply(&z, &mut mode);
            pre.push(z);
            slopes.push(s);
            values.push(post);
        }
        let y = values.last().unwrap().clone();
        Ok((y, ForwardCache { values, pre, slopes }))
    }

    /// Eval-mode forward pass without keeping a cache.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut mode = Mode::Eval;
        let mut h = x.to_owned();
        for layer in &self.layers {
            let mut z = h.dot(&layer.weights.t());
            z += &layer.bias;
            h = layer.activation.apply(&z, &mut mode).0;
        }
        Ok(h)
    }

    /// Single-sample eval-mode forward pass.
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Contract(e.to_string()))?;
        Ok(self.predict(x)?.into_raw_vec_and_offset().0)
    }

    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<GradientBundle> {
        let depth = self.layers.len();
        if cache.pre.len() != depth
            || cache
                .pre
                .iter()
                .zip(&self.layers)
                .any(|(z, l)| z.ncols() != l.fan_out())
            || cache.values[0].ncols() != self.input_width()
        {
            return Err(Error::Contract("forward cache does not match this network".into()));
        }
        let batch = cache.batch_size();
        if upstream.dim() != (batch, self.output_width()) {
            return Err(Error::Contract(format!(
                "upstream shape {:?} does not match output ({batch}, {})",
                upstream.dim(),
                self.output_width()
            )));
        }

        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        let mut delta = upstream.to_owned();
        for l in (0..depth).rev() {
            let layer = &self.layers[l];
            layer.activation.chain(
                &mut delta,
                &cache.pre[l],
                &cache.values[l + 1],
                cache.slopes[l].as_ref(),
            );
            let wg = delta.t().dot(&cache.values[l]);
            weights.push(if wg.is_standard_layout() {
                wg
            } else {
                wg.as_standard_layout().into_owned()
            });
            biases.push(delta.sum_axis(Axis(0)));
            delta = delta.dot(&layer.weights);
        }
        weights.reverse();
        biases.reverse();
        Ok(GradientBundle {
            weights,
            biases,
            input: delta,
        })
    }

    /// Polyak update `θ' ← τ·θ + (1−τ)·θ'` applied to `self` as the target.
    pub fn soft_update_from(&mut self, source: &DenseNet, tau: f64) -> Result<()> {
        if !self.same_architecture(source) {
            return Err(Error::Contract("soft update between different architectures".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
        }
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            t.weights.zip_mut_with(&s.weights, |t, &s| *t = tau * s + (1.0 - tau) * *t);
            t.bias.zip_mut_with(&s.bias, |t, &s| *t = tau * s + (1.0 - tau) * *t);
        }
        Ok(())
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::Contract(format!(
                "input width {} does not match network input {}",
                x.ncols(),
                self.input_width()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network input contains non-finite values".into()));
        }
        Ok(())
    }
}

fn check_architecture(layer_sizes: &[usize], activations: &[Activation]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config("need at least input and output widths".into()));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    if activations.len() != layer_sizes.len() - 1 {
        return Err(Error::Config(format!(
            "{} activation tags for {} layer transitions",
            activations.len(),
            layer_sizes.len() - 1
        )));
    }
    Ok(())
}

impl GradientBundle {
    pub fn zeros_like(net: &DenseNet, batch: usize) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            biases: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            input: Array2::zeros((batch, net.input_width())),
        }
    }

    pub fn matches(&self, net: &DenseNet) -> bool {
        self.weights.len() == net.layers.len()
            && self
                .weights
                .iter()
                .zip(&self.biases)
                .zip(&net.layers)
                .all(|((w, b), l)| w.dim() == l.weights.dim() && b.len() == l.bias.len())
            && self.input.ncols() == net.input_width()
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
        self.input *= factor;
    }

    /// Parameter-gradient blocks in the same order as [`DenseNet::param_blocks`].
    pub fn param_blocks(&self) -> Vec<ArrayView1<'_, f64>> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| {
                [
                    ArrayView1::from(w.as_slice().expect("standard layout")),
                    b.view(),
                ]
            })
            .collect()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.param_blocks().iter().flat_map(|b| b.iter().copied()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn table_actor_shape() {
        let acts = [
            Activation::LeakyRelu,
            Activation::LeakyRelu,
            Activation::LeakyRelu,
            Activation::Sigmoid,
        ];
        let net = DenseNet::init(&[5, 100, 150, 100, 1], &acts, 7).unwrap();
        assert_eq!(net.layers().len(), 4);
        assert_eq!(net.layers()[1].weights.dim(), (150, 100));
        assert_eq!(net.param_count(), 5 * 100 + 100 + 100 * 150 + 150 + 150 * 100 + 100 + 101);
        for l in net.layers() {
            let bound = 1.0 / (l.fan_in() as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.bias.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = DenseNet::init(&[2, 1], &[Activation::Linear], 11).unwrap();
        let b = DenseNet::init(&[2, 1], &[Activation::Linear], 11).unwrap();
        let c = DenseNet::init(&[2, 1], &[Activation::Linear], 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_rejects_bad_architectures() {
        let err = DenseNet::init(&[3, 2], &[Activation::Sigmoid, Activation::Linear], 0);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(DenseNet::init(&[3, 0, 1], &[Activation::Linear; 2], 0).is_err());
        assert!(DenseNet::init(&[3], &[], 0).is_err());
    }

    #[test]
    fn affine_forward() {
        let net = DenseNet::from_layers(vec![Dense {
            weights: array![[2.0]],
            bias: array![1.0],
            activation: Activation::Linear,
        }])
        .unwrap();
        assert_eq!(net.predict_one(&[3.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn zero_sigmoid_net_outputs_half() {
        let net = DenseNet::zeros(&[4, 3, 1], &[Activation::LeakyRelu, Activation::Sigmoid]).unwrap();
        assert_eq!(net.predict_one(&[1.0, -2.0, 3.0, 9.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let net = DenseNet::init(
            &[3, 6, 6, 6, 1],
            &[Activation::Rrelu, Activation::Rrelu, Activation::Rrelu, Activation::Sigmoid],
            5,
        )
        .unwrap();
        let x = array![[0.3, -1.2, 2.0]];
        let (a, _) = net.forward(x.view(), Mode::Eval).unwrap();
        let (b, _) = net.forward(x.view(), Mode::Eval).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, net.predict(x.view()).unwrap());
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let net = DenseNet::init(&[2, 1], &[Activation::Linear], 0).unwrap();
        assert!(matches!(net.predict_one(&[f64::NAN, 0.0]), Err(Error::Numeric(_))));
        assert!(matches!(net.predict_one(&[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_backward_is_transpose() {
        let net = DenseNet::from_layers(vec![Dense {
            weights: array![[1.5, -2.0, 0.25]],
            bias: array![0.5],
            activation: Activation::Linear,
        }])
        .unwrap();
        let x = array![[1.0, 2.0, 3.0]];
        let (_, cache) = net.forward(x.view(), Mode::Eval).unwrap();
        let g = net.backward(&cache, array![[1.0]].view()).unwrap();
        assert_eq!(g.input, array![[1.5, -2.0, 0.25]]);
        assert_eq!(g.weights[0], x);
        assert_eq!(g.biases[0], array![1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = DenseNet::init(&[4, 5, 2], &[Activation::Sigmoid, Activation::Linear], 1).unwrap();
        let x = array![[0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 0.0, 2.0]];
        let (_, cache) = net.forward(x.view(), Mode::Eval).unwrap();
        let g = net.backward(&cache, Array2::zeros((2, 2)).view()).unwrap();
        assert!(g.flat_params().iter().all(|&v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let a = DenseNet::init(&[3, 4, 1], &[Activation::Sigmoid, Activation::Linear], 1).unwrap();
        let b = DenseNet::init(&[3, 5, 1], &[Activation::Sigmoid, Activation::Linear], 1).unwrap();
        let (_, cache) = a.forward(array![[1.0, 2.0, 3.0]].view(), Mode::Eval).unwrap();
        assert!(matches!(b.backward(&cache, array![[1.0]].view()), Err(Error::Contract(_))));
    }

    #[test]
    fn soft_update_cases() {
        let src = DenseNet::init(&[3, 4, 1], &[Activation::LeakyRelu, Activation::Linear], 1).unwrap();
        let mut tgt = DenseNet::init(&[3, 4, 1], &[Activation::LeakyRelu, Activation::Linear], 2).unwrap();
        let before = tgt.clone();
        tgt.soft_update_from(&src, 0.0).unwrap();
        assert_eq!(tgt, before);
        tgt.soft_update_from(&src, 1.0).unwrap();
        assert_eq!(tgt, src);

        let mut zero = DenseNet::zeros(&[1, 1], &[Activation::Linear]).unwrap();
        let mut one = zero.clone();
        one.set_flat_params(&[1.0, 1.0]).unwrap();
        zero.soft_update_from(&one, 0.005).unwrap();
        assert_eq!(zero.flat_params(), vec![0.005, 0.005]);

        let other = DenseNet::init(&[3, 5, 1], &[Activation::LeakyRelu, Activation::Linear], 1).unwrap();
        assert!(matches!(tgt.soft_update_from(&other, 0.5), Err(Error::Contract(_))));
    }

    #[test]
    fn soft_update_contracts_geometrically() {
        let src = DenseNet::init(&[2, 3, 1], &[Activation::Sigmoid, Activation::Linear], 1).unwrap();
        let mut tgt = DenseNet::init(&[2, 3, 1], &[Activation::Sigmoid, Activation::Linear], 9).unwrap();
        let dist = |a: &DenseNet, b: &DenseNet| -> f64 {
            a.flat_params()
                .iter()
                .zip(b.flat_params())
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let tau = 0.05;
        let mut prev = dist(&tgt, &src);
        for _ in 0..50 {
            tgt.soft_update_from(&src, tau).unwrap();
            let d = dist(&tgt, &src);
            assert!((d - (1.0 - tau) * prev).abs() <= 1e-12 * prev.max(1.0));
            prev = d;
        }
    }
}

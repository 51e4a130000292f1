use rand::Rng;

use super::{Activation, Head, LayerSpec, NeuralError, Shape};
use crate::scalar::Scalar;

/// Layer stack plus parameters. `version` advances on every parameter
/// update so that caches from an older state can be recognised.
#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    input: Shape,
    layers: Vec<LayerSpec>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output.
    shapes: Vec<Shape>,
    weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
    head: Head,
    version: u64,
}

impl<T: PartialEq> PartialEq for QNetwork<T> {
    fn eq(&self, other: &Self) -> bool {
        self.input == other.input
            && self.layers == other.layers
            && self.head == other.head
            && self.weights == other.weights
            && self.biases == other.biases
    }
}

/// Layer inputs recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    inputs: Vec<Vec<T>>,
    version: u64,
}

/// Gradient of a scalar loss with respect to every parameter, laid out like
/// the network's own weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
    /// Gradient with respect to the network input.
    pub input: Vec<T>,
}

fn conv_out(side: usize, kernel: usize, stride: usize) -> Option<usize> {
    (side >= kernel && stride > 0).then(|| (side - kernel) / stride + 1)
}

fn infer_shapes(input: Shape, layers: &[LayerSpec]) -> Result<Vec<Shape>, NeuralError> {
    let mut shapes = vec![input];
    let mut cur = input;
    for (i, layer) in layers.iter().enumerate() {
        let bad = |message: String| NeuralError::Incompatible { layer: i, message };
        cur = match (*layer, cur) {
            (
                LayerSpec::Dense { inputs, outputs } | LayerSpec::Linear { inputs, outputs },
                Shape::Vector { len },
            ) => {
                if inputs != len {
                    return Err(bad(format!(
                        "dense expects {inputs} inputs, receives {len}"
                    )));
                }
                if outputs == 0 {
                    return Err(bad("dense layer with no outputs".into()));
                }
                Shape::Vector { len: outputs }
            }
            (LayerSpec::Dense { .. } | LayerSpec::Linear { .. }, Shape::Image { .. }) => {
                return Err(bad("dense layer needs a flattened input".into()))
            }
            (
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                },
                Shape::Image { side, .. },
            ) => {
                let out = conv_out(side, kernel, stride)
                    .filter(|_| filters > 0 && kernel > 0)
                    .ok_or_else(|| {
                        bad(format!(
                            "kernel {kernel}/stride {stride} does not fit side {side}"
                        ))
                    })?;
                Shape::Image {
                    channels: filters,
                    side: out,
                }
            }
            (LayerSpec::Conv2d { .. }, Shape::Vector { .. }) => {
                return Err(bad("convolution needs an image input".into()))
            }
            (LayerSpec::Activation { .. }, s) => s,
            (LayerSpec::Flatten, s) => Shape::Vector { len: s.len() },
        };
        shapes.push(cur);
    }
    Ok(shapes)
}

fn param_sizes(layer: &LayerSpec, input: Shape) -> (usize, usize) {
    match (*layer, input) {
        (LayerSpec::Dense { inputs, outputs }, _) => (inputs * outputs, outputs),
        (LayerSpec::Linear { inputs, outputs }, _) => (inputs * outputs, 0),
        (
            LayerSpec::Conv2d {
                filters, kernel, ..
            },
            Shape::Image { channels, .. },
        ) => (filters * channels * kernel * kernel, filters),
        _ => (0, 0),
    }
}

impl<T: Scalar> QNetwork<T> {
    /// Build a network with all parameters zero, checking layer compatibility
    /// and that the output width matches `head`.
    pub fn new(input: Shape, layers: Vec<LayerSpec>, head: Head) -> Result<Self, NeuralError> {
        let shapes = infer_shapes(input, &layers)?;
        let out = *shapes.last().expect("input shape");
        let got = match out {
            Shape::Vector { len } => len,
            Shape::Image { .. } => 0,
        };
        if got != head.width() {
            return Err(NeuralError::Head {
                head,
                expected: head.width(),
                got,
            });
        }
        let (weights, biases) = layers
            .iter()
            .zip(&shapes)
            .map(|(l, &s)| {
                let (w, b) = param_sizes(l, s);
                (vec![T::zero(); w], vec![T::zero(); b])
            })
            .unzip();
        Ok(Self {
            input,
            layers,
            shapes,
            weights,
            biases,
            head,
            version: 0,
        })
    }

    /// Redraw every parameter uniformly from `[-scale, scale]`.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R, scale: f64) {
        for p in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
        {
            *p = T::lit(rng.gen_range(-scale..=scale));
        }
        self.version += 1;
    }

    /// `[dense(in→hidden), tanh, dense(hidden→1)]` with a scalar head.
    pub fn shallow(inputs: usize, hidden: usize) -> Result<Self, NeuralError> {
        Self::new(
            Shape::Vector { len: inputs },
            vec![
                LayerSpec::Dense {
                    inputs,
                    outputs: hidden,
                },
                LayerSpec::Activation {
                    function: Activation::Tanh,
                },
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: 1,
                },
            ],
            Head::Scalar,
        )
    }

    /// Convolutional per-action network on a single-channel square image.
    pub fn deep_conv(
        side: usize,
        filters: usize,
        kernel: usize,
        stride: usize,
        hidden: usize,
    ) -> Result<Self, NeuralError> {
        let conv_side = conv_out(side, kernel, stride).ok_or(NeuralError::Incompatible {
            layer: 0,
            message: format!("kernel {kernel} larger than image side {side}"),
        })?;
        let flat = filters * conv_side * conv_side;
        Self::new(
            Shape::Image { channels: 1, side },
            vec![
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: flat,
                    outputs: hidden,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: super::ACTION_COUNT,
                },
            ],
            Head::PerAction,
        )
    }

    /// Fully connected per-action network, for when convolution is disabled.
    pub fn deep_dense(inputs: usize, hidden: usize) -> Result<Self, NeuralError> {
        Self::new(
            Shape::Vector { len: inputs },
            vec![
                LayerSpec::Dense {
                    inputs,
                    outputs: hidden,
                },
                LayerSpec::Activation {
                    function: Activation::Relu,
                },
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: super::ACTION_COUNT,
                },
            ],
            Head::PerAction,
        )
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[T] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [T] {
        self.version += 1;
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [T] {
        self.version += 1;
        &mut self.biases[layer]
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flat view of all parameters: weights then biases of each layer in order.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<(), NeuralError> {
        if flat.len() != self.param_count() {
            return Err(NeuralError::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for p in w.iter_mut().chain(b.iter_mut()) {
                *p = flat[k];
                k += 1;
            }
        }
        self.version += 1;
        Ok(())
    }

    pub fn predict(&self, input: &[T]) -> Result<Vec<T>, NeuralError> {
        self.forward(input).map(|(out, _)| out)
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>), NeuralError> {
        if input.len() != self.input.len() {
            return Err(NeuralError::Dimension {
                expected: self.input.len(),
                got: input.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let y = self.layer_forward(i, layer, &x);
            inputs.push(std::mem::replace(&mut x, y));
        }
        Ok((
            x,
            ForwardCache {
                inputs,
                version: self.version,
            },
        ))
    }

    fn layer_forward(&self, i: usize, layer: &LayerSpec, x: &[T]) -> Vec<T> {
        let (w, b) = (&self.weights[i], &self.biases[i]);
        match *layer {
            LayerSpec::Dense { inputs, outputs } | LayerSpec::Linear { inputs, outputs } => (0
                ..outputs)
                .map(|o| {
                    w[o * inputs..(o + 1) * inputs].iter().zip(x).fold(
                        b.get(o).copied().unwrap_or_else(T::zero),
                        |acc, (&wi, &xi)| acc + wi * xi,
                    )
                })
                .collect(),
            LayerSpec::Conv2d {
                filters,
                kernel,
                stride,
            } => {
                let Shape::Image { channels, side } = self.shapes[i] else {
                    unreachable!("checked at construction")
                };
                let Shape::Image { side: out, .. } = self.shapes[i + 1] else {
                    unreachable!()
                };
                let mut y = vec![T::zero(); filters * out * out];
                for f in 0..filters {
                    for oy in 0..out {
                        for ox in 0..out {
                            let mut acc = b[f];
                            for c in 0..channels {
                                for ky in 0..kernel {
                                    let row = (c * side + oy * stride + ky) * side + ox * stride;
                                    let wrow = ((f * channels + c) * kernel + ky) * kernel;
                                    for kx in 0..kernel {
                                        acc += w[wrow + kx] * x[row + kx];
                                    }
                                }
                            }
                            y[(f * out + oy) * out + ox] = acc;
                        }
                    }
                }
                y
            }
            LayerSpec::Activation { function } => x
                .iter()
                .map(|&v| match function {
                    Activation::Relu => v.max(T::zero()),
                    Activation::Tanh => v.tanh(),
                })
                .collect(),
            LayerSpec::Flatten => x.to_vec(),
        }
    }

    /// Reverse-mode gradients for a loss whose derivative with respect to
    /// the network output is `output_gradient`.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        output_gradient: &[T],
    ) -> Result<Gradients<T>, NeuralError> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(NeuralError::StaleCache);
        }
        let out_len = self.shapes.last().map_or(0, Shape::len);
        if output_gradient.len() != out_len {
            return Err(NeuralError::Dimension {
                expected: out_len,
                got: output_gradient.len(),
            });
        }
        let mut gw: Vec<Vec<T>> = self
            .weights
            .iter()
            .map(|w| vec![T::zero(); w.len()])
            .collect();
        let mut gb: Vec<Vec<T>> = self
            .biases
            .iter()
            .map(|b| vec![T::zero(); b.len()])
            .collect();
        let mut g = output_gradient.to_vec();
        for i in (0..self.layers.len()).rev() {
            let x = &cache.inputs[i];
            let w = &self.weights[i];
            g = match self.layers[i] {
                LayerSpec::Dense { inputs, outputs } | LayerSpec::Linear { inputs, outputs } => {
                    let mut gx = vec![T::zero(); inputs];
                    for o in 0..outputs {
                        let go = g[o];
                        if let Some(slot) = gb[i].get_mut(o) {
                            *slot = go;
                        }
                        if go == T::zero() {
                            continue;
                        }
                        let row = &w[o * inputs..(o + 1) * inputs];
                        let grow = &mut gw[i][o * inputs..(o + 1) * inputs];
                        for k in 0..inputs {
                            grow[k] = go * x[k];
                            gx[k] += row[k] * go;
                        }
                    }
                    gx
                }
                LayerSpec::Conv2d {
                    filters,
                    kernel,
                    stride,
                } => {
                    let Shape::Image { channels, side } = self.shapes[i] else {
                        unreachable!()
                    };
                    let Shape::Image { side: out, .. } = self.shapes[i + 1] else {
                        unreachable!()
                    };
                    let mut gx = vec![T::zero(); x.len()];
                    for f in 0..filters {
                        for oy in 0..out {
                            for ox in 0..out {
                                let go = g[(f * out + oy) * out + ox];
                                if go == T::zero() {
                                    continue;
                                }
                                gb[i][f] += go;
                                for c in 0..channels {
                                    for ky in 0..kernel {
                                        let row =
                                            (c * side + oy * stride + ky) * side + ox * stride;
                                        let wrow = ((f * channels + c) * kernel + ky) * kernel;
                                        for kx in 0..kernel {
                                            gw[i][wrow + kx] += go * x[row + kx];
                                            gx[row + kx] += go * w[wrow + kx];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    gx
                }
                LayerSpec::Activation { function } => g
                    .iter()
                    .zip(x)
                    .map(|(&gi, &xi)| match function {
                        Activation::Relu => {
                            if xi > T::zero() {
                                gi
                            } else {
                                T::zero()
                            }
                        }
                        Activation::Tanh => {
                            let t = xi.tanh();
                            gi * (T::one() - t * t)
                        }
                    })
                    .collect(),
                LayerSpec::Flatten => g,
            };
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
            input: g,
        })
    }

    /// `w ← w − learning_rate · g` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients<T>, learning_rate: T) -> Result<(), NeuralError> {
        if !(learning_rate >= T::zero()) || !learning_rate.is_finite() {
            return Err(NeuralError::LearningRate(learning_rate.to_string()));
        }
        let shapes_match = grads.weights.len() == self.weights.len()
            && grads
                .weights
                .iter()
                .zip(&self.weights)
                .all(|(a, b)| a.len() == b.len())
            && grads
                .biases
                .iter()
                .zip(&self.biases)
                .all(|(a, b)| a.len() == b.len());
        if !shapes_match {
            return Err(NeuralError::Dimension {
                expected: self.param_count(),
                got: grads
                    .weights
                    .iter()
                    .chain(&grads.biases)
                    .map(Vec::len)
                    .sum(),
            });
        }
        if grads
            .weights
            .iter()
            .chain(&grads.biases)
            .flatten()
            .any(|g| !g.is_finite())
        {
            return Err(NeuralError::NonFinite("gradient"));
        }
        for (p, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (pi, &gi) in p.iter_mut().zip(g) {
                *pi -= learning_rate * gi;
            }
        }
        for (p, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (pi, &gi) in p.iter_mut().zip(g) {
                *pi -= learning_rate * gi;
            }
        }
        self.version += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = QNetwork::<f64>::shallow(5, 10).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_dense_layer() {
        let mut net = QNetwork::<f64>::new(
            Shape::Vector { len: 3 },
            vec![LayerSpec::Dense {
                inputs: 3,
                outputs: 3,
            }],
            Head::Scalar,
        );
        assert!(matches!(net, Err(NeuralError::Head { .. })));
        // an identity map is only a legal head at width 1
        net = QNetwork::new(
            Shape::Vector { len: 1 },
            vec![LayerSpec::Dense {
                inputs: 1,
                outputs: 1,
            }],
            Head::Scalar,
        );
        let mut net = net.unwrap();
        net.weights_mut(0)[0] = 1.0;
        assert_eq!(net.predict(&[0.37]).unwrap(), vec![0.37]);
    }

    #[test]
    fn identity_square_layer_passes_vector_through() {
        let mut net = QNetwork::<f64>::deep_dense(10, 10).unwrap();
        // make layer 0 and 2 identities, relu passes non-negatives through
        for i in 0..10 {
            net.weights_mut(0)[i * 10 + i] = 1.0;
            net.weights_mut(2)[i * 10 + i] = 1.0;
        }
        let v: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        assert_eq!(net.predict(&v).unwrap(), v);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = QNetwork::<f64>::shallow(4, 10).unwrap();
        assert_eq!(
            net.predict(&[1.0; 3]).unwrap_err(),
            NeuralError::Dimension {
                expected: 4,
                got: 3
            }
        );
    }

    #[test]
    fn linear_layer_gradient() {
        let mut net = QNetwork::<f64>::new(
            Shape::Vector { len: 1 },
            vec![LayerSpec::Dense {
                inputs: 1,
                outputs: 1,
            }],
            Head::Scalar,
        )
        .unwrap();
        net.weights_mut(0)[0] = 0.7;
        let (_, cache) = net.forward(&[3.0]).unwrap();
        let g = net.backward(&cache, &[2.0]).unwrap();
        assert_eq!(g.weights[0][0], 6.0);
        assert_eq!(g.biases[0][0], 2.0);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let mut net = QNetwork::<f64>::deep_dense(1, 1).unwrap();
        net.weights_mut(0)[0] = -1.0;
        let (_, cache) = net.forward(&[2.0]).unwrap();
        let g = net.backward(&cache, &[1.0; 10]).unwrap();
        assert_eq!(g.weights[0][0], 0.0);
        assert_eq!(g.biases[0][0], 0.0);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = QNetwork::<f64>::shallow(2, 3).unwrap();
        net.init_uniform(&mut rng, 0.05);
        let (_, cache) = net.forward(&[1.0, 2.0]).unwrap();
        let g = net.backward(&cache, &[1.0]).unwrap();
        net.sgd_step(&g, 0.1).unwrap();
        assert_eq!(
            net.backward(&cache, &[1.0]).unwrap_err(),
            NeuralError::StaleCache
        );
    }

    #[test]
    fn sgd_arithmetic_and_guards() {
        let mut net = QNetwork::<f64>::new(
            Shape::Vector { len: 1 },
            vec![LayerSpec::Dense {
                inputs: 1,
                outputs: 1,
            }],
            Head::Scalar,
        )
        .unwrap();
        net.weights_mut(0)[0] = 1.0;
        let mut g = Gradients {
            weights: vec![vec![2.0]],
            biases: vec![vec![0.0]],
            input: vec![],
        };
        net.sgd_step(&g, 0.1).unwrap();
        assert!((net.weights(0)[0] - 0.8).abs() < 1e-15);
        let before = net.clone();
        g.weights[0][0] = 0.0;
        net.sgd_step(&g, 0.1).unwrap();
        assert_eq!(net, before);
        g.weights[0][0] = f64::NAN;
        assert_eq!(
            net.sgd_step(&g, 0.1).unwrap_err(),
            NeuralError::NonFinite("gradient")
        );
        assert!(net.sgd_step(&g, -1.0).is_err());
    }

    #[test]
    fn conv_shapes() {
        let net = QNetwork::<f64>::deep_conv(26, 8, 5, 2, 64).unwrap();
        assert_eq!(net.layers().len(), 6);
        assert_eq!(
            net.layers()[3],
            LayerSpec::Dense {
                inputs: 8 * 11 * 11,
                outputs: 64
            }
        );
        assert!(QNetwork::<f64>::deep_conv(3, 8, 5, 2, 64).is_err());
    }

    #[test]
    fn single_precision_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = QNetwork::<f32>::shallow(3, 4).unwrap();
        net.init_uniform(&mut rng, 0.05);
        let y = net.predict(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(y.len(), 1);
        assert!(y[0].abs() < 1.0);
    }
}

//! Dense feed-forward networks with an exact backward pass.
//!
//! Layers hold weights as `out x in` matrices. Batched inputs are
//! `batch x in` row matrices; every row is processed independently, so a
//! single input evaluated alone and the same input inside a batch produce
//! the same bits.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{Activation, NumericsError};

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self, NumericsError> {
        if weights.nrows() != bias.len() {
            return Err(NumericsError::Shape(format!(
                "bias length {} does not match {} weight rows",
                bias.len(),
                weights.nrows()
            )));
        }
        // Standard layout keeps `as_slice` available for flat parameter access.
        Ok(Self {
            weights: weights.as_standard_layout().into_owned(),
            bias,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Weights, biases and activation schedule of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParameters {
    layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Layer inputs and pre-activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.nrows())
    }

    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre_activations
    }
}

/// Gradients of `sum(output * upstream)` for every parameter and the input.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// `batch x in`, one row per input row.
    pub input: Array2<f64>,
}

impl GradientBundle {
    pub fn zeros_like(params: &MlpParameters, batch: usize) -> Self {
        Self {
            weights: params
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            biases: params
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
            input: Array2::zeros((batch, params.input_dim())),
        }
    }

    /// Parameter gradients in the same order as [`MlpParameters::tensors`].
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [slice(w), b.as_slice().expect("contiguous bias")])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| {
                [
                    w.as_slice_mut().expect("contiguous weights"),
                    b.as_slice_mut().expect("contiguous bias"),
                ]
            })
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|g| g.is_finite()))
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.weights.iter().map(|w| w.dim()).collect()
    }

    /// Input gradient of the first (or only) batch row.
    pub fn input_gradient(&self) -> Vec<f64> {
        self.input.row(0).to_vec()
    }
}

fn slice(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("contiguous weights")
}

impl MlpParameters {
    pub fn new(
        layers: Vec<Layer>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self, NumericsError> {
        if layers.is_empty() {
            return Err(NumericsError::Shape(
                "network needs at least one layer".into(),
            ));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NumericsError::Shape(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    k + 1,
                    pair[1].in_dim()
                )));
            }
        }
        let params = Self {
            layers: layers
                .into_iter()
                .map(|l| Layer::new(l.weights, l.bias))
                .collect::<Result<_, _>>()?,
            hidden_activation,
            output_activation,
        };
        if !params.is_finite() {
            return Err(NumericsError::NonFinite { what: "parameter" });
        }
        Ok(params)
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization. The last
    /// layer is additionally multiplied by `final_layer_scale`.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        final_layer_scale: f64,
        rng: &mut R,
    ) -> Result<Self, NumericsError> {
        if sizes.len() < 2 {
            return Err(NumericsError::Shape(
                "need at least an input and an output size".into(),
            ));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, dims)| {
                let (fan_in, fan_out) = (dims[0], dims[1]);
                let mut bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                if k == last {
                    bound *= final_layer_scale;
                }
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                    rng.random_range(-1.0..=1.0) * bound
                });
                let bias =
                    Array1::from_shape_simple_fn(fan_out, || rng.random_range(-1.0..=1.0) * bound);
                Layer { weights, bias }
            })
            .collect();
        Self::new(layers, hidden_activation, output_activation)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    /// Same weights with a different hidden activation.
    pub fn with_hidden_activation(mut self, kind: Activation) -> Self {
        self.hidden_activation = kind;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// `(out, in)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| l.weights.dim()).collect()
    }

    /// Layer widths including input and output, e.g. `[12, 64, 32, 1]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Flat parameter tensors, alternating weights (row-major) and biases.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                slice(&l.weights),
                l.bias.as_slice().expect("contiguous bias"),
            ]
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weights.as_slice_mut().expect("contiguous weights"),
                l.bias.as_slice_mut().expect("contiguous bias"),
            ]
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<(), NumericsError> {
        if cols != self.input_dim() {
            return Err(NumericsError::Shape(format!(
                "input has {cols} values, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass over a `batch x in` matrix.
    pub fn forward_batch(
        &self,
        input: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, ForwardCache), NumericsError> {
        self.check_input(input.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut h = input.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = affine(h.view(), layer);
            let act = self.activation_for(k);
            let out = z.mapv(|v| act.eval(v));
            inputs.push(h);
            pre_activations.push(z);
            h = out;
        }
        Ok((
            h,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without recording a cache.
    pub fn predict_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>, NumericsError> {
        self.check_input(input.ncols())?;
        let mut h = input.to_owned();
        for (k, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(k);
            h = affine(h.view(), layer);
            h.mapv_inplace(|v| act.eval(v));
        }
        Ok(h)
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NumericsError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let (out, cache) = self.forward_batch(x)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NumericsError> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        Ok(self.predict_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Exact gradients of `sum_rows(output . upstream)`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<GradientBundle, NumericsError> {
        if cache.inputs.len() != self.layers.len() {
            return Err(NumericsError::Shape(format!(
                "cache covers {} layers, network has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        for (k, (layer, x)) in self.layers.iter().zip(&cache.inputs).enumerate() {
            if x.ncols() != layer.in_dim() || cache.pre_activations[k].ncols() != layer.out_dim() {
                return Err(NumericsError::Shape(format!(
                    "cache layer {k} does not match network shapes"
                )));
            }
        }
        let batch = cache.batch_size();
        if upstream.dim() != (batch, self.output_dim()) {
            return Err(NumericsError::Shape(format!(
                "upstream gradient is {:?}, expected {:?}",
                upstream.dim(),
                (batch, self.output_dim())
            )));
        }

        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut delta = upstream.to_owned();
        apply_derivative(
            &mut delta,
            &cache.pre_activations[n - 1],
            self.output_activation,
        );
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let mut gw = Array2::zeros(layer.weights.raw_dim());
            general_mat_mul(1.0, &delta.t(), &cache.inputs[k], 0.0, &mut gw);
            weights.push(gw);
            biases.push(delta.sum_axis(Axis(0)));
            let mut prev = delta.dot(&layer.weights);
            if k > 0 {
                apply_derivative(
                    &mut prev,
                    &cache.pre_activations[k - 1],
                    self.hidden_activation,
                );
            }
            delta = prev;
        }
        weights.reverse();
        biases.reverse();
        Ok(GradientBundle {
            weights,
            biases,
            input: delta,
        })
    }
}

fn affine(h: ArrayView2<'_, f64>, layer: &Layer) -> Array2<f64> {
    let mut z = h.dot(&layer.weights.t());
    z += &layer.bias;
    z
}

fn apply_derivative(delta: &mut Array2<f64>, pre: &Array2<f64>, act: Activation) {
    if act == Activation::Linear {
        return;
    }
    Zip::from(delta)
        .and(pre)
        .for_each(|d, &z| *d *= act.derivative(z));
}

//! A desk-scale differentiable convolutional autoencoder with
//! hand-derived gradients. It hosts the clipping fine-tune loop at a
//! size where every gradient can be checked against finite differences.

pub mod conv;
pub mod data;
pub mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{FloatModel, WeightTensor};
use conv::{conv_backward, conv_forward, relu, relu_backward, tconv_backward, tconv_forward, Tensor3};

pub const STRIDE: usize = 2;
pub const PAD: usize = 2;
pub const KERNEL: usize = 5;

/// One convolution or transposed-convolution layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weight: WeightTensor,
    pub bias: Vec<f64>,
    pub transposed: bool,
    pub relu: bool,
}

/// Encoder (stride-2 conv x2) plus decoder (stride-2 transposed conv x2).
/// ReLU follows the first layer of each half; the final layers carry no
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyAutoencoder {
    pub layers: Vec<ConvLayer>,
}

/// Per-layer gradient buffers matching the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Forward-pass intermediates for one sample.
pub struct Cache {
    inputs: Vec<Tensor3>,
    pre_activations: Vec<Tensor3>,
}

impl ToyAutoencoder {
    /// Default topology: 3 -> 8 -> 8 encoder, 8 -> 8 -> 3 decoder.
    pub fn new(seed: u64) -> Self {
        Self::with_channels(3, 8, seed)
    }

    /// Same shape with a custom image-channel and feature-channel count.
    pub fn with_channels(image_channels: usize, features: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = [
            (features, image_channels, false, true),
            (features, features, false, false),
            (features, features, true, true),
            (image_channels, features, true, false),
        ];
        let layers = spec
            .iter()
            .map(|&(o, i, transposed, relu)| {
                let bound = (1.0 / (i as f64 * (KERNEL * KERNEL) as f64)).sqrt();
                let values = (0..o * i * KERNEL * KERNEL)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                ConvLayer {
                    weight: WeightTensor::new(o, i, KERNEL, KERNEL, values).expect("valid init"),
                    bias: vec![0.0; o],
                    transposed,
                    relu,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn image_channels(&self) -> usize {
        self.layers[0].weight.in_channels()
    }

    /// Run the network. Input sides must be divisible by 4.
    pub fn forward(&self, x: &Tensor3) -> Result<(Tensor3, Cache)> {
        if x.h % 4 != 0 || x.w % 4 != 0 {
            return Err(Error::Domain(format!(
                "input {}x{} sides must be divisible by 4",
                x.h, x.w
            )));
        }
        if x.c != self.image_channels() {
            return Err(Error::Domain(format!(
                "input has {} channels, network expects {}",
                x.c,
                self.image_channels()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            inputs.push(cur.clone());
            let pre = if layer.transposed {
                tconv_forward(&cur, &layer.weight, &layer.bias, STRIDE, PAD)
            } else {
                conv_forward(&cur, &layer.weight, &layer.bias, STRIDE, PAD)
            };
            cur = if layer.relu { relu(&pre) } else { pre.clone() };
            pre_activations.push(pre);
        }
        Ok((
            cur,
            Cache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Backpropagate an output gradient, accumulating into `grads`.
    pub fn backward(&self, cache: &Cache, output_grad: &Tensor3, grads: &mut Gradients) {
        let mut g = output_grad.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.relu {
                g = relu_backward(&cache.pre_activations[l], &g);
            }
            let (gx, gw, gb) = if layer.transposed {
                tconv_backward(&cache.inputs[l], &layer.weight, STRIDE, PAD, &g)
            } else {
                conv_backward(&cache.inputs[l], &layer.weight, STRIDE, PAD, &g)
            };
            for (acc, v) in grads.weights[l].iter_mut().zip(&gw) {
                *acc += v;
            }
            for (acc, v) in grads.biases[l].iter_mut().zip(&gb) {
                *acc += v;
            }
            g = gx;
        }
    }

    /// Convolution weights as a float model, in layer order. Biases are
    /// not part of the weight file format.
    pub fn weights_to_float_model(&self) -> Result<FloatModel> {
        FloatModel::new(self.layers.iter().map(|l| l.weight.clone()).collect())
    }

    /// Replace all convolution weights from a float model.
    pub fn set_weights(&mut self, model: &FloatModel) -> Result<()> {
        if model.manifest().layer_count() != self.layers.len() {
            return Err(Error::Validation(format!(
                "model has {} layers, network has {}",
                model.manifest().layer_count(),
                self.layers.len()
            )));
        }
        for (layer, tensor) in self.layers.iter_mut().zip(model.tensors()) {
            if tensor.dims() != layer.weight.dims() {
                return Err(Error::Validation("layer dimensions do not match".into()));
            }
            layer.weight = tensor.clone();
        }
        Ok(())
    }

    pub fn assert_finite(&self) -> Result<()> {
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weight.values().iter().any(|v| !v.is_finite())
                || layer.bias.iter().any(|v| !v.is_finite())
            {
                return Err(Error::Numeric(format!("layer {} has non-finite parameters", l)));
            }
        }
        Ok(())
    }
}

impl Gradients {
    pub fn zeros_like(net: &ToyAutoencoder) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn assert_finite(&self) -> Result<()> {
        let finite = self
            .weights
            .iter()
            .flatten()
            .chain(self.biases.iter().flatten())
            .all(|v| v.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::Numeric("non-finite gradient".into()))
        }
    }
}

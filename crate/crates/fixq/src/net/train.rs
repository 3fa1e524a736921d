//! Training loop, SGD step with optional gradient masks, and
//! evaluation with optionally swapped-in quantized weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::dequantize_model;
use crate::tensor::QuantizedModel;

use super::conv::Tensor3;
use super::data::synth_image;
use super::{Gradients, ToyAutoencoder};

/// Loss and loop settings. The loss is the distortion term
/// `J = lambda * MSE(x, xhat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub iterations_train: usize,
    pub iterations_finetune: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub patch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.015,
            learning_rate: 20.0,
            iterations_train: 5000,
            iterations_finetune: 500,
            batch_size: 8,
            seed: 0,
            patch: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(Error::Validation("lambda must be positive".into()));
        }
        if self.batch_size == 0 || self.patch == 0 || self.patch % 4 != 0 {
            return Err(Error::Validation(
                "batch size must be positive and patch divisible by 4".into(),
            ));
        }
        Ok(())
    }
}

/// One training metric line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub loss: f64,
    pub mse: f64,
}

impl TrainRecord {
    pub fn render(&self) -> String {
        format!(
            "record=train iter={} loss={:e} mse={:e}",
            self.iteration, self.loss, self.mse
        )
    }
}

/// Forward + backward over a batch: returns `J = lambda * MSE` and the
/// parameter gradients.
pub fn batch_loss_and_grads(
    net: &ToyAutoencoder,
    batch: &[Tensor3],
    lambda: f64,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::Domain("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(net);
    let mut sq_err = 0.0;
    let per_image = batch[0].data.len();
    let n = (batch.len() * per_image) as f64;
    for x in batch {
        let (xhat, cache) = net.forward(x)?;
        let mut gout = Tensor3::zeros(xhat.c, xhat.h, xhat.w);
        for (i, (&p, &t)) in xhat.data.iter().zip(&x.data).enumerate() {
            let d = p - t;
            sq_err += d * d;
            gout.data[i] = lambda * 2.0 * d / n;
        }
        net.backward(&cache, &gout, &mut grads);
    }
    let mse = sq_err / n;
    Ok((lambda * mse, grads))
}

/// SGD update `w <- w - lr * g`, with weight gradients zeroed wherever
/// the optional mask is 0. Biases are never masked.
pub fn sgd_step(
    net: &mut ToyAutoencoder,
    grads: &Gradients,
    learning_rate: f64,
    masks: Option<&[Vec<f64>]>,
) -> Result<()> {
    grads.assert_finite()?;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        for (i, w) in layer.weight.values_mut().iter_mut().enumerate() {
            let mask = masks.map_or(1.0, |m| m[l][i]);
            *w -= learning_rate * grads.weights[l][i] * mask;
        }
        for (i, b) in layer.bias.iter_mut().enumerate() {
            *b -= learning_rate * grads.biases[l][i];
        }
    }
    Ok(())
}

/// Run `iterations` SGD steps on synthetic batches drawn from the
/// config seed. `mask_fn`, when set, produces per-weight gradient masks
/// from the current network each iteration. On divergence the network
/// is restored to its last finite state and an error is returned.
pub fn train_loop(
    net: &mut ToyAutoencoder,
    config: &TrainConfig,
    iterations: usize,
    mask_fn: Option<&dyn Fn(&ToyAutoencoder) -> Vec<Vec<f64>>>,
    mut on_record: impl FnMut(&TrainRecord),
) -> Result<()> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let channels = net.image_channels();
    for iteration in 0..iterations {
        let batch: Vec<Tensor3> = (0..config.batch_size)
            .map(|_| synth_image(&mut rng, config.patch, channels))
            .collect();
        let last_good = net.clone();
        let (loss, grads) = batch_loss_and_grads(net, &batch, config.lambda)?;
        if !loss.is_finite() {
            *net = last_good;
            return Err(Error::Numeric(format!(
                "loss diverged at iteration {}",
                iteration
            )));
        }
        let masks = mask_fn.map(|f| f(net));
        if let Err(e) = sgd_step(net, &grads, config.learning_rate, masks.as_deref()) {
            *net = last_good;
            return Err(e);
        }
        if net.assert_finite().is_err() {
            *net = last_good;
            return Err(Error::Numeric(format!(
                "parameters diverged at iteration {}",
                iteration
            )));
        }
        if iteration % 100 == 0 || iteration + 1 == iterations {
            on_record(&TrainRecord {
                iteration,
                loss,
                mse: loss / config.lambda,
            });
        }
    }
    Ok(())
}

/// Evaluation metrics. `psnr` is `+inf` when the reconstruction is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub mse: f64,
    pub psnr: f64,
}

/// Mean reconstruction error over a dataset. When `quantized` is given,
/// its dequantized weights replace the network's weights for the
/// evaluation (biases are kept).
pub fn evaluate(
    net: &ToyAutoencoder,
    dataset: &[Tensor3],
    quantized: Option<&QuantizedModel>,
) -> Result<EvalMetrics> {
    if dataset.is_empty() {
        return Err(Error::Domain("empty evaluation dataset".into()));
    }
    let swapped;
    let eval_net = match quantized {
        Some(qm) => {
            let mut clone = net.clone();
            clone.set_weights(&dequantize_model(qm)?)?;
            swapped = clone;
            &swapped
        }
        None => net,
    };
    let mut sq_err = 0.0;
    let mut n = 0usize;
    for x in dataset {
        let (xhat, _) = eval_net.forward(x)?;
        for (&p, &t) in xhat.data.iter().zip(&x.data) {
            let d = p - t;
            sq_err += d * d;
        }
        n += x.data.len();
    }
    let mse = sq_err / n as f64;
    let psnr = if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    };
    Ok(EvalMetrics { mse, psnr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::Grouping;
    use crate::net::data::synth_dataset;
    use crate::pipeline::quantize_model;
    use crate::quant::FixedPointFormat;
    use crate::tensor::Scheme;

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut net = ToyAutoencoder::with_channels(2, 3, 1);
        let before = net.clone();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            patch: 8,
            ..TrainConfig::default()
        };
        train_loop(&mut net, &cfg, 3, None, |_| {}).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn all_zero_mask_freezes_weights() {
        let mut net = ToyAutoencoder::with_channels(2, 3, 1);
        let before = net.clone();
        let cfg = TrainConfig {
            patch: 8,
            ..TrainConfig::default()
        };
        let zero_masks = |net: &ToyAutoencoder| {
            net.layers.iter().map(|l| vec![0.0; l.weight.len()]).collect()
        };
        train_loop(&mut net, &cfg, 2, Some(&zero_masks), |_| {}).unwrap();
        for (a, b) in net.layers.iter().zip(&before.layers) {
            assert_eq!(a.weight, b.weight);
            assert_ne!(a.bias, b.bias); // biases still train
        }
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // Single parameter, loss (w - 3)^2: gradient 2(w - 3).
        let mut w = 0.0f64;
        for _ in 0..100 {
            w -= 0.1 * 2.0 * (w - 3.0);
        }
        assert!((w - 3.0).abs() < 1e-6);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            patch: 8,
            ..TrainConfig::default()
        };
        let mut a = ToyAutoencoder::with_channels(2, 3, 5);
        let mut b = ToyAutoencoder::with_channels(2, 3, 5);
        train_loop(&mut a, &cfg, 50, None, |_| {}).unwrap();
        train_loop(&mut b, &cfg, 50, None, |_| {}).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn psnr_worked_values() {
        let net = ToyAutoencoder::with_channels(2, 3, 0);
        let data = synth_dataset(1, 2, 8, 2);
        let m = evaluate(&net, &data, None).unwrap();
        assert!(m.mse > 0.0 && m.psnr.is_finite());
        // 10 * log10(1 / 1e-3) = 30 dB.
        let mse = 1e-3f64;
        assert!((10.0 * (1.0 / mse).log10() - 30.0).abs() < 1e-12);
    }

    #[test]
    fn quantized_eval_never_beats_float_eval() {
        let mut net = ToyAutoencoder::new(3);
        let cfg = TrainConfig {
            patch: 8,
            ..TrainConfig::default()
        };
        train_loop(&mut net, &cfg, 200, None, |_| {}).unwrap();
        let data = synth_dataset(77, 4, 8, 3);
        let float_m = evaluate(&net, &data, None).unwrap();
        let qm = quantize_model(
            &net.weights_to_float_model().unwrap(),
            Scheme::Nlq,
            Grouping::Cw,
            FixedPointFormat::default(),
        )
        .unwrap();
        let quant_m = evaluate(&net, &data, Some(&qm)).unwrap();
        assert!(quant_m.mse >= float_m.mse);
    }
}

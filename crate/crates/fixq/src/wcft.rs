//! Weight-clipping fine tuning: clip each group's maximum magnitude
//! just below its power-of-two ceiling (doubling the scale factor),
//! then fine-tune with straight-through-estimator gradient masking.

use crate::error::{Error, Result};
use crate::grouping::{partition, Grouping};
use crate::net::train::{evaluate, train_loop, EvalMetrics, TrainConfig, TrainRecord};
use crate::net::{data::synth_dataset, ToyAutoencoder};
use crate::pipeline::quantize_model;
use crate::quant::{floor_log2, pow2, scale_exponent, FixedPointFormat};
use crate::tensor::Scheme;

/// Relative epsilon: `eps = 2^E * 1e-6`, so the clipped maximum
/// `2^E - eps` keeps `floor(log2)` exactly one below `E` at every scale.
pub const EPSILON_RELATIVE: f64 = 1e-6;

/// Clip outcome for one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipPlan {
    pub layer: usize,
    pub group: usize,
    pub threshold: f64,
    pub clipped_count: usize,
    pub old_exponent: i32,
    pub new_exponent: i32,
}

/// Clip threshold `t = 2^E - eps` with `E = floor(log2 max|w|)`.
/// Returns `None` for an all-zero group (nothing to clip).
pub fn clip_threshold(weights: &[f64]) -> Option<f64> {
    let max = weights.iter().fold(0.0f64, |m, &w| m.max(w.abs()));
    if max == 0.0 {
        return None;
    }
    let exponent = floor_log2(max);
    let ceiling = pow2(exponent);
    Some(ceiling - ceiling * EPSILON_RELATIVE)
}

/// Magnitude clipping preserving sign: `w' = sign(w) * min(|w|, t)`.
/// Returns the number of weights clipped.
pub fn clip_weights(weights: &mut [f64], threshold: f64) -> usize {
    let mut clipped = 0;
    for w in weights {
        if w.abs() > threshold {
            *w = w.signum() * threshold;
            clipped += 1;
        }
    }
    clipped
}

/// STE mask: 1 where `|w| <= t` (gradient preserved), 0 elsewhere.
pub fn ste_mask(weights: &[f64], threshold: f64) -> Vec<f64> {
    weights
        .iter()
        .map(|&w| if w.abs() <= threshold { 1.0 } else { 0.0 })
        .collect()
}

/// Frozen per-layer, per-group thresholds from clip time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipThresholds {
    pub grouping: Grouping,
    /// One entry per layer: `(flat range, threshold)` per group.
    /// All-zero groups carry no threshold.
    pub layers: Vec<Vec<(std::ops::Range<usize>, f64)>>,
}

impl ClipThresholds {
    /// Per-weight gradient masks for the current network state.
    pub fn masks(&self, net: &ToyAutoencoder) -> Vec<Vec<f64>> {
        net.layers
            .iter()
            .zip(&self.layers)
            .map(|(layer, thresholds)| {
                let mut mask = vec![1.0; layer.weight.len()];
                for (range, t) in thresholds {
                    for i in range.clone() {
                        if layer.weight.values()[i].abs() > *t {
                            mask[i] = 0.0;
                        }
                    }
                }
                mask
            })
            .collect()
    }
}

/// Clip every group of every layer in place. Returns the plans and the
/// frozen thresholds for fine-tuning.
pub fn clip_net(net: &mut ToyAutoencoder, grouping: Grouping) -> (Vec<ClipPlan>, ClipThresholds) {
    let mut plans = Vec::new();
    let mut layers = Vec::new();
    for (layer_index, layer) in net.layers.iter_mut().enumerate() {
        let groups = partition(&layer.weight, grouping);
        let mut thresholds = Vec::new();
        for group in &groups {
            let weights = &mut layer.weight.values_mut()[group.range.clone()];
            let Some(threshold) = clip_threshold(weights) else {
                continue;
            };
            let old_exponent = scale_exponent(weights);
            let clipped_count = clip_weights(weights, threshold);
            let new_exponent = scale_exponent(weights);
            plans.push(ClipPlan {
                layer: layer_index,
                group: group.index,
                threshold,
                clipped_count,
                old_exponent,
                new_exponent,
            });
            thresholds.push((group.range.clone(), threshold));
        }
        layers.push(thresholds);
    }
    (plans, ClipThresholds { grouping, layers })
}

/// Quantized-domain quality of one arm of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmReport {
    pub float_eval: EvalMetrics,
    pub quantized_eval: EvalMetrics,
    pub zero_code_fraction: f64,
    pub per_group_zero_fraction: Vec<f64>,
}

/// Outcome of the full training procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct WcftReport {
    pub plans: Vec<ClipPlan>,
    pub baseline_zero_fraction: Vec<f64>,
    pub clipped_only: ArmReport,
    pub finetuned: ArmReport,
}

pub struct WcftOutcome {
    pub trained: ToyAutoencoder,
    pub clipped: ToyAutoencoder,
    pub finetuned: ToyAutoencoder,
    pub report: WcftReport,
}

/// The whole procedure: train, clip every group, fine-tune with STE,
/// then quantize and evaluate both arms.
pub fn run_wcft(
    mut net: ToyAutoencoder,
    config: &TrainConfig,
    grouping: Grouping,
    scheme: Scheme,
    format: FixedPointFormat,
    mut on_record: impl FnMut(&TrainRecord),
) -> Result<WcftOutcome> {
    config.validate()?;
    train_loop(&mut net, config, config.iterations_train, None, &mut on_record)?;
    finetune_from(net, config, grouping, scheme, format, on_record)
}

/// The post-training half of the procedure: clip a trained network and fine-tune with
/// STE masks, then quantize and evaluate both arms.
pub fn finetune_from(
    mut net: ToyAutoencoder,
    config: &TrainConfig,
    grouping: Grouping,
    scheme: Scheme,
    format: FixedPointFormat,
    mut on_record: impl FnMut(&TrainRecord),
) -> Result<WcftOutcome> {
    if scheme == Scheme::Lloyd {
        return Err(Error::Unsupported(
            "weight-clipping fine tuning supports lq and nlq schemes".into(),
        ));
    }
    config.validate()?;

    let trained = net.clone();
    let baseline_zero_fraction = zero_fractions(&trained, scheme, grouping, format)?;

    let (plans, thresholds) = clip_net(&mut net, grouping);
    let clipped = net.clone();

    let mask_fn = |n: &ToyAutoencoder| thresholds.masks(n);
    let mut finetune_cfg = *config;
    finetune_cfg.seed = config.seed.wrapping_add(0x9e3779b97f4a7c15);
    train_loop(
        &mut net,
        &finetune_cfg,
        config.iterations_finetune,
        Some(&mask_fn),
        &mut on_record,
    )?;
    let finetuned = net;

    let eval_data = synth_dataset(
        config.seed.wrapping_add(1),
        16,
        config.patch,
        trained.image_channels(),
    );
    let clipped_report = arm_report(&clipped, &eval_data, scheme, grouping, format)?;
    let finetuned_report = arm_report(&finetuned, &eval_data, scheme, grouping, format)?;

    Ok(WcftOutcome {
        trained,
        clipped,
        finetuned,
        report: WcftReport {
            plans,
            baseline_zero_fraction,
            clipped_only: clipped_report,
            finetuned: finetuned_report,
        },
    })
}

fn arm_report(
    net: &ToyAutoencoder,
    eval_data: &[crate::net::conv::Tensor3],
    scheme: Scheme,
    grouping: Grouping,
    format: FixedPointFormat,
) -> Result<ArmReport> {
    let qm = quantize_model(&net.weights_to_float_model()?, scheme, grouping, format)?;
    let float_eval = evaluate(net, eval_data, None)?;
    let quantized_eval = evaluate(net, eval_data, Some(&qm))?;
    let per_group_zero_fraction = zero_fractions(net, scheme, grouping, format)?;
    let total: usize = qm.layers.iter().map(|l| l.codes.len()).sum();
    let zeros: usize = qm
        .layers
        .iter()
        .flat_map(|l| &l.codes)
        .filter(|&&c| c == 0)
        .count();
    Ok(ArmReport {
        float_eval,
        quantized_eval,
        zero_code_fraction: zeros as f64 / total as f64,
        per_group_zero_fraction,
    })
}

fn zero_fractions(
    net: &ToyAutoencoder,
    scheme: Scheme,
    grouping: Grouping,
    format: FixedPointFormat,
) -> Result<Vec<f64>> {
    let qm = quantize_model(&net.weights_to_float_model()?, scheme, grouping, format)?;
    let mut out = Vec::new();
    for (tensor, layer) in net.layers.iter().zip(&qm.layers) {
        for group in partition(&tensor.weight, grouping) {
            let zeros = layer.codes[group.range.clone()]
                .iter()
                .filter(|&&c| c == 0)
                .count();
            out.push(zeros as f64 / group.len() as f64);
        }
    }
    Ok(out)
}

impl WcftReport {
    /// Structured text table plus key/value records.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>5} {:>5} {:>12} {:>8} {:>6} {:>6}\n",
            "layer", "group", "threshold", "clipped", "E_old", "E_new"
        ));
        for p in &self.plans {
            out.push_str(&format!(
                "{:>5} {:>5} {:>12.6} {:>8} {:>6} {:>6}\n",
                p.layer, p.group, p.threshold, p.clipped_count, p.old_exponent, p.new_exponent
            ));
        }
        for (name, arm) in [("clipped", &self.clipped_only), ("finetuned", &self.finetuned)] {
            out.push_str(&format!(
                "record=wcft_arm arm={} float_mse={:e} quant_mse={:e} quant_psnr={:.4} zero_fraction={:.6}\n",
                name,
                arm.float_eval.mse,
                arm.quantized_eval.mse,
                arm.quantized_eval.psnr,
                arm.zero_code_fraction
            ));
        }
        out
    }
}

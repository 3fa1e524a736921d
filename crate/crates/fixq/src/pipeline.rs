//! Whole-model quantization: partition, scale, quantize, encode, and
//! the analysis-only precision sweep.

use crate::error::{Error, Result};
use crate::grouping::{partition, Grouping};
use crate::lloyd::{
    lloyd_codebook, nearest, optimal_codebook, DEFAULT_MAX_ITER, DEFAULT_TOL,
    OPTIMAL_CODEBOOK_MAX_N,
};
use crate::quant::{
    lq_decode, lq_encode, nlq_decode, nlq_encode, pow2, quantize_lq, quantize_nlq, scale_exponent,
    scale_group, FixedPointFormat, NlqCode,
};
use crate::tensor::{FloatModel, QuantLayer, QuantizedModel, Scheme, WeightTensor};

/// Quantize every layer of a float model.
///
/// Lloyd with CW grouping is refused: a per-channel LUT is exactly the
/// memory cost the format avoids.
pub fn quantize_model(
    model: &FloatModel,
    scheme: Scheme,
    grouping: Grouping,
    format: FixedPointFormat,
) -> Result<QuantizedModel> {
    quantize_model_with_threads(model, scheme, grouping, format, 1)
}

/// [`quantize_model`] with a worker-thread bound. Layers are processed
/// independently and merged in order, so output is byte-identical to
/// the sequential path.
pub fn quantize_model_with_threads(
    model: &FloatModel,
    scheme: Scheme,
    grouping: Grouping,
    format: FixedPointFormat,
    threads: usize,
) -> Result<QuantizedModel> {
    if scheme == Scheme::Lloyd && grouping == Grouping::Cw {
        return Err(Error::Unsupported(
            "lloyd scheme with cw grouping: per-channel codebooks are not supported".into(),
        ));
    }
    let threads = threads.max(1);
    let tensors = model.tensors();
    let layers: Vec<Result<QuantLayer>> = if threads == 1 || tensors.len() == 1 {
        tensors
            .iter()
            .enumerate()
            .map(|(i, t)| quantize_layer(i, t, scheme, grouping, format))
            .collect()
    } else {
        let mut results: Vec<Option<Result<QuantLayer>>> = (0..tensors.len()).map(|_| None).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for _ in 0..threads.min(tensors.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= tensors.len() {
                        break;
                    }
                    let out = quantize_layer(i, &tensors[i], scheme, grouping, format);
                    slots.lock().unwrap()[i] = Some(out);
                });
            }
        });
        results.into_iter().map(|r| r.expect("every layer visited")).collect()
    };
    let layers = layers.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(QuantizedModel {
        manifest: model.manifest().clone(),
        scheme,
        grouping,
        fl: format.fl,
        layers,
    })
}

fn quantize_layer(
    layer_index: usize,
    tensor: &WeightTensor,
    scheme: Scheme,
    grouping: Grouping,
    format: FixedPointFormat,
) -> Result<QuantLayer> {
    let groups = partition(tensor, grouping);
    let mut codes = vec![0u8; tensor.len()];
    let mut exponents = Vec::with_capacity(groups.len());
    let mut codebooks = if scheme == Scheme::Lloyd {
        Some(Vec::with_capacity(groups.len()))
    } else {
        None
    };

    for group in &groups {
        let weights = &tensor.values()[group.range.clone()];
        let exponent = scale_exponent(weights);
        if !(-8..=7).contains(&exponent) {
            return Err(Error::Domain(format!(
                "layer {} group {}: scale exponent {} outside 4-bit range",
                layer_index, group.index, exponent
            )));
        }
        exponents.push(exponent as i8);
        let scaled = scale_group(weights, exponent);
        match scheme {
            Scheme::Lq => {
                for (slot, &sw) in codes[group.range.clone()].iter_mut().zip(&scaled) {
                    *slot = lq_encode(quantize_lq(sw, format.fl as u32)?, format)?;
                }
            }
            Scheme::Nlq => {
                for (slot, &sw) in codes[group.range.clone()].iter_mut().zip(&scaled) {
                    *slot = nlq_encode(quantize_nlq(sw, format)?, format)?.0;
                }
            }
            Scheme::Lloyd => {
                let k = 1usize << format.fl;
                // Small groups get the exact DP solution; iterative
                // Lloyd from the uniform grid covers the rest.
                let cb = if scaled.len() <= OPTIMAL_CODEBOOK_MAX_N {
                    optimal_codebook(&scaled, k)?
                } else {
                    lloyd_codebook(&scaled, k, DEFAULT_MAX_ITER, DEFAULT_TOL)?
                };
                // Codewords live in files as f32; round now so assignment,
                // memory, and disk all agree bit-exactly.
                let codewords: Vec<f64> = cb.codewords.iter().map(|&c| c as f32 as f64).collect();
                if codewords.len() > 256 {
                    return Err(Error::Domain("codebook exceeds 8-bit index range".into()));
                }
                for (slot, &sw) in codes[group.range.clone()].iter_mut().zip(&scaled) {
                    *slot = nearest(&codewords, sw) as u8;
                }
                codebooks.as_mut().unwrap().push(codewords);
            }
        }
    }

    Ok(QuantLayer {
        codes,
        exponents,
        codebooks,
    })
}

/// Reconstruct weights: `w = decode(code) * 2^E`. Exact arithmetic.
pub fn dequantize_model(model: &QuantizedModel) -> Result<FloatModel> {
    model.validate()?;
    let format = FixedPointFormat::new(7 - model.fl, model.fl)?;
    let mut tensors = Vec::with_capacity(model.layers.len());
    for (dims, layer) in model.manifest.layers().iter().zip(&model.layers) {
        let mut tensor = WeightTensor::zeros(
            dims.out_channels as usize,
            dims.in_channels as usize,
            dims.kernel_h as usize,
            dims.kernel_w as usize,
        );
        let groups = partition(&tensor, model.grouping);
        for group in &groups {
            let sf_inv = pow2(layer.exponents[group.index] as i32);
            for i in group.range.clone() {
                let q = match model.scheme {
                    Scheme::Lq => lq_decode(layer.codes[i], format),
                    Scheme::Nlq => nlq_decode(NlqCode(layer.codes[i]), format)?,
                    Scheme::Lloyd => {
                        let cb = &layer.codebooks.as_ref().unwrap()[group.index];
                        *cb.get(layer.codes[i] as usize).ok_or_else(|| {
                            Error::Format(format!("code {} outside codebook", layer.codes[i]))
                        })?
                    }
                };
                tensor.values_mut()[i] = q * sf_inv;
            }
        }
        tensors.push(tensor);
    }
    FloatModel::new(tensors)
}

/// One row of a precision-sweep report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub offset: u32,
    pub fl_eff: u32,
    pub mse: f64,
    pub zero_fraction: f64,
}

/// Quantize with LQ at `FL + offset` for each offset and report the
/// weight-domain MSE and fraction of zero codes.
///
/// Offsets above 0 exceed the 8-bit storage budget; this is analysis
/// only and never serialized.
pub fn precision_sweep(
    model: &FloatModel,
    grouping: Grouping,
    offsets: &[u32],
    format: FixedPointFormat,
) -> Result<Vec<SweepPoint>> {
    if let Some(&bad) = offsets.iter().find(|&&e| e > 3) {
        return Err(Error::Domain(format!("offset {} outside 0..=3", bad)));
    }
    let mut points = Vec::with_capacity(offsets.len());
    for &offset in offsets {
        let fl_eff = format.fl as u32 + offset;
        let mut sq_err = 0.0;
        let mut zeros = 0u64;
        let mut total = 0u64;
        for tensor in model.tensors() {
            for group in partition(tensor, grouping) {
                let weights = &tensor.values()[group.range.clone()];
                let exponent = scale_exponent(weights);
                let sf_inv = pow2(exponent);
                for &sw in &scale_group(weights, exponent) {
                    let q = quantize_lq(sw, fl_eff)?;
                    let err = (q - sw) * sf_inv;
                    sq_err += err * err;
                    if q == 0.0 {
                        zeros += 1;
                    }
                    total += 1;
                }
            }
        }
        points.push(SweepPoint {
            offset,
            fl_eff,
            mse: sq_err / total as f64,
            zero_fraction: zeros as f64 / total as f64,
        });
    }
    Ok(points)
}

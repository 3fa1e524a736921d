//! Model-size arithmetic and quantization-error statistics.
//!
//! Sizes depend only on the manifest and grouping. "MB" means 10^6
//! bytes, matching the convention that 1600 B of scale factors is
//! 0.0016 MB.

use crate::error::{Error, Result};
use crate::grouping::{group_count, partition, Grouping};
use crate::pipeline::dequantize_model;
use crate::tensor::{FloatModel, ModelManifest, QuantizedModel};

/// Bytes of the 32-bit float model: `sum(I*H*W*O) * 4`.
pub fn original_model_size(manifest: &ModelManifest) -> u64 {
    manifest.total_params() * 4
}

/// The quantized payload: one byte per weight plus half a byte per
/// group scale factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposedSize {
    pub weight_bytes: u64,
    /// Exact half-byte accounting: `group count * 0.5`.
    pub sf_bytes_exact: f64,
    /// Whole-byte figure after per-layer nibble padding.
    pub sf_bytes_serialized: u64,
    pub total_exact: f64,
    pub total_serialized: u64,
}

/// Quantized model size under a grouping scheme.
pub fn proposed_model_size(manifest: &ModelManifest, grouping: Grouping) -> ProposedSize {
    let weight_bytes = manifest.total_params();
    let sf_bytes_exact = group_count(manifest, grouping) as f64 * 0.5;
    let sf_bytes_serialized: u64 = manifest
        .layers()
        .iter()
        .map(|d| {
            let g = match grouping {
                Grouping::Lw => 1u64,
                Grouping::Cw => d.out_channels as u64,
            };
            g.div_ceil(2)
        })
        .sum();
    ProposedSize {
        weight_bytes,
        sf_bytes_exact,
        sf_bytes_serialized,
        total_exact: weight_bytes as f64 + sf_bytes_exact,
        total_serialized: weight_bytes + sf_bytes_serialized,
    }
}

/// Per-layer rows plus whole-model totals.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeReport {
    pub grouping: Grouping,
    pub original_bytes: u64,
    pub proposed: ProposedSize,
    pub ratio: f64,
    pub per_layer: Vec<LayerSizeRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSizeRow {
    pub layer: usize,
    pub params: u64,
    pub groups: u64,
    pub original_bytes: u64,
    pub proposed_bytes_exact: f64,
}

/// Combine both size formulas into a report.
pub fn size_report(manifest: &ModelManifest, grouping: Grouping) -> SizeReport {
    let original_bytes = original_model_size(manifest);
    let proposed = proposed_model_size(manifest, grouping);
    let per_layer = manifest
        .layers()
        .iter()
        .enumerate()
        .map(|(layer, d)| {
            let params = d.param_count();
            let groups = match grouping {
                Grouping::Lw => 1,
                Grouping::Cw => d.out_channels as u64,
            };
            LayerSizeRow {
                layer,
                params,
                groups,
                original_bytes: params * 4,
                proposed_bytes_exact: params as f64 + groups as f64 * 0.5,
            }
        })
        .collect();
    SizeReport {
        grouping,
        original_bytes,
        ratio: proposed.total_exact / original_bytes as f64,
        proposed,
        per_layer,
    }
}

impl SizeReport {
    const MB: f64 = 1e6;

    /// Fixed-width text table in MB.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>5} {:>12} {:>8} {:>14} {:>16}\n",
            "layer", "params", "groups", "original (MB)", "proposed (MB)"
        ));
        for row in &self.per_layer {
            out.push_str(&format!(
                "{:>5} {:>12} {:>8} {:>14.6} {:>16.6}\n",
                row.layer,
                row.params,
                row.groups,
                row.original_bytes as f64 / Self::MB,
                row.proposed_bytes_exact / Self::MB,
            ));
        }
        out.push_str(&format!(
            "total ({}): original {:.4} MB | weights {:.4} MB + sf {:.4} MB = {:.4} MB | ratio {:.2}%\n",
            self.grouping,
            self.original_bytes as f64 / Self::MB,
            self.proposed.weight_bytes as f64 / Self::MB,
            self.proposed.sf_bytes_exact / Self::MB,
            self.proposed.total_exact / Self::MB,
            self.ratio * 100.0,
        ));
        out
    }

    /// Line-delimited key/value records.
    pub fn render_records(&self) -> String {
        format!(
            "record=size grouping={} original_bytes={} weight_bytes={} sf_bytes_exact={} \
             sf_bytes_serialized={} total_exact={} total_serialized={} ratio={:.6}\n",
            self.grouping,
            self.original_bytes,
            self.proposed.weight_bytes,
            self.proposed.sf_bytes_exact,
            self.proposed.sf_bytes_serialized,
            self.proposed.total_exact,
            self.proposed.total_serialized,
            self.ratio,
        )
    }
}

/// Per-group error statistics in the original weight domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub layer: usize,
    pub group: usize,
    pub mse: f64,
    pub max_abs_error: f64,
    pub zero_code_fraction: f64,
}

/// Whole-model quantization error summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub groups: Vec<GroupStats>,
    pub model_mse: f64,
    pub model_max_abs_error: f64,
    pub model_zero_fraction: f64,
}

/// Compare a float model against its quantized form after dequantization.
pub fn quant_error_stats(model: &FloatModel, quantized: &QuantizedModel) -> Result<ErrorStats> {
    if model.manifest() != &quantized.manifest {
        return Err(Error::Validation("manifests do not match".into()));
    }
    let reconstructed = dequantize_model(quantized)?;
    let mut groups = Vec::new();
    let mut total_sq = 0.0;
    let mut total_n = 0u64;
    let mut total_zero = 0u64;
    let mut max_abs = 0.0f64;
    for (layer, (orig, recon)) in model
        .tensors()
        .iter()
        .zip(reconstructed.tensors())
        .enumerate()
    {
        for g in partition(orig, quantized.grouping) {
            let mut sq = 0.0;
            let mut zeros = 0u64;
            let mut gmax = 0.0f64;
            for i in g.range.clone() {
                let err = orig.values()[i] - recon.values()[i];
                sq += err * err;
                gmax = gmax.max(err.abs());
                if quantized.layers[layer].codes[i] == 0 {
                    zeros += 1;
                }
            }
            let n = g.len() as u64;
            groups.push(GroupStats {
                layer,
                group: g.index,
                mse: sq / n as f64,
                max_abs_error: gmax,
                zero_code_fraction: zeros as f64 / n as f64,
            });
            total_sq += sq;
            total_n += n;
            total_zero += zeros;
            max_abs = max_abs.max(gmax);
        }
    }
    Ok(ErrorStats {
        groups,
        model_mse: total_sq / total_n as f64,
        model_max_abs_error: max_abs,
        model_zero_fraction: total_zero as f64 / total_n as f64,
    })
}

impl ErrorStats {
    pub fn render_records(&self) -> String {
        let mut out = format!(
            "record=error_stats model_mse={:e} model_max_abs_error={:e} model_zero_fraction={:.6}\n",
            self.model_mse, self.model_max_abs_error, self.model_zero_fraction
        );
        for g in &self.groups {
            out.push_str(&format!(
                "record=group_stats layer={} group={} mse={:e} max_abs_error={:e} zero_fraction={:.6}\n",
                g.layer, g.group, g.mse, g.max_abs_error, g.zero_code_fraction
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::quantize_model;
    use crate::quant::FixedPointFormat;
    use crate::tensor::{LayerDims, Scheme, WeightTensor};

    fn tiny_manifest() -> ModelManifest {
        ModelManifest::new(vec![LayerDims::new(4, 2, 3, 3)]).unwrap()
    }

    #[test]
    fn original_size_tiny() {
        assert_eq!(original_model_size(&tiny_manifest()), 288);
    }

    #[test]
    fn proposed_size_tiny() {
        let p = proposed_model_size(&tiny_manifest(), Grouping::Cw);
        assert_eq!(p.weight_bytes, 72);
        assert_eq!(p.sf_bytes_exact, 2.0);
        assert_eq!(p.total_exact, 74.0);
        let report = size_report(&tiny_manifest(), Grouping::Cw);
        assert!((report.ratio - 74.0 / 288.0).abs() < 1e-15);
    }

    #[test]
    fn lw_sf_bytes_round_up_per_layer() {
        let m = ModelManifest::new(vec![LayerDims::new(2, 2, 3, 3); 17]).unwrap();
        let p = proposed_model_size(&m, Grouping::Lw);
        assert_eq!(p.sf_bytes_exact, 8.5);
        assert_eq!(p.sf_bytes_serialized, 17);
    }

    #[test]
    fn ratio_always_exceeds_one_quarter() {
        let m = ModelManifest::new(vec![LayerDims::new(128, 64, 5, 5)]).unwrap();
        for grouping in [Grouping::Lw, Grouping::Cw] {
            let r = size_report(&m, grouping);
            assert!(r.ratio > 0.25);
            let algebraic = 0.25
                + group_count(&m, grouping) as f64 * 0.5 / (m.total_params() as f64 * 4.0);
            assert!((r.ratio - algebraic).abs() < 1e-15);
        }
    }

    #[test]
    fn already_quantized_model_has_zero_error() {
        let values: Vec<f64> = (0..72).map(|i| ((i % 37) as f64 - 18.0) / 64.0).collect();
        let model = FloatModel::new(vec![WeightTensor::new(4, 2, 3, 3, values).unwrap()]).unwrap();
        let fmt = FixedPointFormat::default();
        let qm = quantize_model(&model, Scheme::Lq, Grouping::Lw, fmt).unwrap();
        let deq = crate::pipeline::dequantize_model(&qm).unwrap();
        let qm2 = quantize_model(&deq, Scheme::Lq, Grouping::Lw, fmt).unwrap();
        let stats = quant_error_stats(&deq, &qm2).unwrap();
        assert_eq!(stats.model_mse, 0.0);
    }

    #[test]
    fn all_zero_model_stats() {
        let model = FloatModel::new(vec![WeightTensor::zeros(4, 2, 3, 3)]).unwrap();
        let fmt = FixedPointFormat::default();
        let qm = quantize_model(&model, Scheme::Nlq, Grouping::Cw, fmt).unwrap();
        let stats = quant_error_stats(&model, &qm).unwrap();
        assert_eq!(stats.model_mse, 0.0);
        assert_eq!(stats.model_zero_fraction, 1.0);
    }
}

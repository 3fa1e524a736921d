//! In-memory containers for float and quantized convolution weights.
//!
//! Values live as `f64` in memory even though files store `f32`; every
//! quantization decision is made on the widened values.

use crate::error::{Error, Result};

/// Upper bound on elements per layer, guarding allocations during parsing.
pub const MAX_LAYER_ELEMS: usize = 1 << 31;

/// A 4-D convolution kernel, row-major `[out][in][kh][kw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    out_channels: usize,
    in_channels: usize,
    kernel_h: usize,
    kernel_w: usize,
    values: Vec<f64>,
}

impl WeightTensor {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 {
            return Err(Error::Validation(format!(
                "tensor dimensions must be positive, got {}x{}x{}x{}",
                out_channels, in_channels, kernel_h, kernel_w
            )));
        }
        let expected = checked_elems(out_channels, in_channels, kernel_h, kernel_w)?;
        if values.len() != expected {
            return Err(Error::Validation(format!(
                "value count {} does not match {}x{}x{}x{} = {}",
                values.len(),
                out_channels,
                in_channels,
                kernel_h,
                kernel_w,
                expected
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at flat index {}",
                bad
            )));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            values,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        let n = out_channels * in_channels * kernel_h * kernel_w;
        Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            values: vec![0.0; n],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_h(&self) -> usize {
        self.kernel_h
    }

    pub fn kernel_w(&self) -> usize {
        self.kernel_w
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Flat index of `[o][i][h][w]`.
    pub fn index(&self, o: usize, i: usize, h: usize, w: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel_h + h) * self.kernel_w + w
    }

    pub fn dims(&self) -> LayerDims {
        LayerDims {
            out_channels: self.out_channels as u32,
            in_channels: self.in_channels as u32,
            kernel_h: self.kernel_h as u32,
            kernel_w: self.kernel_w as u32,
        }
    }
}

fn checked_elems(o: usize, i: usize, h: usize, w: usize) -> Result<usize> {
    o.checked_mul(i)
        .and_then(|p| p.checked_mul(h))
        .and_then(|p| p.checked_mul(w))
        .filter(|&p| p <= MAX_LAYER_ELEMS)
        .ok_or_else(|| Error::Overflow(format!("layer {}x{}x{}x{} too large", o, i, h, w)))
}

/// Dimensions of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerDims {
    pub out_channels: u32,
    pub in_channels: u32,
    pub kernel_h: u32,
    pub kernel_w: u32,
}

impl LayerDims {
    pub fn new(out_channels: u32, in_channels: u32, kernel_h: u32, kernel_w: u32) -> Self {
        Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
        }
    }

    pub fn param_count(&self) -> u64 {
        self.out_channels as u64 * self.in_channels as u64 * self.kernel_h as u64 * self.kernel_w as u64
    }
}

/// Ordered layer descriptors for a whole model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelManifest {
    layers: Vec<LayerDims>,
}

impl ModelManifest {
    pub fn new(layers: Vec<LayerDims>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("manifest must have at least one layer".into()));
        }
        for (i, d) in layers.iter().enumerate() {
            if d.out_channels == 0 || d.in_channels == 0 || d.kernel_h == 0 || d.kernel_w == 0 {
                return Err(Error::Validation(format!(
                    "layer {} has a zero dimension",
                    i
                )));
            }
            checked_elems(
                d.out_channels as usize,
                d.in_channels as usize,
                d.kernel_h as usize,
                d.kernel_w as usize,
            )?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerDims] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn total_params(&self) -> u64 {
        self.layers.iter().map(|d| d.param_count()).sum()
    }
}

/// A float model: manifest plus one weight tensor per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    manifest: ModelManifest,
    tensors: Vec<WeightTensor>,
}

impl FloatModel {
    pub fn new(tensors: Vec<WeightTensor>) -> Result<Self> {
        let manifest = ModelManifest::new(tensors.iter().map(|t| t.dims()).collect())?;
        Ok(Self { manifest, tensors })
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn tensors(&self) -> &[WeightTensor] {
        &self.tensors
    }

    pub fn into_tensors(self) -> Vec<WeightTensor> {
        self.tensors
    }
}

/// Quantization scheme tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Lq,
    Nlq,
    Lloyd,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        match self {
            Scheme::Lq => 0,
            Scheme::Nlq => 1,
            Scheme::Lloyd => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Scheme::Lq),
            1 => Ok(Scheme::Nlq),
            2 => Ok(Scheme::Lloyd),
            t => Err(Error::Format(format!("unknown scheme tag {}", t))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Lq => "lq",
            Scheme::Nlq => "nlq",
            Scheme::Lloyd => "lloyd",
        })
    }
}

/// One quantized layer: 8-bit codes, per-group scale exponents,
/// and (Lloyd only) one codebook per group.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantLayer {
    pub codes: Vec<u8>,
    pub exponents: Vec<i8>,
    pub codebooks: Option<Vec<Vec<f64>>>,
}

/// A fully quantized model.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub manifest: ModelManifest,
    pub scheme: Scheme,
    pub grouping: crate::grouping::Grouping,
    pub fl: u8,
    pub layers: Vec<QuantLayer>,
}

impl QuantizedModel {
    /// Structural consistency: code lengths, group counts, exponent range.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.manifest.layer_count() {
            return Err(Error::Validation(format!(
                "layer count {} does not match manifest {}",
                self.layers.len(),
                self.manifest.layer_count()
            )));
        }
        for (i, (layer, dims)) in self.layers.iter().zip(self.manifest.layers()).enumerate() {
            if layer.codes.len() as u64 != dims.param_count() {
                return Err(Error::Validation(format!(
                    "layer {}: {} codes for {} weights",
                    i,
                    layer.codes.len(),
                    dims.param_count()
                )));
            }
            let expected_groups = match self.grouping {
                crate::grouping::Grouping::Lw => 1,
                crate::grouping::Grouping::Cw => dims.out_channels as usize,
            };
            if layer.exponents.len() != expected_groups {
                return Err(Error::Validation(format!(
                    "layer {}: {} exponents for {} groups",
                    i,
                    layer.exponents.len(),
                    expected_groups
                )));
            }
            for (g, &e) in layer.exponents.iter().enumerate() {
                if !(-8..=7).contains(&e) {
                    return Err(Error::Validation(format!(
                        "layer {} group {}: exponent {} outside 4-bit range [-8,7]",
                        i, g, e
                    )));
                }
            }
            match (&layer.codebooks, self.scheme) {
                (Some(cbs), Scheme::Lloyd) => {
                    if cbs.len() != expected_groups {
                        return Err(Error::Validation(format!(
                            "layer {}: {} codebooks for {} groups",
                            i,
                            cbs.len(),
                            expected_groups
                        )));
                    }
                }
                (None, Scheme::Lloyd) => {
                    return Err(Error::Validation(format!("layer {}: Lloyd model without codebooks", i)))
                }
                (Some(_), _) => {
                    return Err(Error::Validation(format!(
                        "layer {}: codebooks present for non-Lloyd scheme",
                        i
                    )))
                }
                (None, _) => {}
            }
        }
        Ok(())
    }
}

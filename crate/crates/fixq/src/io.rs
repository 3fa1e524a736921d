//! Bit-exact binary model formats.
//!
//! FXF1 (float model), little-endian throughout:
//!   magic "FXF1" | u32 layer count | per layer:
//!   u32 O, I, H, W | O*I*H*W f32 values in row-major [o][i][h][w].
//!
//! FXQ1 (quantized model):
//!   magic "FXQ1" | u8 scheme | u8 grouping | u8 FL | u8 reserved=0 |
//!   u32 layer count | per layer: u32 O, I, H, W | u32 group count G |
//!   ceil(G/2) bytes of packed 4-bit two's-complement exponents
//!   (low nibble first, zero-padded) |
//!   Lloyd only: u32 K, then G*K f32 codewords | O*I*H*W u8 codes.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grouping::Grouping;
use crate::tensor::{FloatModel, LayerDims, ModelManifest, QuantLayer, QuantizedModel, Scheme, WeightTensor};

pub const FXF1_MAGIC: [u8; 4] = *b"FXF1";
pub const FXQ1_MAGIC: [u8; 4] = *b"FXQ1";

/// Fixed bytes of an FXQ1 file that carry structure rather than payload:
/// 12 for the file header plus 20 per layer (dims + group count).
pub fn fxq1_header_bytes(layer_count: usize) -> u64 {
    12 + 20 * layer_count as u64
}

/// Write a float model. Returns the exact byte count:
/// `8 + sum(16 + 4*O*I*H*W)`.
pub fn save_float_model<W: Write>(model: &FloatModel, sink: &mut W) -> Result<u64> {
    for (i, t) in model.tensors().iter().enumerate() {
        if let Some(v) = t.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("layer {}: non-finite value {}", i, v)));
        }
    }
    sink.write_all(&FXF1_MAGIC)?;
    sink.write_all(&(model.manifest().layer_count() as u32).to_le_bytes())?;
    let mut written = 8u64;
    for t in model.tensors() {
        let d = t.dims();
        for dim in [d.out_channels, d.in_channels, d.kernel_h, d.kernel_w] {
            sink.write_all(&dim.to_le_bytes())?;
        }
        for &v in t.values() {
            sink.write_all(&(v as f32).to_le_bytes())?;
        }
        written += 16 + 4 * t.len() as u64;
    }
    Ok(written)
}

/// Read a float model written by [`save_float_model`]. File values are
/// widened exactly from f32 to f64.
pub fn load_float_model<R: Read>(source: &mut R) -> Result<FloatModel> {
    expect_magic(source, FXF1_MAGIC)?;
    let layer_count = read_u32(source, "layer count")?;
    if layer_count == 0 {
        return Err(Error::Validation("model has no layers".into()));
    }
    let mut tensors = Vec::with_capacity(layer_count.min(1024) as usize);
    for layer in 0..layer_count {
        let dims = read_dims(source, layer)?;
        let n = dims.param_count() as usize;
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 4];
        for _ in 0..n {
            read_exact(source, &mut buf, &format!("layer {} values", layer))?;
            values.push(f32::from_le_bytes(buf) as f64);
        }
        tensors.push(WeightTensor::new(
            dims.out_channels as usize,
            dims.in_channels as usize,
            dims.kernel_h as usize,
            dims.kernel_w as usize,
            values,
        )?);
    }
    FloatModel::new(tensors)
}

/// Write a quantized model. Returns the exact byte count.
pub fn save_quantized_model<W: Write>(model: &QuantizedModel, sink: &mut W) -> Result<u64> {
    model.validate()?;
    sink.write_all(&FXQ1_MAGIC)?;
    sink.write_all(&[model.scheme.tag(), model.grouping.tag(), model.fl, 0])?;
    sink.write_all(&(model.manifest.layer_count() as u32).to_le_bytes())?;
    let mut written = 12u64;
    for (layer, dims) in model.layers.iter().zip(model.manifest.layers()) {
        for dim in [dims.out_channels, dims.in_channels, dims.kernel_h, dims.kernel_w] {
            sink.write_all(&dim.to_le_bytes())?;
        }
        sink.write_all(&(layer.exponents.len() as u32).to_le_bytes())?;
        let packed = pack_nibbles(&layer.exponents);
        sink.write_all(&packed)?;
        written += 20 + packed.len() as u64;
        if let Some(codebooks) = &layer.codebooks {
            let k = codebooks.first().map_or(0, |cb| cb.len());
            if codebooks.iter().any(|cb| cb.len() != k) {
                return Err(Error::Validation("ragged codebooks in one layer".into()));
            }
            sink.write_all(&(k as u32).to_le_bytes())?;
            written += 4;
            for cb in codebooks {
                for &c in cb {
                    sink.write_all(&(c as f32).to_le_bytes())?;
                    written += 4;
                }
            }
        }
        sink.write_all(&layer.codes)?;
        written += layer.codes.len() as u64;
    }
    Ok(written)
}

/// Read a quantized model written by [`save_quantized_model`].
pub fn load_quantized_model<R: Read>(source: &mut R) -> Result<QuantizedModel> {
    expect_magic(source, FXQ1_MAGIC)?;
    let mut head = [0u8; 4];
    read_exact(source, &mut head, "header")?;
    let scheme = Scheme::from_tag(head[0])?;
    let grouping = Grouping::from_tag(head[1])?;
    let fl = head[2];
    if fl > 7 {
        return Err(Error::Format(format!("fractional bits {} exceed the 8-bit budget", fl)));
    }
    if head[3] != 0 {
        return Err(Error::Format(format!("reserved byte is {}, not 0", head[3])));
    }
    let layer_count = read_u32(source, "layer count")?;
    if layer_count == 0 {
        return Err(Error::Validation("model has no layers".into()));
    }
    let mut dims_list = Vec::new();
    let mut layers = Vec::new();
    for layer in 0..layer_count {
        let dims = read_dims(source, layer)?;
        let groups = read_u32(source, &format!("layer {} group count", layer))? as usize;
        let expected_groups = match grouping {
            Grouping::Lw => 1,
            Grouping::Cw => dims.out_channels as usize,
        };
        if groups != expected_groups {
            return Err(Error::Format(format!(
                "layer {}: group count {} does not match {} grouping",
                layer, groups, grouping
            )));
        }
        let mut packed = vec![0u8; groups.div_ceil(2)];
        read_exact(source, &mut packed, &format!("layer {} exponents", layer))?;
        let exponents = unpack_nibbles(&packed, groups);
        let codebooks = if scheme == Scheme::Lloyd {
            let k = read_u32(source, &format!("layer {} codebook size", layer))? as usize;
            if k == 0 || k > 256 {
                return Err(Error::Format(format!("layer {}: codebook size {}", layer, k)));
            }
            let mut cbs = Vec::with_capacity(groups);
            let mut buf = [0u8; 4];
            for _ in 0..groups {
                let mut cb = Vec::with_capacity(k);
                for _ in 0..k {
                    read_exact(source, &mut buf, &format!("layer {} codebook", layer))?;
                    cb.push(f32::from_le_bytes(buf) as f64);
                }
                cbs.push(cb);
            }
            Some(cbs)
        } else {
            None
        };
        let mut codes = vec![0u8; dims.param_count() as usize];
        read_exact(source, &mut codes, &format!("layer {} codes", layer))?;
        dims_list.push(dims);
        layers.push(QuantLayer {
            codes,
            exponents,
            codebooks,
        });
    }
    let model = QuantizedModel {
        manifest: ModelManifest::new(dims_list)?,
        scheme,
        grouping,
        fl,
        layers,
    };
    model.validate()?;
    Ok(model)
}

/// Two exponents per byte, low nibble first, zero-padded final nibble.
pub fn pack_nibbles(exponents: &[i8]) -> Vec<u8> {
    let mut out = vec![0u8; exponents.len().div_ceil(2)];
    for (i, &e) in exponents.iter().enumerate() {
        let nib = (e as u8) & 0x0f;
        out[i / 2] |= if i % 2 == 0 { nib } else { nib << 4 };
    }
    out
}

/// Inverse of [`pack_nibbles`], sign-extending each 4-bit field.
pub fn unpack_nibbles(packed: &[u8], count: usize) -> Vec<i8> {
    (0..count)
        .map(|i| {
            let byte = packed[i / 2];
            let nib = if i % 2 == 0 { byte & 0x0f } else { byte >> 4 };
            ((nib << 4) as i8) >> 4
        })
        .collect()
}

fn expect_magic<R: Read>(source: &mut R, expected: [u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    read_exact(source, &mut found, "magic")?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

fn read_exact<R: Read>(source: &mut R, buf: &mut [u8], context: &str) -> Result<()> {
    source.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated(context.to_string())
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(source: &mut R, context: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(source, &mut buf, context)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_dims<R: Read>(source: &mut R, layer: u32) -> Result<LayerDims> {
    let ctx = format!("layer {} dimensions", layer);
    let o = read_u32(source, &ctx)?;
    let i = read_u32(source, &ctx)?;
    let h = read_u32(source, &ctx)?;
    let w = read_u32(source, &ctx)?;
    let dims = LayerDims::new(o, i, h, w);
    if o == 0 || i == 0 || h == 0 || w == 0 {
        return Err(Error::Validation(format!("layer {}: zero dimension", layer)));
    }
    let elems = (o as u64) * (i as u64) * (h as u64) * (w as u64);
    if elems > crate::tensor::MAX_LAYER_ELEMS as u64 {
        return Err(Error::Overflow(format!("layer {}: {} elements", layer, elems)));
    }
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model() -> FloatModel {
        let values: Vec<f64> = (0..72).map(|i| (i as f32 * 0.01 - 0.3) as f64).collect();
        FloatModel::new(vec![WeightTensor::new(4, 2, 3, 3, values).unwrap()]).unwrap()
    }

    #[test]
    fn float_byte_count_matches_formula() {
        let mut buf = Vec::new();
        let n = save_float_model(&tiny_model(), &mut buf).unwrap();
        assert_eq!(n, 312);
        assert_eq!(buf.len(), 312);
    }

    #[test]
    fn float_roundtrip_is_bit_exact() {
        let model = tiny_model();
        let mut buf = Vec::new();
        save_float_model(&model, &mut buf).unwrap();
        let loaded = load_float_model(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn bad_magic_is_distinct() {
        let mut buf = Vec::new();
        save_float_model(&tiny_model(), &mut buf).unwrap();
        buf[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(
            load_float_model(&mut buf.as_slice()),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn truncation_names_the_layer() {
        let mut buf = Vec::new();
        save_float_model(&tiny_model(), &mut buf).unwrap();
        buf.truncate(100);
        match load_float_model(&mut buf.as_slice()) {
            Err(Error::Truncated(ctx)) => assert!(ctx.contains("layer 0"), "{}", ctx),
            other => panic!("expected truncation, got {:?}", other),
        }
    }

    #[test]
    fn nibble_packing_layout() {
        assert_eq!(pack_nibbles(&[-2, 3]), vec![0x3e]);
        assert_eq!(pack_nibbles(&[-1]), vec![0x0f]);
        assert_eq!(unpack_nibbles(&[0x3e], 2), vec![-2, 3]);
        assert_eq!(unpack_nibbles(&[0x0f], 1), vec![-1]);
        for e in -8i8..=7 {
            assert_eq!(unpack_nibbles(&pack_nibbles(&[e]), 1), vec![e]);
        }
    }

    #[test]
    fn quantized_roundtrip_with_nibbles() {
        let manifest = ModelManifest::new(vec![LayerDims::new(4, 2, 3, 3)]).unwrap();
        let model = QuantizedModel {
            manifest,
            scheme: Scheme::Nlq,
            grouping: Grouping::Cw,
            fl: 6,
            layers: vec![QuantLayer {
                codes: (0..72).map(|i| if i as u8 == 0x80 { 0 } else { i as u8 }).collect(),
                exponents: vec![-3, 0, 7, -8],
                codebooks: None,
            }],
        };
        let mut buf = Vec::new();
        let n = save_quantized_model(&model, &mut buf).unwrap();
        // 12 header + 20 layer header + 2 exponent bytes + 72 codes.
        assert_eq!(n, 12 + 20 + 2 + 72);
        let loaded = load_quantized_model(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn exponent_out_of_range_refused_at_save() {
        let manifest = ModelManifest::new(vec![LayerDims::new(1, 1, 1, 1)]).unwrap();
        let model = QuantizedModel {
            manifest,
            scheme: Scheme::Lq,
            grouping: Grouping::Lw,
            fl: 6,
            layers: vec![QuantLayer {
                codes: vec![0],
                exponents: vec![9],
                codebooks: None,
            }],
        };
        let mut buf = Vec::new();
        assert!(save_quantized_model(&model, &mut buf).is_err());
    }
}

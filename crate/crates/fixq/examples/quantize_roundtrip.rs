//! Quantize a random model with every scheme/grouping combination and
//! show that the on-disk form reproduces the in-memory codes exactly.
//!
//!     cargo run --example quantize_roundtrip

use fixq::accounting::quant_error_stats;
use fixq::io::{load_quantized_model, save_quantized_model};
use fixq::pipeline::quantize_model;
use fixq::{FixedPointFormat, FloatModel, Grouping, Scheme, WeightTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_model(seed: u64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::new();
    for &(o, i) in &[(8usize, 3usize), (16, 8), (8, 16)] {
        let values = (0..o * i * 3 * 3)
            .map(|_| rng.gen_range(-0.8..0.8))
            .collect();
        tensors.push(WeightTensor::new(o, i, 3, 3, values).unwrap());
    }
    FloatModel::new(tensors).unwrap()
}

fn main() -> fixq::Result<()> {
    let model = random_model(7);
    let format = FixedPointFormat::default();

    let combos = [
        (Scheme::Lq, Grouping::Lw),
        (Scheme::Lq, Grouping::Cw),
        (Scheme::Nlq, Grouping::Lw),
        (Scheme::Nlq, Grouping::Cw),
        (Scheme::Lloyd, Grouping::Lw),
    ];
    for (scheme, grouping) in combos {
        let quantized = quantize_model(&model, scheme, grouping, format)?;

        let mut bytes = Vec::new();
        let written = save_quantized_model(&quantized, &mut bytes)?;
        let reloaded = load_quantized_model(&mut bytes.as_slice())?;
        assert_eq!(quantized, reloaded, "file round trip must be exact");

        let stats = quant_error_stats(&model, &quantized)?;
        println!(
            "{:>5} {:?}  bytes={:>4}  mse={:.3e}  max_err={:.3e}  zero_frac={:.4}",
            scheme.to_string(),
            grouping,
            written,
            stats.model_mse,
            stats.model_max_abs_error,
            stats.model_zero_fraction
        );
    }
    Ok(())
}

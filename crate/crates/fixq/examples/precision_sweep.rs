//! Sweep the fractional bit width above the 8-bit budget and watch the
//! quantization error fall while the zero-code fraction shrinks.
//!
//!     cargo run --example precision_sweep

use fixq::pipeline::precision_sweep;
use fixq::{FixedPointFormat, FloatModel, Grouping, WeightTensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> fixq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0f64, 0.05).unwrap();
    let tensor = WeightTensor::new(
        32,
        16,
        3,
        3,
        (0..32 * 16 * 9).map(|_| normal.sample(&mut rng)).collect(),
    )?;
    let model = FloatModel::new(vec![tensor])?;

    let points = precision_sweep(
        &model,
        Grouping::Cw,
        &[0, 1, 2, 3],
        FixedPointFormat::default(),
    )?;

    println!("{:>6} {:>6} {:>12} {:>10}", "offset", "FL", "mse", "zero_frac");
    for p in &points {
        println!(
            "{:>6} {:>6} {:>12.4e} {:>10.4}",
            p.offset, p.fl_eff, p.mse, p.zero_fraction
        );
    }

    // Each extra fractional bit halves the step size, so the MSE should
    // drop by roughly 4x per row.
    for pair in points.windows(2) {
        assert!(pair[1].mse <= pair[0].mse);
    }
    Ok(())
}

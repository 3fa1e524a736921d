//! Weight-clipping fine tuning end to end: train, halve every group's
//! dynamic range by clipping, then fine-tune with straight-through
//! masks and compare the two quantized arms.
//!
//!     cargo run --release --example wcft_demo

use fixq::net::train::TrainConfig;
use fixq::net::ToyAutoencoder;
use fixq::wcft::run_wcft;
use fixq::{FixedPointFormat, Grouping, Scheme};

fn main() -> fixq::Result<()> {
    let config = TrainConfig {
        iterations_train: 1500,
        iterations_finetune: 300,
        ..TrainConfig::default()
    };

    let outcome = run_wcft(
        ToyAutoencoder::new(config.seed),
        &config,
        Grouping::Cw,
        Scheme::Nlq,
        FixedPointFormat::default(),
        |r| {
            if r.iteration % 500 == 0 {
                println!("{}", r.render());
            }
        },
    )?;

    print!("{}", outcome.report.render());

    // Every group loses exactly one exponent bit of range.
    assert!(outcome
        .report
        .plans
        .iter()
        .all(|p| p.new_exponent == p.old_exponent - 1));
    let clipped = outcome.report.clipped_only.quantized_eval.mse;
    let finetuned = outcome.report.finetuned.quantized_eval.mse;
    println!(
        "fine tuning recovered {:.1}% of the clipping damage",
        100.0 * (1.0 - finetuned / clipped)
    );
    Ok(())
}
